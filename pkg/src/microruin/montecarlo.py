"""Independent simulation oracle for the analytic pipeline.

Every quantity the analytic path produces (slot scaling factors, connection
revenue, per-interval net profit, surplus paths, ruin frequencies) is sampled
here directly from the network model: serving distance from the nearest-cell
density, per-slot unit-mean exponential fading, and an interferer point
process of the configured density simulated on the annulus between the
serving distance and a truncation radius ``factor / sqrt(beta)``.  The mean
interference of the neglected far field, ``2 pi beta P_I R^(2-alpha) /
(alpha - 2)``, is added back exactly, so truncation leaves only a
second-order fluctuation error (verified by the radius-doubling test).

Randomness is organized as counter-based (Philox) streams keyed by
(seed, stage, interval, batch), so fixed seeds give bit-identical results,
batches may run in any order, and sweeps over the initial capital reuse
common random numbers (the surplus paths do not depend on u at all).

By default the interferer configuration is redrawn every slot, matching the
per-slot independence the analytic transform assumes; ``frozen_interferers``
keeps positions fixed over a connection and redraws only the fading marks.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError
from .model import ScenarioConfig
from .moments import MomentVector

__all__ = [
    "SimulationPlan",
    "plan_from_config",
    "sample_user_revenue",
    "sample_revenues",
    "sample_slot_scaling",
    "estimate_moments",
    "simulate_surplus_paths",
    "MCRuinEstimate",
]

_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SimulationPlan:
    """Sampling budgets and stream seeding for one simulation campaign."""

    seed: int = 20260808
    n_users: int = 1_000_000
    n_paths: int = 20_000
    ppp_radius_factor: float = 8.0
    antithetic: bool = False
    frozen_interferers: bool = False
    batch_size: int = 65_536


def plan_from_config(config: ScenarioConfig) -> SimulationPlan:
    num = config.numerics
    return SimulationPlan(
        seed=num.seed,
        n_users=num.mc_samples,
        n_paths=num.mc_paths,
        ppp_radius_factor=num.ppp_radius_factor,
        antithetic=num.antithetic,
        frozen_interferers=num.frozen_interferers,
        batch_size=num.mc_batch,
    )


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _stream(seed: int, *path) -> np.random.Generator:
    """Philox generator keyed by (seed, *path); strings are hashed stably."""
    k0 = _mix64(seed & _MASK)
    k1 = _mix64(k0 ^ 0xD1B54A32D192ED03)
    for part in path:
        if isinstance(part, str):
            part = int.from_bytes(hashlib.blake2b(part.encode(), digest_size=8).digest(), "big")
        k0 = _mix64(k0 ^ (part & _MASK))
        k1 = _mix64(k1 ^ _mix64(part & _MASK))
    key = np.array([k0, k1], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _inverse_pmf_sample(rng, values, probs, size, antithetic=False):
    u = _uniforms(rng, size, antithetic)
    edges = np.cumsum(probs)
    edges[-1] = 1.0
    idx = np.searchsorted(edges, u, side="right")
    return np.asarray(values)[idx]


def _uniforms(rng, size, antithetic=False):
    if not antithetic:
        return rng.random(size)
    half = (size + 1) // 2
    u = rng.random(half)
    return np.concatenate((u, 1.0 - u))[:size]


def _far_field_mean(net, radius: float) -> float:
    """Mean interference from beyond the truncation radius (exact)."""
    alpha = net.alpha_pathloss
    return (2.0 * math.pi * net.beta_cells_per_area * net.p_i_interferer_power
            * radius ** (2.0 - alpha) / (alpha - 2.0))


def _revenue_batch(config: ScenarioConfig, plan: SimulationPlan, rng, n: int,
                   duration_model) -> np.ndarray:
    """One batch of i.i.d. connection revenues.  Draw order is fixed:
    distances, durations, products, then per-slot fading / interferers."""
    net, fin = config.network, config.financial
    alpha = net.alpha_pathloss
    beta = net.beta_cells_per_area
    unit = config.slot_income_per_unit_scaling
    radius = plan.ppp_radius_factor / math.sqrt(beta)
    mu_far = _far_field_mean(net, radius)

    u_dist = _uniforms(rng, n, plan.antithetic)
    r_u = np.sqrt(-np.log1p(-u_dist) / (math.pi * beta))
    values, probs = duration_model.pmf()
    taus = _inverse_pmf_sample(rng, values, probs, n, plan.antithetic)
    if config.products.q_count > 1:
        gaps = _inverse_pmf_sample(rng, config.products.rate_gaps,
                                   config.products.product_mix, n)
    else:
        gaps = np.full(n, config.products.rate_gaps[0])

    total_slots = int(taus.sum())
    user_of_slot = np.repeat(np.arange(n), taus)
    r_slot = r_u[user_of_slot]
    gap_slot = gaps[user_of_slot]
    h = rng.exponential(1.0, size=total_slots)

    lam_user = beta * math.pi * np.maximum(radius * radius - r_u * r_u, 0.0)
    if plan.frozen_interferers:
        m_user = rng.poisson(lam_user)
        u_pos = rng.random(int(m_user.sum()))
        x_sq_user = np.repeat(r_u * r_u, m_user) + np.repeat(
            np.maximum(radius * radius - r_u * r_u, 0.0), m_user) * u_pos
        # replicate each user's fixed positions across its slots
        m_slot = np.repeat(m_user, taus)
        starts_user = np.concatenate(([0], np.cumsum(m_user)))
        pieces = [x_sq_user[starts_user[u]: starts_user[u + 1]] for u in user_of_slot]
        x_sq = np.concatenate(pieces) if pieces else np.empty(0)
    else:
        m_slot = rng.poisson(lam_user[user_of_slot])
        total_pts = int(m_slot.sum())
        u_pos = rng.random(total_pts)
        r2_slot = r_slot * r_slot
        x_sq = np.repeat(r2_slot, m_slot) + np.repeat(
            np.maximum(radius * radius - r2_slot, 0.0), m_slot) * u_pos
    marks = rng.exponential(1.0, size=len(x_sq))
    offsets = np.concatenate(([0], np.cumsum(m_slot))).astype(np.int64)
    i_in = _kernels.interference_powsum(x_sq, -alpha / 2.0, marks, offsets)
    interference = net.p_i_interferer_power * i_in + mu_far

    with np.errstate(divide="ignore"):
        gamma = h * r_slot ** (-alpha) * net.p0_serving_power / (
            net.sigma2_noise_power + interference)
        c = np.clip(gap_slot / gamma, fin.c_min, fin.c_max)
    csum = np.concatenate(([0.0], np.cumsum(c)))
    slot_offsets = np.concatenate(([0], np.cumsum(taus)))
    return (csum[slot_offsets[1:]] - csum[slot_offsets[:-1]]) * unit


def sample_revenues(config: ScenarioConfig, plan: SimulationPlan, n: int,
                    stream_tag: str = "revenue", interval_index: int = 1) -> np.ndarray:
    """n i.i.d. connection revenues V (vectorized, batched, deterministic)."""
    if n < 1:
        raise DomainError(f"need n >= 1 samples, got {n}")
    duration_model = config.durations.for_interval(
        interval_index, truncate_to_interval=config.numerics.truncate_durations_to_interval)
    out = np.empty(n)
    pos = 0
    batch_idx = 0
    while pos < n:
        size = min(plan.batch_size, n - pos)
        rng = _stream(plan.seed, stream_tag, interval_index, batch_idx)
        out[pos: pos + size] = _revenue_batch(config, plan, rng, size, duration_model)
        pos += size
        batch_idx += 1
    return out


def sample_user_revenue(config: ScenarioConfig, plan: SimulationPlan,
                        interval_index: int = 1) -> float:
    """One revenue draw (a single connection)."""
    return float(sample_revenues(config, plan, 1, interval_index=interval_index)[0])


def sample_slot_scaling(config: ScenarioConfig, plan: SimulationPlan, r_u: float,
                        n: int, rate_gap: float | None = None,
                        stream_tag: str = "slot") -> np.ndarray:
    """Per-slot scaling factors at a fixed serving distance (moment oracle)."""
    net, fin = config.network, config.financial
    alpha = net.alpha_pathloss
    beta = net.beta_cells_per_area
    gap = config.products.rate_gaps[0] if rate_gap is None else rate_gap
    radius = plan.ppp_radius_factor / math.sqrt(beta)
    mu_far = _far_field_mean(net, radius)
    lam = beta * math.pi * max(radius * radius - r_u * r_u, 0.0)
    out = np.empty(n)
    pos = 0
    batch_idx = 0
    while pos < n:
        size = min(plan.batch_size, n - pos)
        rng = _stream(plan.seed, stream_tag, batch_idx)
        h = rng.exponential(1.0, size=size)
        m = rng.poisson(lam, size=size)
        u_pos = rng.random(int(m.sum()))
        x_sq = r_u * r_u + (radius * radius - r_u * r_u) * u_pos
        marks = rng.exponential(1.0, size=len(x_sq))
        offsets = np.concatenate(([0], np.cumsum(m))).astype(np.int64)
        i_in = _kernels.interference_powsum(x_sq, -alpha / 2.0, marks, offsets)
        interference = net.p_i_interferer_power * i_in + mu_far
        with np.errstate(divide="ignore"):
            gamma = h * r_u ** (-alpha) * net.p0_serving_power / (
                net.sigma2_noise_power + interference)
            out[pos: pos + size] = np.clip(gap / gamma, fin.c_min, fin.c_max)
        pos += size
        batch_idx += 1
    return out


def estimate_moments(config: ScenarioConfig, plan: SimulationPlan,
                     interval_index: int = 1):
    """Sample raw moments with delete-1 jackknife standard errors.

    Returns (MomentVector, standard_errors).
    """
    d = config.numerics.moment_order
    n = plan.n_users
    power_sums = np.zeros(2 * d)
    duration_model = config.durations.for_interval(
        interval_index, truncate_to_interval=config.numerics.truncate_durations_to_interval)
    pos = 0
    batch_idx = 0
    while pos < n:
        size = min(plan.batch_size, n - pos)
        rng = _stream(plan.seed, "moments", interval_index, batch_idx)
        v = _revenue_batch(config, plan, rng, size, duration_model)
        for s in range(1, 2 * d + 1):
            power_sums[s - 1] += float(np.sum(v ** s))
        pos += size
        batch_idx += 1
    means = power_sums / n
    raw = means[:d]
    if n > 1:
        variances = np.maximum(means[2 * np.arange(1, d + 1) - 1] - raw ** 2, 0.0)
        se = np.sqrt(variances / (n - 1))
    else:
        se = np.zeros(d)
    vec = MomentVector(interval_index=interval_index, raw=raw, order=d)
    return vec, se


@dataclass(frozen=True)
class MCRuinEstimate:
    """Empirical ruin frequencies with Wilson 95% intervals."""

    u_values: np.ndarray
    psi: np.ndarray          # (horizon, n_u)
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    n_paths: int

    def psi_at(self, horizon: int, u: float) -> float:
        j = int(np.argmin(np.abs(self.u_values - u)))
        return float(self.psi[horizon - 1, j])


def _wilson(p_hat: np.ndarray, n: int, z: float = 1.959963984540054):
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = z * np.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)) / denom
    return np.clip(center - half, 0.0, 1.0), np.clip(center + half, 0.0, 1.0)


def simulate_surplus_paths(config: ScenarioConfig, plan: SimulationPlan,
                           u_values) -> MCRuinEstimate:
    """Empirical ruin probabilities over the configured horizon.

    Simulates per-interval net profits (geometric user counts, full revenue
    sampling per user, operator fees), discounts them onto the initial-capital
    axis, and evaluates the running minimum against every requested u --
    common random numbers across the whole u sweep by construction.
    """
    fin = config.financial
    horizon = fin.horizon_intervals
    w = fin.w_n_geometric
    r = fin.interest_rate_per_interval
    n_paths = plan.n_paths
    u_values = np.asarray(u_values, dtype=float)

    discounted = np.zeros((horizon, n_paths))
    for interval in range(1, horizon + 1):
        rng_count = _stream(plan.seed, "path-count", interval)
        n_users = rng_count.geometric(w, size=n_paths) - 1
        total = int(n_users.sum())
        duration_model = config.durations.for_interval(
            interval, truncate_to_interval=config.numerics.truncate_durations_to_interval)
        if total > 0:
            revenues = np.empty(total)
            pos = 0
            batch_idx = 0
            while pos < total:
                size = min(plan.batch_size, total - pos)
                rng = _stream(plan.seed, "path-rev", interval, batch_idx)
                revenues[pos: pos + size] = _revenue_batch(config, plan, rng, size,
                                                           duration_model)
                pos += size
                batch_idx += 1
            if len(fin.operator_fees) > 1:
                rng_fee = _stream(plan.seed, "path-fee", interval)
                ops = sorted(fin.operator_mix)
                fee_values = np.array([fin.operator_fees[k] for k in ops])
                mix = np.array([fin.operator_mix[k] for k in ops])
                fees = fee_values[np.searchsorted(np.cumsum(mix), rng_fee.random(total),
                                                  side="right").clip(0, len(ops) - 1)]
            else:
                fees = np.full(total, next(iter(fin.operator_fees.values())))
            net_user = revenues - fees
            csum = np.concatenate(([0.0], np.cumsum(net_user)))
            offsets = np.concatenate(([0], np.cumsum(n_users)))
            s_net = csum[offsets[1:]] - csum[offsets[:-1]]
        else:
            s_net = np.zeros(n_paths)
        discounted[interval - 1] = s_net / (1.0 + r) ** interval

    cumulative = np.cumsum(discounted, axis=0)
    running_min = np.minimum.accumulate(cumulative, axis=0)
    psi = np.empty((horizon, len(u_values)))
    for j, u in enumerate(u_values):
        psi[:, j] = np.mean(running_min < -u, axis=1)
    ci_lo, ci_hi = _wilson(psi, n_paths)
    return MCRuinEstimate(u_values=u_values, psi=psi, ci_lo=ci_lo, ci_hi=ci_hi,
                          n_paths=n_paths)
