"""Scalar special functions backing the revenue-moment integrals.

Implements the lower incomplete gamma function, the Gauss hypergeometric
function on [0, 1), monomial coefficients of Jacobi polynomials, and the
(log-)gamma / beta pair.  Everything here is pure, deterministic, and
tolerance-driven so the downstream quadratures are reproducible; each routine
is cross-checked in the test suite against an independent quadrature or
series oracle.

The hypergeometric evaluation strategy is argument-dependent:

* ``z <= 0.5``      -- defining power series;
* ``0.5 < z <= 0.9``-- Euler transformation ``(1-z)^(c-a-b) 2F1(c-a, c-b; c; z)``;
* ``z > 0.9``       -- connection formula in powers of ``1 - z`` (requires
  ``c - a - b`` non-integer, which holds for every parameter triple reachable
  from a pathloss exponent ``alpha > 2``).

Series exhaustion raises :class:`~microruin.errors.AccuracyError` carrying the
partial sum so callers can fall back to direct quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AccuracyError, DomainError

__all__ = [
    "FnEvalOptions",
    "DEFAULT_OPTIONS",
    "lower_incomplete_gamma",
    "gauss_2f1",
    "jacobi_poly_coeffs",
    "log_gamma",
    "beta",
]


@dataclass(frozen=True)
class FnEvalOptions:
    """Accuracy knobs for the series/continued-fraction evaluations.

    rel_tol must lie in (0, 1e-3]; max_terms must be at least 16.
    """

    rel_tol: float = 1e-10
    max_terms: int = 20000

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-3):
            raise DomainError(f"rel_tol must be in (0, 1e-3], got {self.rel_tol}")
        if self.max_terms < 16:
            raise DomainError(f"max_terms must be >= 16, got {self.max_terms}")


DEFAULT_OPTIONS = FnEvalOptions()


def _require_finite(name, value):
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    _require_finite("x", x)
    if x <= 0.0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def beta(x: float, y: float) -> float:
    """Euler beta B(x, y) = Gamma(x)Gamma(y)/Gamma(x+y) for x, y > 0."""
    return math.exp(log_gamma(x) + log_gamma(y) - log_gamma(x + y))


def lower_incomplete_gamma(s: float, x: float, options: FnEvalOptions = DEFAULT_OPTIONS) -> float:
    """Unregularized lower incomplete gamma gamma(s, x) = int_0^x t^(s-1) e^-t dt.

    Uses the ascending series for x < s + 1 and the Lentz continued fraction
    for the upper tail otherwise.
    """
    _require_finite("s", s)
    _require_finite("x", x)
    if s <= 0.0:
        raise DomainError(f"lower_incomplete_gamma requires s > 0, got s={s}")
    if x < 0.0:
        raise DomainError(f"lower_incomplete_gamma requires x >= 0, got x={x}")
    if x == 0.0:
        return 0.0

    log_prefactor = s * math.log(x) - x
    if x < s + 1.0:
        # gamma(s,x) = x^s e^-x sum_n x^n / (s (s+1) ... (s+n))
        term = 1.0 / s
        total = term
        for n in range(1, options.max_terms):
            term *= x / (s + n)
            total += term
            if abs(term) <= options.rel_tol * abs(total):
                return math.exp(log_prefactor) * total
        raise AccuracyError(
            "incomplete-gamma series did not converge",
            {"s": s, "x": x, "partial_sum": math.exp(log_prefactor) * total},
        )

    # Upper incomplete Gamma(s,x) via modified Lentz; gamma = Gamma(s) - Gamma(s,x).
    tiny = 1e-300
    b = x + 1.0 - s
    c = 1.0 / tiny
    d = 1.0 / b if b != 0.0 else 1.0 / tiny
    h = d
    for i in range(1, options.max_terms):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= options.rel_tol:
            upper = math.exp(log_prefactor) * h
            return math.gamma(s) - upper
    raise AccuracyError(
        "incomplete-gamma continued fraction did not converge",
        {"s": s, "x": x, "partial_sum": math.gamma(s) - math.exp(log_prefactor) * h},
    )


def _hyp_series(a: float, b: float, c: float, z: float, options: FnEvalOptions) -> float:
    """Defining 2F1 power series; caller guarantees |z| < 1 and valid c."""
    term = 1.0
    total = 1.0
    for n in range(options.max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        total += term
        if abs(term) <= options.rel_tol * abs(total) and n >= 2:
            return total
    raise AccuracyError(
        "hypergeometric series did not converge",
        {"a": a, "b": b, "c": c, "z": z, "partial_sum": total, "last_term": term},
    )


def _is_nonpositive_integer(x: float, tol: float = 1e-12) -> bool:
    return x <= tol and abs(x - round(x)) < tol


def gauss_2f1(a: float, b: float, c: float, z: float, options: FnEvalOptions = DEFAULT_OPTIONS) -> float:
    """Gauss hypergeometric 2F1(a, b; c; z) for real parameters and z in [0, 1)."""
    for name, value in (("a", a), ("b", b), ("c", c), ("z", z)):
        _require_finite(name, value)
    if _is_nonpositive_integer(c):
        raise DomainError(f"2F1 undefined for c a nonpositive integer, got c={c}")
    if z < 0.0 or z >= 1.0:
        raise DomainError(f"gauss_2f1 requires 0 <= z < 1, got z={z}")
    if z == 0.0:
        return 1.0
    if z <= 0.5:
        return _hyp_series(a, b, c, z, options)

    s = c - a - b
    if z <= 0.9:
        return (1.0 - z) ** s * _hyp_series(c - a, c - b, c, z, options)

    # Near z = 1: connection formula in powers of w = 1 - z (DLMF 15.8.4 form),
    # valid when c - a - b is not an integer.
    if abs(s - round(s)) < 1e-10:
        raise AccuracyError(
            "2F1 connection formula unavailable (c-a-b integer); use quadrature fallback",
            {"a": a, "b": b, "c": c, "z": z},
        )
    w = 1.0 - z
    try:
        coeff1 = math.gamma(c) * math.gamma(s) / (math.gamma(c - a) * math.gamma(c - b))
        coeff2 = math.gamma(c) * math.gamma(-s) / (math.gamma(a) * math.gamma(b))
    except ValueError as exc:  # gamma pole
        raise AccuracyError(
            "2F1 connection formula hit a gamma pole; use quadrature fallback",
            {"a": a, "b": b, "c": c, "z": z, "detail": str(exc)},
        ) from exc
    term1 = coeff1 * _hyp_series(a, b, a + b - c + 1.0, w, options)
    term2 = coeff2 * w ** s * _hyp_series(c - a, c - b, s + 1.0, w, options)
    return term1 + term2


def jacobi_poly_coeffs(n: int, a: float, b: float) -> np.ndarray:
    """Monomial coefficients (ascending powers) of the Jacobi polynomial P_n^(a,b).

    Standard three-term recurrence expanded in the monomial basis; valid for
    a, b > -1.  P_0 = 1 and P_1^(1,1)(x) = 2x, so e.g. ``jacobi_poly_coeffs(1, 1, 1)``
    returns ``[0, 2]``.
    """
    if n < 0 or int(n) != n:
        raise DomainError(f"polynomial degree must be a nonnegative integer, got {n}")
    _require_finite("a", a)
    _require_finite("b", b)
    if a <= -1.0 or b <= -1.0:
        raise DomainError(f"jacobi parameters must exceed -1, got a={a}, b={b}")
    n = int(n)
    p_prev = np.array([1.0])
    if n == 0:
        return p_prev
    p_curr = np.array([(a - b) / 2.0, (a + b + 2.0) / 2.0])
    if n == 1:
        return p_curr
    for m in range(2, n + 1):
        c0 = 2.0 * m * (m + a + b) * (2.0 * m + a + b - 2.0)
        c1 = (2.0 * m + a + b - 1.0) * (a * a - b * b)
        c2 = (2.0 * m + a + b - 1.0) * (2.0 * m + a + b) * (2.0 * m + a + b - 2.0)
        c3 = 2.0 * (m + a - 1.0) * (m + b - 1.0) * (2.0 * m + a + b)
        nxt = np.zeros(m + 1)
        nxt[: m] += c1 * p_curr
        nxt[1:] += c2 * p_curr
        nxt[: m - 1] -= c3 * p_prev
        p_prev, p_curr = p_curr, nxt / c0
    return p_curr
