"""Command-line interface: one subcommand per pipeline stage plus sweeps and
table reproduction.

Outputs are CSV files ('.' decimal separator, header row, LF line endings)
written to --out together with a manifest.json recording the config hash,
package version, seed, timestamps, per-stage tolerances achieved, and a
sha256 for every emitted file.  Identical config and seed give byte-identical
CSV outputs.

Exit codes: 0 success, 2 configuration errors (reported with field paths),
3 accuracy/resource errors.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from . import income_pdf, model, montecarlo, moments, ruin
from ._kernels import BACKEND
from .errors import AccuracyError, ConfigError, DomainError, MicroruinError, ResourceLimitError

try:
    from importlib.metadata import version as _pkg_version
    _VERSION = _pkg_version("microruin")
except Exception:  # pragma: no cover - metadata unavailable in odd installs
    _VERSION = "unknown"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


@dataclass
class RunManifest:
    """Provenance record tying every output file to its producing run."""

    config_hash: str
    seed: int
    command: str
    package_version: str = _VERSION
    kernel_backend: str = BACKEND
    started_utc: str = ""
    finished_utc: str = ""
    tolerances_achieved: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    def write(self, out_dir: str):
        self.finished_utc = _now()
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_csv(out_dir: str, name: str, header, rows, manifest: RunManifest) -> str:
    """Atomic CSV write; registers the file hash in the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    text = ",".join(header) + "\n"
    for row in rows:
        text += ",".join(_fmt(x) for x in row) + "\n"
    data = text.encode()
    fd, tmp = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    path = os.path.join(out_dir, name)
    os.replace(tmp, path)
    manifest.outputs[name] = hashlib.sha256(data).hexdigest()
    return path


def _apply_overrides(data: dict, overrides) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError([(item, "override must look like path.to.field=value")])
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return data


def _load(args) -> model.ScenarioConfig:
    cfg = model.load_config(args.config)
    if getattr(args, "set", None):
        data = _apply_overrides(cfg.to_dict(), args.set)
        cfg = model.ScenarioConfig.from_dict(data)
    return model.validate(cfg)


def _u_list(cfg: model.ScenarioConfig, arg: str | None) -> np.ndarray:
    if arg:
        return np.array([float(x) for x in arg.split(",")])
    return np.array([cfg.financial.initial_capital])


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def _cmd_validate(args, manifest):
    _load(args)
    print("config ok")


def _cmd_moments(args, manifest):
    cfg = _load(args)
    mv = moments.revenue_moments(cfg, interval_index=args.interval)
    rows = [(args.interval, s, mv.raw[s - 1]) for s in range(1, mv.order + 1)]
    _write_csv(args.out, "moments.csv", ["interval", "order", "value"], rows, manifest)
    manifest.tolerances_achieved["quad_rel_tol"] = cfg.numerics.quad_rel_tol
    print(f"E[V] = {mv.raw[0]:.6g} (order-{mv.order} moments written)")


def _cmd_income_pdf(args, manifest):
    cfg = _load(args)
    mv = moments.revenue_moments(cfg, interval_index=args.interval)
    v_lo, v_hi = cfg.income_support(cfg.durations.for_interval(args.interval))
    raw = income_pdf.expand_density(mv, v_lo, v_hi, order=args.order or cfg.numerics.moment_order)
    dens = income_pdf.sanitize(raw, cfg.numerics.sanitize_warn, cfg.numerics.sanitize_reject)
    grid = np.linspace(v_lo, v_hi, args.points)
    rows = zip(grid, dens.pdf(grid), dens.cdf(grid))
    _write_csv(args.out, "income_pdf.csv", ["v", "pdf", "cdf"], rows, manifest)
    manifest.tolerances_achieved["sanitized_mass"] = dens.sanitized_mass
    print(f"income density on [{v_lo:.6g}, {v_hi:.6g}], sanitized mass "
          f"{dens.sanitized_mass:.4g}")


def _cmd_compound(args, manifest):
    cfg = _load(args)
    pmfs, info = ruin.interval_net_pmfs(cfg)
    rows = []
    for i, pmf in enumerate(pmfs, start=1):
        if args.interval and i != args.interval:
            continue
        for idx, val, mass in zip(pmf.indices(), pmf.values(), pmf.mass):
            rows.append((i, idx, val, mass))
    _write_csv(args.out, "compound.csv", ["interval", "index", "value", "mass"],
               rows, manifest)
    manifest.tolerances_achieved["lattice_step"] = info["lattice_step"]
    print(f"compound PMFs written (lattice step {info['lattice_step']:.6g})")


def _cmd_ruin(args, manifest):
    cfg = _load(args)
    us = _u_list(cfg, args.u)
    result, info = ruin.run_pipeline(cfg, us)
    header = ["l", "u", "psi_numerical"]
    mc = None
    if not args.no_mc:
        plan = montecarlo.plan_from_config(cfg)
        mc = montecarlo.simulate_surplus_paths(cfg, plan, us)
        header += ["psi_mc", "ci_lo", "ci_hi"]
    rows = []
    horizon = cfg.financial.horizon_intervals
    for l in range(1, horizon + 1):
        for j, u in enumerate(us):
            row = [l, u, result.psi[l - 1, j]]
            if mc is not None:
                row += [mc.psi[l - 1, j], mc.ci_lo[l - 1, j], mc.ci_hi[l - 1, j]]
            rows.append(row)
    _write_csv(args.out, "ruin.csv", header, rows, manifest)
    manifest.tolerances_achieved.update({
        "interp_error_bound": result.diagnostics["interp_error_bound"],
        "sanitized_mass": max(v["sanitized_mass"] for v in info["intervals"].values()),
    })
    final = ", ".join(f"psi_{horizon}({u:g})={result.psi[horizon - 1, j]:.4f}"
                      for j, u in enumerate(us))
    print(final)


def _cmd_expected_surplus(args, manifest):
    _load(args)  # config validated for parity even though the bound is closed-form
    start, stop, step = (float(x) for x in args.ev_grid.split(":"))
    evs = np.arange(start, stop + 1e-12, step)
    horizons = [int(x) for x in args.horizons.split(",")]
    rows = []
    for n in horizons:
        for ev in evs:
            rows.append((n, ev, ruin.initial_capital_bound(args.r, n, args.e_n, ev,
                                                           args.e_c)))
    _write_csv(args.out, "expected_surplus.csv", ["n", "e_v", "u_bound"], rows, manifest)
    print(f"{len(rows)} bound rows written")


def _cmd_simulate(args, manifest):
    cfg = _load(args)
    plan = montecarlo.plan_from_config(cfg)
    if args.what == "moments":
        mv, se = montecarlo.estimate_moments(cfg, plan, interval_index=args.interval)
        rows = [(args.interval, s, mv.raw[s - 1], se[s - 1])
                for s in range(1, mv.order + 1)]
        _write_csv(args.out, "mc_moments.csv", ["interval", "order", "value", "se"],
                   rows, manifest)
        print(f"MC E[V] = {mv.raw[0]:.6g} +- {se[0]:.2g}")
    elif args.what == "revenue-cdf":
        v = montecarlo.sample_revenues(cfg, plan, plan.n_users,
                                       interval_index=args.interval)
        v_lo, v_hi = cfg.income_support(cfg.durations.for_interval(args.interval))
        grid = np.linspace(v_lo, v_hi, args.points)
        ecdf = np.searchsorted(np.sort(v), grid, side="right") / len(v)
        _write_csv(args.out, "mc_revenue_cdf.csv", ["v", "ecdf"],
                   zip(grid, ecdf), manifest)
        print(f"empirical CDF from {len(v)} samples written")
    else:  # paths
        us = _u_list(cfg, args.u)
        est = montecarlo.simulate_surplus_paths(cfg, plan, us)
        rows = []
        for l in range(1, cfg.financial.horizon_intervals + 1):
            for j, u in enumerate(us):
                rows.append((l, u, est.psi[l - 1, j], est.ci_lo[l - 1, j],
                             est.ci_hi[l - 1, j]))
        _write_csv(args.out, "mc_ruin.csv", ["l", "u", "psi", "ci_lo", "ci_hi"],
                   rows, manifest)
        print(f"{est.n_paths} surplus paths simulated")


def _cmd_sweep(args, manifest):
    cfg = _load(args)
    dotted, rng = args.param.split("=", 1)
    start, stop, step = (float(x) for x in rng.split(":"))
    values = np.arange(start, stop + 1e-12, step)

    def run_point(value):
        data = _apply_overrides(cfg.to_dict(), [f"{dotted}={float(value)}"])
        point_cfg = model.validate(model.ScenarioConfig.from_dict(data))
        mv = moments.revenue_moments(point_cfg, interval_index=1)
        sub = os.path.join(args.out, f"sweep_{dotted.replace('.', '_')}_{value:g}")
        sub_manifest = RunManifest(config_hash=point_cfg.config_hash(),
                                   seed=point_cfg.numerics.seed,
                                   command="sweep-point", started_utc=_now())
        rows = [(1, s, mv.raw[s - 1]) for s in range(1, mv.order + 1)]
        _write_csv(sub, "moments.csv", ["interval", "order", "value"], rows, sub_manifest)
        sub_manifest.write(sub)
        return value, mv.raw

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(run_point, values))
    header = ["value"] + [f"moment_{s}" for s in range(1, cfg.numerics.moment_order + 1)]
    rows = [[v, *raw] for v, raw in results]
    _write_csv(args.out, "sweep.csv", header, rows, manifest)
    print(f"{len(values)} sweep points done ({dotted})")


def _table_config(base: model.ScenarioConfig, **over) -> model.ScenarioConfig:
    data = base.to_dict()
    for dotted, value in over.items():
        node = data
        parts = dotted.split("__")
        for p in parts[:-1]:
            node = node[p]
        node[parts[-1]] = value
    return model.validate(model.ScenarioConfig.from_dict(data))


def _cmd_reproduce_tables(args, manifest):
    cfg = _load(args)
    which = set(args.which.split(",")) if args.which != "all" else {
        "tableII", "tableIII", "fig2", "fig3", "fig4"}
    n_mc = min(100_000, cfg.numerics.mc_samples) if args.fast else cfg.numerics.mc_samples
    n_paths = min(5_000, cfg.numerics.mc_paths) if args.fast else cfg.numerics.mc_paths
    plan = montecarlo.plan_from_config(cfg)

    if "tableII" in which:
        rows = []
        for beta in (0.01, 0.1, 1.0):
            row = [beta]
            for alpha in (3.0, 4.0):
                c2 = _table_config(cfg, network__beta_cells_per_area=beta,
                                   network__alpha_pathloss=alpha,
                                   financial__c_min=0.1, financial__c_max=100.0)
                ev = moments.revenue_moments(c2).raw[0]
                p2 = dc_replace(plan, n_users=n_mc)
                mc = float(np.mean(montecarlo.sample_revenues(c2, p2, n_mc)))
                row += [ev, mc]
            rows.append(row)
        _write_csv(args.out, "tableII.csv",
                   ["beta", "ev_num_alpha3", "ev_mc_alpha3", "ev_num_alpha4",
                    "ev_mc_alpha4"], rows, manifest)

    if "fig2" in which:
        rows = []
        for n in (1, 2, 3, 4, 5):
            for ev in np.arange(0.0, 0.2001, 0.005):
                rows.append((n, ev, ruin.initial_capital_bound(0.05, n, 100.0, ev, 0.1)))
        _write_csv(args.out, "fig2.csv", ["n", "e_v", "u_bound"], rows, manifest)

    if "fig3" in which:
        rows = []
        for a_d in (10.0, 100.0):
            for alpha in np.arange(2.5, 5.001, 0.25):
                c3 = _table_config(cfg, network__alpha_pathloss=float(alpha),
                                   financial__c_min=0.1, financial__c_max=100.0,
                                   products__rate_gaps=[a_d])
                rows.append((a_d, alpha, moments.revenue_moments(c3).raw[0]))
        _write_csv(args.out, "fig3.csv", ["a_d", "alpha", "ev_num"], rows, manifest)

    if "fig4" in which or "tableIII" in which:
        c4 = _table_config(cfg, network__alpha_pathloss=4.0,
                           network__beta_cells_per_area=0.1,
                           financial__c_min=0.001, financial__c_max=1000.0,
                           financial__interest_rate_per_interval=0.05)
        if "fig4" in which:
            mv = moments.revenue_moments(c4)
            v_lo, v_hi = c4.income_support()
            raw = income_pdf.expand_density(mv, v_lo, v_hi)
            p4 = dc_replace(plan, n_users=n_mc)
            v = montecarlo.sample_revenues(c4, p4, n_mc)
            grid = np.linspace(v_lo, min(v_hi, 1000.0), 501)
            ecdf = np.searchsorted(np.sort(v), grid, side="right") / len(v)
            sanitized = income_pdf.sanitize(raw, reject_mass=1.0)
            _write_csv(args.out, "fig4.csv",
                       ["v", "cdf_expansion_raw", "cdf_expansion_sanitized", "cdf_mc"],
                       zip(grid, raw.cdf(grid), sanitized.cdf(grid), ecdf), manifest)
            manifest.tolerances_achieved["fig4_sanitized_mass"] = sanitized.sanitized_mass
        if "tableIII" in which:
            us = np.array([100.0, 150.0, 200.0, 250.0, 300.0])
            result, _ = ruin.run_pipeline(c4, us)
            p3 = dc_replace(plan, n_paths=n_paths)
            est = montecarlo.simulate_surplus_paths(c4, p3, us)
            lastrow = c4.financial.horizon_intervals - 1
            rows = [(u, result.psi[lastrow, j], est.psi[lastrow, j],
                     est.ci_lo[lastrow, j], est.ci_hi[lastrow, j])
                    for j, u in enumerate(us)]
            _write_csv(args.out, "tableIII.csv",
                       ["u", "psi5_numerical", "psi5_mc", "ci_lo", "ci_hi"],
                       rows, manifest)
    print("requested tables written to", args.out)


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microruin",
        description="Small-cell sharing viability: analytic ruin pipeline and "
                    "Monte Carlo cross-validation",
    )
    parser.add_argument("--config", help="scenario config JSON (default: "
                        "$MICRORUIN_CONFIG or built-in reference defaults)")
    parser.add_argument("--set", action="append", metavar="PATH=VALUE",
                        help="dotted config override, e.g. network.alpha_pathloss=3.5")
    parser.add_argument("--out", default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="check the config and exit")

    p = sub.add_parser("moments", help="analytic revenue moments")
    p.add_argument("--interval", type=int, default=1)

    p = sub.add_parser("income-pdf", help="moment-based income density as CSV")
    p.add_argument("--interval", type=int, default=1)
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--points", type=int, default=1001)

    p = sub.add_parser("compound", help="per-interval net-profit PMFs as CSV")
    p.add_argument("--interval", type=int, default=None)

    p = sub.add_parser("ruin", help="full numerical pipeline (optionally with MC)")
    p.add_argument("--u", help="comma-separated initial capitals")
    p.add_argument("--no-mc", action="store_true", help="skip the Monte Carlo columns")

    p = sub.add_parser("expected-surplus", help="initial-capital bound curves")
    p.add_argument("--ev-grid", default="0:0.2:0.005")
    p.add_argument("--horizons", default="1,2,3,4,5")
    p.add_argument("--r", type=float, default=0.05)
    p.add_argument("--e-n", type=float, default=100.0)
    p.add_argument("--e-c", type=float, default=0.1)

    p = sub.add_parser("simulate", help="Monte Carlo outputs mirroring the "
                       "analytic subcommands")
    p.add_argument("--what", choices=["moments", "revenue-cdf", "paths"],
                   default="moments")
    p.add_argument("--interval", type=int, default=1)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--u", help="comma-separated initial capitals (paths mode)")

    p = sub.add_parser("sweep", help="parameter sweep of a pipeline stage")
    p.add_argument("--param", required=True, metavar="PATH=START:STOP:STEP")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("stage", nargs="?", default="moments", choices=["moments"],
                   help="stage to evaluate per point (moments)")

    p = sub.add_parser("reproduce-tables", help="emit reference-table data files")
    p.add_argument("--which", default="all",
                   help="comma list from tableII,tableIII,fig2,fig3,fig4")
    p.add_argument("--fast", action="store_true",
                   help="reduced sampling budgets for smoke runs")
    return parser


_HANDLERS = {
    "validate": _cmd_validate,
    "moments": _cmd_moments,
    "income-pdf": _cmd_income_pdf,
    "compound": _cmd_compound,
    "ruin": _cmd_ruin,
    "expected-surplus": _cmd_expected_surplus,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "reproduce-tables": _cmd_reproduce_tables,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    manifest = RunManifest(config_hash="", seed=0, command=args.command,
                           started_utc=_now())
    try:
        cfg = model.load_config(args.config)
        manifest.config_hash = cfg.config_hash()
        manifest.seed = cfg.numerics.seed
        _HANDLERS[args.command](args, manifest)
    except ConfigError as exc:
        for path, msg in exc.errors:
            print(f"config error at {path}: {msg}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 2
    except (AccuracyError, ResourceLimitError) as exc:
        print(f"accuracy/resource error: {exc}", file=sys.stderr)
        if isinstance(exc, AccuracyError) and exc.diagnostics:
            print(f"diagnostics: {exc.diagnostics}", file=sys.stderr)
        return 3
    except MicroruinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if args.command != "validate":
        os.makedirs(args.out, exist_ok=True)
        manifest.write(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
