#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_kernels.py [--quick]

Times the two hot paths (interference power reductions and the ruin-recursion
grid step) on production-shaped inputs and reports the speedup, plus an
end-to-end Monte Carlo revenue batch under each backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from microruin._kernels import _pykernels

try:
    from microruin._kernels import _ckernels
except ImportError:
    _ckernels = None


def _time(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_powsum(n_segments, mean_points, rng):
    counts = rng.poisson(mean_points, size=n_segments)
    offsets = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    total = int(offsets[-1])
    x_sq = rng.uniform(1.0, 1e4, size=total)
    marks = rng.exponential(1.0, size=total)
    args = (x_sq, -2.0, marks, offsets)
    t_py, out_py = _time(_pykernels.interference_powsum, *args)
    row = ["interference_powsum", f"{total:.2e} pts", f"{t_py * 1e3:8.1f} ms"]
    if _ckernels is not None:
        t_cy, out_cy = _time(_ckernels.interference_powsum, *args)
        err = np.max(np.abs(out_py - out_cy) / np.maximum(np.abs(out_py), 1e-300))
        row += [f"{t_cy * 1e3:8.1f} ms", f"{t_py / t_cy:5.2f}x", f"rel diff {err:.1e}"]
    print("  ".join(row))


def bench_ruin_step(n_grid, n_atoms, rng):
    grid = np.linspace(-5e3, 8e3, n_grid)
    phi = np.clip(np.linspace(-0.2, 1.2, n_grid), 0.0, 1.0)
    atom_pos = np.sort(rng.uniform(-2e3, 2e3, size=n_atoms))
    atom_mass = rng.dirichlet(np.ones(n_atoms))
    args = (phi, grid[0], grid[1] - grid[0], 1.05, atom_pos, atom_mass, grid)
    t_py, out_py = _time(_pykernels.ruin_step, *args)
    row = ["ruin_step", f"{n_grid}x{n_atoms}", f"{t_py * 1e3:8.1f} ms"]
    if _ckernels is not None:
        t_cy, out_cy = _time(_ckernels.ruin_step, *args)
        err = np.max(np.abs(out_py - out_cy))
        row += [f"{t_cy * 1e3:8.1f} ms", f"{t_py / t_cy:5.2f}x", f"abs diff {err:.1e}"]
    print("  ".join(row))


def bench_end_to_end(n_users):
    import os
    import subprocess
    import sys
    code = (
        "import time, numpy as np\n"
        "from microruin import model, montecarlo\n"
        "from microruin._kernels import BACKEND\n"
        "cfg = model.validate(model.default_config())\n"
        "plan = montecarlo.plan_from_config(cfg)\n"
        f"n = {n_users}\n"
        "t0 = time.perf_counter()\n"
        "v = montecarlo.sample_revenues(cfg, plan, n)\n"
        "print(f'{BACKEND}: {time.perf_counter()-t0:.2f} s for', n, 'revenue samples,"
        " mean', round(float(v.mean()), 3))\n"
    )
    for backend in ("cy", "py"):
        env = dict(os.environ, MICRORUIN_KERNELS=backend)
        proc = subprocess.run([sys.executable, "-c", code], env=env,
                              capture_output=True, text=True)
        out = proc.stdout.strip() or proc.stderr.strip().splitlines()[-1]
        print(f"  sample_revenues [{backend}] {out}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    if _ckernels is None:
        print("compiled backend unavailable; timing the numpy fallback only")
    scale = 0.2 if args.quick else 1.0
    print("kernel microbenchmarks (best of 3):")
    bench_powsum(int(200_000 * scale), 200, rng)
    bench_ruin_step(int(60_000 * scale), int(20_000 * scale), rng)
    print("end-to-end (subprocess per backend):")
    bench_end_to_end(int(200_000 * scale))


if __name__ == "__main__":
    main()
