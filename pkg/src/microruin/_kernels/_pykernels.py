"""Pure-numpy implementations of the hot kernels (fallback backend)."""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def interference_powsum(x_sq, exponent, marks, offsets, out=None):
    """Segment sums of marks * x_sq**exponent.

    x_sq: flat array of squared interferer distances; exponent: -alpha/2;
    offsets: int64 array of length n_segments + 1 delimiting each segment.
    Empty segments yield 0.
    """
    offsets = np.asarray(offsets, dtype=np.int64)
    n_seg = len(offsets) - 1
    if out is None:
        out = np.empty(n_seg)
    contrib = marks * np.power(x_sq, exponent)
    csum = np.concatenate(([0.0], np.cumsum(contrib)))
    np.subtract(csum[offsets[1:]], csum[offsets[:-1]], out=out)
    return out


def ruin_step(phi_prev, grid_lo, grid_step, growth, atom_pos, atom_mass, u_grid, out=None):
    """One exact survival-recursion step on a uniform capital grid.

    out[j] = sum_k atom_mass[k] * 1{x >= 0} * phi_prev(x),
    x = u_grid[j] * growth + atom_pos[k], with phi_prev linearly interpolated
    on the uniform grid (clamped to 0 left / 1 right).  Capital exactly at 0
    survives; the indicator tolerance absorbs float rounding at the boundary.
    """
    if out is None:
        out = np.zeros_like(u_grid)
    else:
        out[:] = 0.0
    n = len(phi_prev)
    base = u_grid * growth
    tol = 1e-9 * grid_step
    inv_step = 1.0 / grid_step
    for y, m in zip(atom_pos, atom_mass):
        x = base + y
        alive = x >= -tol
        pos = (x - grid_lo) * inv_step
        idx = np.floor(pos).astype(np.int64)
        frac = pos - idx
        lo_clip = idx < 0
        hi_clip = idx >= n - 1
        idx_c = np.clip(idx, 0, n - 2)
        val = phi_prev[idx_c] * (1.0 - frac) + phi_prev[idx_c + 1] * frac
        val[lo_clip] = 0.0
        val[hi_clip] = 1.0
        out += m * np.where(alive, val, 0.0)
    return out
