# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels."""

from libc.math cimport floor, pow

import numpy as np

BACKEND = "compiled"


def interference_powsum(double[::1] x_sq, double exponent, double[::1] marks,
                        long long[::1] offsets, out=None):
    """Segment sums of marks * x_sq**exponent (see the numpy twin for semantics)."""
    cdef Py_ssize_t n_seg = offsets.shape[0] - 1
    if out is None:
        out = np.empty(n_seg)
    cdef double[::1] res = out
    cdef Py_ssize_t j, m
    cdef double acc
    for j in range(n_seg):
        acc = 0.0
        for m in range(offsets[j], offsets[j + 1]):
            acc += marks[m] * pow(x_sq[m], exponent)
        res[j] = acc
    return out


def ruin_step(double[::1] phi_prev, double grid_lo, double grid_step, double growth,
              double[::1] atom_pos, double[::1] atom_mass, double[::1] u_grid, out=None):
    """One exact survival-recursion step on a uniform capital grid."""
    cdef Py_ssize_t n = phi_prev.shape[0]
    cdef Py_ssize_t n_u = u_grid.shape[0]
    cdef Py_ssize_t n_atoms = atom_pos.shape[0]
    if out is None:
        out = np.zeros(n_u)
    else:
        out[:] = 0.0
    cdef double[::1] res = out
    cdef double tol = 1e-9 * grid_step
    cdef double inv_step = 1.0 / grid_step
    cdef Py_ssize_t j, k, idx
    cdef double x, pos, frac, val, base
    for j in range(n_u):
        base = u_grid[j] * growth
        val = 0.0
        for k in range(n_atoms):
            x = base + atom_pos[k]
            if x < -tol:
                continue
            pos = (x - grid_lo) * inv_step
            if pos < 0.0:
                continue                      # below grid: certain ruin, phi = 0
            if pos >= n - 1:
                val += atom_mass[k]           # above grid: certain survival, phi = 1
                continue
            idx = <Py_ssize_t> floor(pos)
            frac = pos - idx
            val += atom_mass[k] * (phi_prev[idx] * (1.0 - frac) + phi_prev[idx + 1] * frac)
        res[j] = val
    return out
