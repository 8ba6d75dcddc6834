# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot kernels.

Same contracts and same per-element IEEE-754 operation order as
``_pykernels``; compiled with -ffp-contract=off so the two agree bit
for bit.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil

cnp.import_array()

IMPLEMENTATION = "cython"


def ou_advance(double[::1] states, double[:, ::1] dw,
               double alpha, double mu, double scale, double h):
    """Advance each member of ``states`` through the columns of ``dw``."""
    cdef Py_ssize_t n = states.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    cdef Py_ssize_t i, j
    cdef double x
    for i in range(n):
        x = states[i]
        for j in range(n_steps):
            x = (x + alpha * (mu - x) * h) + scale * dw[i, j]
        states[i] = x


def ou_coupled_advance(double[::1] fine, double[::1] coarse, double[:, ::1] dw,
                       double alpha, double mu, double scale, double h_fine,
                       Py_ssize_t m):
    """Advance a coupled batch: fine members at ``h_fine``, coarse at ``m*h_fine``."""
    cdef Py_ssize_t n = fine.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    cdef double h_coarse = h_fine * m
    cdef Py_ssize_t i, j, r
    cdef double xf, xc, cdw
    for i in range(n):
        xf = fine[i]
        xc = coarse[i]
        for j in range(0, n_steps, m):
            cdw = dw[i, j]
            xf = (xf + alpha * (mu - xf) * h_fine) + scale * dw[i, j]
            for r in range(1, m):
                cdw = cdw + dw[i, j + r]
                xf = (xf + alpha * (mu - xf) * h_fine) + scale * dw[i, j + r]
            xc = (xc + alpha * (mu - xc) * h_coarse) + scale * cdw
        fine[i] = xf
        coarse[i] = xc


def ou_trajectory(double x0, double[::1] dw,
                  double alpha, double mu, double scale, double h):
    """Full path of one member; returns n_steps + 1 states starting at x0."""
    cdef Py_ssize_t n_steps = dw.shape[0]
    out_arr = np.empty(n_steps + 1)
    cdef double[::1] out = out_arr
    cdef double x = x0
    cdef Py_ssize_t j
    out[0] = x
    for j in range(n_steps):
        x = (x + alpha * (mu - x) * h) + scale * dw[j]
        out[j + 1] = x
    return out_arr


def ou_coupled_trajectory(double x0, double[::1] dw,
                          double alpha, double mu, double scale,
                          double h_fine, Py_ssize_t m):
    """Coupled fine/coarse paths of one member from shared fine increments."""
    cdef Py_ssize_t n_steps = dw.shape[0]
    fine_arr = np.empty(n_steps + 1)
    coarse_arr = np.empty(n_steps // m + 1)
    cdef double[::1] fine = fine_arr
    cdef double[::1] coarse = coarse_arr
    cdef double h_coarse = h_fine * m
    cdef double xf = x0, xc = x0, cdw
    cdef Py_ssize_t j, r
    fine[0] = xf
    coarse[0] = xc
    for j in range(0, n_steps, m):
        cdw = dw[j]
        xf = (xf + alpha * (mu - xf) * h_fine) + scale * dw[j]
        fine[j + 1] = xf
        for r in range(1, m):
            cdw = cdw + dw[j + r]
            xf = (xf + alpha * (mu - xf) * h_fine) + scale * dw[j + r]
            fine[j + r + 1] = xf
        xc = (xc + alpha * (mu - xc) * h_coarse) + scale * cdw
        coarse[j // m + 1] = xc
    return fine_arr, coarse_arr


cdef inline Py_ssize_t _order_stat_index(Py_ssize_t n, double u):
    cdef Py_ssize_t idx = <Py_ssize_t>ceil(n * u)
    if idx < 1:
        idx = 1
    elif idx > n:
        idx = n
    return idx


cdef void _base_lookup(double[::1] out, double[::1] values, double[::1] u):
    cdef Py_ssize_t n = values.shape[0]
    cdef Py_ssize_t i
    for i in range(out.shape[0]):
        out[i] = values[_order_stat_index(n, u[i]) - 1]


cdef void _add_pair_diff(double[::1] out, double[::1] fine, double[::1] coarse,
                         double[::1] u):
    cdef Py_ssize_t n = fine.shape[0]
    cdef Py_ssize_t i, idx
    for i in range(out.shape[0]):
        idx = _order_stat_index(n, u[i]) - 1
        out[i] = out[i] + (fine[idx] - coarse[idx])


def forecast_values(level0_sorted, pairs_fine, pairs_coarse, u):
    """Combined inverse-CDF draws across the sorted level hierarchy."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty(u.shape[0])
    _base_lookup(out, np.ascontiguousarray(level0_sorted, dtype=np.float64), u)
    for fine, coarse in zip(pairs_fine, pairs_coarse):
        _add_pair_diff(out,
                       np.ascontiguousarray(fine, dtype=np.float64),
                       np.ascontiguousarray(coarse, dtype=np.float64),
                       u)
    return out
