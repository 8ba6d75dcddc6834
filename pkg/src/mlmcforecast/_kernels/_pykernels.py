"""Pure numpy implementation of the hot kernels.

Import-compatible with ``_cykernels``.  Both implementations perform the
identical sequence of IEEE-754 double operations per element, so their
outputs agree bit for bit; tests assert this.  The update rule is

    x <- (x + alpha*(mu - x)*h) + scale*dw

with coarse Brownian increments accumulated left to right over each
group of ``m`` fine increments.
"""

import numpy as np

IMPLEMENTATION = "python"


def ou_advance(states, dw, alpha, mu, scale, h):
    """Advance each member of ``states`` through the columns of ``dw``.

    Args:
        states: float64 array (n_members,), modified in place.
        dw: float64 array (n_members, n_steps) of Brownian increments.
        alpha, mu, scale: drift rate, long-run mean, noise coefficient.
        h: time step matching the increments.
    """
    n_steps = dw.shape[1]
    for j in range(n_steps):
        states[:] = (states + alpha * (mu - states) * h) + scale * dw[:, j]


def ou_coupled_advance(fine, coarse, dw, alpha, mu, scale, h_fine, m):
    """Advance a coupled batch: fine members at ``h_fine``, coarse at ``m*h_fine``.

    ``dw`` holds fine increments, (n_members, n_steps) with n_steps a
    multiple of ``m``.  Each coarse increment is the ordered sum of the
    ``m`` fine increments it spans.
    """
    n_steps = dw.shape[1]
    h_coarse = h_fine * m
    for j in range(0, n_steps, m):
        cdw = dw[:, j].copy()
        fine[:] = (fine + alpha * (mu - fine) * h_fine) + scale * dw[:, j]
        for r in range(1, m):
            cdw += dw[:, j + r]
            fine[:] = (fine + alpha * (mu - fine) * h_fine) + scale * dw[:, j + r]
        coarse[:] = (coarse + alpha * (mu - coarse) * h_coarse) + scale * cdw


def ou_trajectory(x0, dw, alpha, mu, scale, h):
    """Full path of one member; returns n_steps + 1 states starting at x0."""
    n_steps = dw.shape[0]
    out = np.empty(n_steps + 1)
    x = float(x0)
    out[0] = x
    for j in range(n_steps):
        x = (x + alpha * (mu - x) * h) + scale * dw[j]
        out[j + 1] = x
    return out


def ou_coupled_trajectory(x0, dw, alpha, mu, scale, h_fine, m):
    """Coupled fine/coarse paths of one member from shared fine increments.

    Returns (fine_states, coarse_states) including the initial state.
    """
    n_steps = dw.shape[0]
    fine = np.empty(n_steps + 1)
    coarse = np.empty(n_steps // m + 1)
    h_coarse = h_fine * m
    xf = float(x0)
    xc = float(x0)
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
    return fine, coarse


def _order_stat_indices(n, u):
    # ceil(n*u), 1-based, with u = 0 clamped up to the first order statistic
    idx = np.ceil(n * u).astype(np.int64)
    return np.clip(idx, 1, n)


def forecast_values(level0_sorted, pairs_fine, pairs_coarse, u):
    """Combined inverse-CDF draws across the sorted level hierarchy.

    Args:
        level0_sorted: ascending float64 array, the base ensemble.
        pairs_fine / pairs_coarse: lists of ascending float64 arrays, one
            (fine, coarse) pair per correction level; fine and coarse of a
            pair have equal length.
        u: float64 array of probabilities in [0, 1].

    Returns:
        float64 array of len(u) combined quantile evaluations.
    """
    idx = _order_stat_indices(len(level0_sorted), u)
    out = level0_sorted[idx - 1].astype(np.float64, copy=True)
    for fine, coarse in zip(pairs_fine, pairs_coarse):
        idx = _order_stat_indices(len(fine), u)
        out = out + (fine[idx - 1] - coarse[idx - 1])
    return out
