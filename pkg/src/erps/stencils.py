"""Finite-difference first-derivative operators on uniform grids.

Every derivative in the package (weak values, momentum fields, momentum
operator matrices) goes through :func:`derivative_matrix`, so the
different routes to the same physical quantity share one stencil and
agree to rounding error.
"""

from functools import lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp

DEFAULT_ORDER = 8


def fd_weights(offsets, derivative=1):
    """Finite-difference weights for ``derivative`` on integer ``offsets`` (unit spacing)."""
    s = np.asarray(offsets, dtype=float)
    n = len(s)
    vander = np.vander(s, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[derivative] = factorial(derivative)
    return np.linalg.solve(vander, rhs)


@lru_cache(maxsize=64)
def _derivative_csr(n, spacing, order):
    if order % 2 or order < 2:
        raise ValueError(f"stencil order must be an even integer >= 2, got {order}")
    if n < order + 1:
        raise ValueError(f"need at least {order + 1} points for an order-{order} stencil")
    half = order // 2
    central = fd_weights(range(-half, half + 1))
    rows, cols, vals = [], [], []
    for i in range(n):
        if i < half:
            offs = np.arange(-i, order + 1 - i)
            w = fd_weights(offs)
        elif i >= n - half:
            offs = np.arange(n - 1 - i - order, n - i)
            w = fd_weights(offs)
        else:
            offs = np.arange(-half, half + 1)
            w = central
        keep = w != 0.0
        rows.extend([i] * int(keep.sum()))
        cols.extend((i + offs[keep]).tolist())
        vals.extend((w[keep] / spacing).tolist())
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    return mat


def derivative_matrix(n, spacing, order=DEFAULT_ORDER):
    """Sparse ``(n, n)`` matrix of the order-``order`` first derivative.

    Central stencils in the interior, one-sided stencils of the same order
    near the two boundaries.
    """
    return _derivative_csr(int(n), float(spacing), int(order))


def differentiate(values, spacing, axis=0, order=DEFAULT_ORDER):
    """Apply :func:`derivative_matrix` along ``axis`` of ``values``."""
    values = np.asarray(values)
    moved = np.moveaxis(values, axis, 0)
    mat = derivative_matrix(moved.shape[0], spacing, order)
    flat = moved.reshape(moved.shape[0], -1)
    out = (mat @ flat).reshape(moved.shape)
    return np.moveaxis(out, 0, axis)


def log_derivative(psi, spacing, order=DEFAULT_ORDER):
    """``(D psi) / psi`` along every axis, stacked on a new leading axis.

    Exact zeros of ``psi`` give non-finite entries; callers mask them.
    """
    psi = np.asarray(psi, dtype=complex)
    spacing = tuple(np.atleast_1d(spacing))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.stack(
            [differentiate(psi, h, axis=ax, order=order) / psi for ax, h in enumerate(spacing)]
        )
