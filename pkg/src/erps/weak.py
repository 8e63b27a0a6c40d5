"""Weak momentum values ``<q|p|psi> / <q|psi>`` and their ERPS reading."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NodeEvaluation
from .phase_space import conditional_moments, polar_gradients
from .state import REL_NODE_THRESHOLD, Grid, GridState, polar_decompose
from .stencils import DEFAULT_ORDER, log_derivative
from .xi import XiDistribution

# weak values are masked this many times above the node threshold
NODE_MARGIN = 10.0


@dataclass(frozen=True, eq=False)
class WeakValueField:
    """Complex weak momentum value per axis, shape ``(dims, *grid.shape)``; NaN where masked."""

    grid: Grid
    hbar: float
    pw: np.ndarray
    node_mask: np.ndarray

    @property
    def re(self):
        return self.pw.real

    @property
    def im(self):
        return self.pw.imag


def weak_momentum_value(state: GridState, node_threshold=None, order=DEFAULT_ORDER):
    """``-i hbar (D psi) / psi`` computed directly from ``psi``.

    Points with ``rho < 10 * node_threshold`` are masked rather than
    regularized.
    """
    rho = state.density
    if node_threshold is None:
        node_threshold = REL_NODE_THRESHOLD * rho.max()
    mask = rho < NODE_MARGIN * node_threshold
    with np.errstate(invalid="ignore", over="ignore"):
        pw = -1j * state.hbar * log_derivative(state.psi, state.grid.spacing, order)
    pw[:, mask] = np.nan
    return WeakValueField(state.grid, state.hbar, pw, mask)


def field_from_weak(wv: WeakValueField, xi):
    """Restricted momentum field ``Re pw - (xi / hbar) Im pw`` on the whole grid."""
    return wv.re - (xi / wv.hbar) * wv.im


def field_from_weak_at(wv: WeakValueField, q_index, xi):
    idx = (q_index,) if np.ndim(q_index) == 0 else tuple(q_index)
    if wv.node_mask[idx]:
        raise NodeEvaluation(f"weak value is masked at grid point {idx}")
    return field_from_weak(wv, xi)[(slice(None),) + idx]


@dataclass(frozen=True)
class MomentIdentityReport:
    max_mean_deviation: float
    max_var_deviation: float
    n_masked: int
    n_points: int

    def passed(self, tol):
        return self.max_mean_deviation < tol and self.max_var_deviation < tol


def moment_identities_check(state: GridState, chi: XiDistribution, node_threshold=None, order=DEFAULT_ORDER):
    """Compare ``Re pw`` with the conditional mean and ``(Im pw)^2`` with the conditional variance."""
    wv = weak_momentum_value(state, node_threshold, order)
    mf = conditional_moments(state, chi, node_threshold, order)
    mask = wv.node_mask | mf.node_mask
    good = ~mask
    dev_mean = np.abs(wv.re[:, good] - mf.mean_p[:, good])
    dev_var = np.abs(wv.im[:, good] ** 2 - mf.var_p[:, good])
    return MomentIdentityReport(
        max_mean_deviation=float(dev_mean.max(initial=0.0)),
        max_var_deviation=float(dev_var.max(initial=0.0)),
        n_masked=int(mask.sum()),
        n_points=int(mask.size),
    )


def estimate_decomposition(state: GridState, xi, node_threshold=None, order=DEFAULT_ORDER):
    """Split the restricted momentum into best estimate ``dS/dq`` and error ``(xi/2) drho/rho``."""
    polar = polar_decompose(state, node_threshold)
    dS, dlnrho = polar_gradients(polar, order)
    return dS, 0.5 * xi * dlnrho
