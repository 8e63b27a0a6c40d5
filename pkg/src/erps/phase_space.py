"""Restricted momentum field, ERPS distribution, its sampler and moments.

Given ``psi = sqrt(rho) exp(iS/hbar)`` and an action-valued ``xi`` the
momentum at ``q`` is fixed to ``dS/dq + (xi/2) (drho/dq) / rho``; the
phase-space law is that delta constraint times ``rho(q)`` times ``chi(xi)``.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateJacobianWarning, InvalidGrid, NodeEvaluation
from .state import GridState, MixedState, PolarFields, polar_decompose
from .stencils import DEFAULT_ORDER, differentiate, log_derivative
from .xi import XiDistribution

CHUNK_SHOTS = 1 << 16


def polar_gradients(polar: PolarFields, order=DEFAULT_ORDER):
    """``(dS/dq_n, (drho/dq_n)/rho)`` stacked per axis; NaN on masked points.

    The derivatives come from the same stencil as the weak momentum value,
    applied to the reassembled ``sqrt(rho) exp(iS/hbar)``.
    """
    log_d = log_derivative(polar.reassemble(), polar.grid.spacing, order)
    dS = polar.hbar * log_d.imag
    dlnrho = 2.0 * log_d.real
    dS[:, polar.node_mask] = np.nan
    dlnrho[:, polar.node_mask] = np.nan
    return dS, dlnrho


def momentum_field_grid(polar: PolarFields, xi, order=DEFAULT_ORDER):
    """Restricted momentum on every grid point for one value of ``xi``; shape ``(dims, *grid)``."""
    dS, dlnrho = polar_gradients(polar, order)
    return dS + 0.5 * xi * dlnrho


def momentum_field(polar: PolarFields, q_index, xi, order=DEFAULT_ORDER):
    """Restricted momentum (one entry per axis) at grid index ``q_index``."""
    idx = (q_index,) if np.ndim(q_index) == 0 else tuple(q_index)
    if polar.node_mask[idx]:
        raise NodeEvaluation(f"grid point {idx} is a node (rho below threshold)")
    return momentum_field_grid(polar, xi, order)[(slice(None),) + idx]


@dataclass(frozen=True, eq=False)
class MomentFields:
    """Conditional mean and variance of the restricted momentum, per axis."""

    mean_p: np.ndarray
    var_p: np.ndarray
    node_mask: np.ndarray


class ErpsSample(NamedTuple):
    q: tuple
    p: tuple
    xi: float


@dataclass(frozen=True, eq=False)
class ErpsSamples:
    """Columnar container of phase-space draws; iterate for :class:`ErpsSample` rows.

    ``q`` and ``p`` have shape ``(shots, dims)``. ``xi`` has shape
    ``(shots,)``, or ``(shots, dims)`` for the independent-xi variant.
    """

    q: np.ndarray
    p: np.ndarray
    xi: np.ndarray

    def __len__(self):
        return self.q.shape[0]

    def __iter__(self):
        for q, p, xi in zip(self.q, self.p, self.xi):
            yield ErpsSample(tuple(q.tolist()), tuple(p.tolist()), xi.tolist())


def _fill_masked(values, mask):
    """Replace masked entries by the nearest unmasked value along the flattened order."""
    out = np.array(values, dtype=float)
    flat = out.reshape(-1)
    good = np.flatnonzero(~mask.reshape(-1))
    pos = np.arange(flat.size)
    nearest = good[np.clip(np.searchsorted(good, pos), 0, good.size - 1)]
    left = good[np.clip(np.searchsorted(good, pos) - 1, 0, good.size - 1)]
    pick = np.where(np.abs(pos - left) < np.abs(pos - nearest), left, nearest)
    flat[:] = flat[pick]
    return out


def interpolate(field, grid, points):
    """Multilinear interpolation of a grid field at ``points`` of shape ``(n, dims)``."""
    field = np.asarray(field)
    points = np.atleast_2d(points)
    idx, frac = [], []
    for ax in range(grid.dims):
        h = grid.spacing[ax]
        x = (points[:, ax] - grid.q_min[ax]) / h
        i0 = np.clip(np.floor(x).astype(np.int64), 0, grid.n_points[ax] - 2)
        idx.append(i0)
        frac.append(np.clip(x - i0, 0.0, 1.0))
    if grid.dims == 1:
        (i,), (t,) = idx, frac
        return field[i] * (1 - t) + field[i + 1] * t
    (i, j), (t, u) = idx, frac
    return (
        field[i, j] * (1 - t) * (1 - u)
        + field[i + 1, j] * t * (1 - u)
        + field[i, j + 1] * (1 - t) * u
        + field[i + 1, j + 1] * t * u
    )


def _sample_chunk(seed, chunk, count, cdf, grid, dS, dlnrho, chi, independent_xi):
    rng = np.random.default_rng([seed, chunk])
    cell = np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right")
    cell = np.minimum(cell, cdf.size - 1)
    sub = np.unravel_index(cell, grid.shape)
    q = np.empty((count, grid.dims))
    for ax in range(grid.dims):
        h = grid.spacing[ax]
        jitter = rng.uniform(-0.5 * h, 0.5 * h, count)
        q[:, ax] = np.clip(grid.axes[ax][sub[ax]] + jitter, grid.q_min[ax], grid.q_max[ax])
    if independent_xi:
        xi = np.stack([chi.sample(rng, count) for _ in range(grid.dims)], axis=1)
    else:
        xi = chi.sample(rng, count)
    p = np.empty_like(q)
    for ax in range(grid.dims):
        x = xi[:, ax] if independent_xi else xi
        p[:, ax] = interpolate(dS[ax], grid, q) + 0.5 * x * interpolate(dlnrho[ax], grid, q)
    return q, p, xi


def sample_erps(
    state: GridState,
    chi: XiDistribution,
    shots,
    seed,
    threads=1,
    independent_xi=False,
    node_threshold=None,
    order=DEFAULT_ORDER,
):
    """Draw ``(q, p, xi)`` from the ERPS law.

    ``q`` comes from an inverse CDF over grid cells with uniform jitter
    inside the cell; draws never land on masked cells. ``p`` is the
    restricted momentum field, linearly interpolated to ``q``. Shots are
    generated in fixed-size chunks seeded by ``(seed, chunk_index)``, so the
    output does not depend on ``threads``.
    """
    shots = int(shots)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    polar = polar_decompose(state, node_threshold)
    dS, dlnrho = polar_gradients(polar, order)
    mask = polar.node_mask
    dS = np.stack([_fill_masked(a, mask) for a in dS])
    dlnrho = np.stack([_fill_masked(a, mask) for a in dlnrho])
    mass = np.where(mask, 0.0, polar.rho).reshape(-1)
    cdf = np.cumsum(mass)
    counts = [min(CHUNK_SHOTS, shots - start) for start in range(0, shots, CHUNK_SHOTS)]
    args = [
        (int(seed), k, c, cdf, state.grid, dS, dlnrho, chi, independent_xi)
        for k, c in enumerate(counts)
    ]
    if threads > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _sample_chunk(*a), args))
    else:
        parts = [_sample_chunk(*a) for a in args]
    q = np.concatenate([p[0] for p in parts])
    p = np.concatenate([p[1] for p in parts])
    xi = np.concatenate([p[2] for p in parts])
    return ErpsSamples(q, p, xi)


def conditional_moments(state: GridState, chi: XiDistribution, node_threshold=None, order=DEFAULT_ORDER):
    """Position-conditioned mean and variance of the restricted momentum."""
    polar = polar_decompose(state, node_threshold)
    dS, dlnrho = polar_gradients(polar, order)
    mean_p = dS + 0.5 * chi.mean * dlnrho
    var_p = 0.25 * chi.variance * dlnrho**2
    return MomentFields(mean_p=mean_p, var_p=var_p, node_mask=polar.node_mask)


def _field_moments(state, chi, node_threshold, order):
    """``(rho, [(weight, p-field), ...])`` on unmasked points of a 1D state."""
    if state.dims != 1:
        raise InvalidGrid("momentum marginals are implemented for 1D states")
    polar = polar_decompose(state, node_threshold)
    dS, dlnrho = polar_gradients(polar, order)
    rho = np.where(polar.node_mask, 0.0, polar.rho)
    fields = [(w, np.where(polar.node_mask, 0.0, dS[0] + 0.5 * x * dlnrho[0])) for x, w in chi.atoms]
    return polar, rho, fields


def momentum_moments(state: GridState, chi: XiDistribution, node_threshold=None, order=DEFAULT_ORDER):
    """First and second moments of the momentum marginal, by collapsing the delta in ``p``."""
    polar, rho, fields = _field_moments(state, chi, node_threshold, order)
    h = state.grid.dq
    m1 = sum(w * np.sum(rho * p) for w, p in fields) * h
    m2 = sum(w * np.sum(rho * p * p) for w, p in fields) * h
    mask = polar.node_mask
    if mask.any():
        # masked cells keep their regular limits rho <p> = hbar Im(conj(psi) psi') and
        # rho <p^2> = hbar^2 |psi'|^2, which carry the finite node contribution to <p^2>
        psi = state.psi
        d = differentiate(psi, h, order=order)
        m1 += state.hbar * np.sum(np.imag(np.conj(psi) * d)[mask]) * h
        m2 += state.hbar**2 * np.sum(np.abs(d[mask]) ** 2) * h
    return float(m1), float(m2)


def marginal_momentum(state: GridState, chi: XiDistribution, p_grid, node_threshold=None, order=DEFAULT_ORDER):
    """Momentum marginal of the ERPS law as a density on a uniform ``p_grid``.

    Per ``xi`` atom the map ``q -> p(q; xi)`` is taken piecewise linear
    between grid points together with the density. Each piece contributes
    ``rho(q(p)) / |dp/dq|`` on the momentum range it covers. Pieces that
    cover less than one ``p_grid`` cell (flat or nearly flat maps) deposit
    their probability mass into the nearest cell instead.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid.ndim != 1 or p_grid.size < 2:
        raise ValueError("p_grid must be a 1D array with at least two points")
    dp = np.diff(p_grid)
    if np.any(dp <= 0) or np.ptp(dp) > 1e-9 * dp.mean():
        raise ValueError("p_grid must be uniform and increasing")
    dp = dp.mean()
    polar, rho, fields = _field_moments(state, chi, node_threshold, order)
    h = state.grid.dq
    good = ~polar.node_mask
    seg = good[:-1] & good[1:]
    r0, r1 = rho[:-1][seg], rho[1:][seg]
    density = np.zeros_like(p_grid)
    flat_mass = 0.0
    for w, p in fields:
        p0, p1 = p[:-1][seg], p[1:][seg]
        lo, hi = np.minimum(p0, p1), np.maximum(p0, p1)
        span = hi - lo
        mass = 0.5 * h * (r0 + r1)
        coarse = span < dp
        flat_mass += w * mass[coarse & (span <= 1e-12 * max(1.0, np.abs(p).max()))].sum()
        # unresolved pieces: histogram deposit
        cell = np.rint((0.5 * (lo + hi)[coarse] - p_grid[0]) / dp).astype(np.int64)
        inside = (cell >= 0) & (cell < p_grid.size)
        np.add.at(density, cell[inside], w * mass[coarse][inside] / dp)
        # resolved pieces: change of variables
        res = ~coarse
        k_lo = np.searchsorted(p_grid, lo[res], side="left")
        k_hi = np.searchsorted(p_grid, hi[res], side="left")
        n_hit = k_hi - k_lo
        if n_hit.sum() == 0:
            continue
        piece = np.repeat(np.arange(n_hit.size), n_hit)
        offsets = np.arange(n_hit.sum()) - np.repeat(np.cumsum(n_hit) - n_hit, n_hit)
        k = k_lo[piece] + offsets
        a, b = p0[res][piece], p1[res][piece]
        t = (p_grid[k] - a) / (b - a)
        rho_at = r0[res][piece] * (1 - t) + r1[res][piece] * t
        jac = np.abs(b - a) / h
        np.add.at(density, k, w * rho_at / jac)
    if flat_mass > 1e-10:
        warnings.warn(
            f"momentum map is flat on a set carrying mass {flat_mass:.3g}; "
            "that mass is binned on p_grid instead of transformed",
            DegenerateJacobianWarning,
            stacklevel=2,
        )
    return density


def uncertainty_product(state: GridState, chi: XiDistribution, node_threshold=None, order=DEFAULT_ORDER):
    """``(sigma_q, sigma_p, sigma_q * sigma_p)`` with ``sigma_p`` taken from the ERPS momentum marginal."""
    m1, m2 = momentum_moments(state, chi, node_threshold, order)
    sigma_p = np.sqrt(max(m2 - m1 * m1, 0.0))
    q1 = state.position_moment(1)
    q2 = state.position_moment(2)
    sigma_q = np.sqrt(max(q2 - q1 * q1, 0.0))
    return float(sigma_q), float(sigma_p), float(sigma_q * sigma_p)


@dataclass(frozen=True, eq=False)
class MixedMoments:
    """Conditional moment fields of a mixture plus its global momentum averages."""

    fields: MomentFields
    mean_p: np.ndarray
    mean_p2: np.ndarray

    @property
    def var_p(self):
        return self.mean_p2 - self.mean_p**2


def erps_mixed_moments(mixed: MixedState, chi: XiDistribution, node_threshold=None, order=DEFAULT_ORDER):
    """Moments of ``sum_l r_l P_l(p, q | xi)``.

    The conditional fields weight each component by ``r_l rho_l(q)``; the
    global averages are ``sum_l r_l <p^k>_l``.
    """
    grid = mixed.grid
    rho_mix = mixed.density
    num1 = np.zeros((grid.dims,) + grid.shape)
    num2 = np.zeros_like(num1)
    mean_p = np.zeros(grid.dims)
    mean_p2 = np.zeros(grid.dims)
    for r, s in mixed.components:
        mf = conditional_moments(s, chi, node_threshold, order)
        rho = np.where(mf.node_mask, 0.0, s.density)
        m = np.nan_to_num(mf.mean_p)
        v = np.nan_to_num(mf.var_p)
        num1 += r * rho * m
        num2 += r * rho * (v + m * m)
        mean_p += r * np.array([grid.integrate(rho * m[ax]) for ax in range(grid.dims)])
        mean_p2 += r * np.array([grid.integrate(rho * (v[ax] + m[ax] ** 2)) for ax in range(grid.dims)])
        if mf.node_mask.any():
            psi = s.psi
            for ax, h in enumerate(grid.spacing):
                d = differentiate(psi, h, axis=ax, order=order)
                mean_p[ax] += r * s.hbar * grid.integrate(np.where(mf.node_mask, np.imag(np.conj(psi) * d), 0.0))
                mean_p2[ax] += r * s.hbar**2 * grid.integrate(np.where(mf.node_mask, np.abs(d) ** 2, 0.0))
    thr = 1e-12 * rho_mix.max() if node_threshold is None else node_threshold
    mask = rho_mix < thr
    with np.errstate(divide="ignore", invalid="ignore"):
        cmean = num1 / rho_mix
        cvar = num2 / rho_mix - cmean**2
    cmean[:, mask] = np.nan
    cvar[:, mask] = np.nan
    return MixedMoments(MomentFields(cmean, np.maximum(cvar, 0.0), mask), mean_p, mean_p2)
