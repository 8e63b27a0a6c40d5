"""Wave functions on uniform grids and their polar decomposition.

All objects are immutable after construction: arrays are copied and
marked read-only, and every transform returns a new state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    AllNodes,
    BadWeights,
    GridMismatch,
    InvalidGrid,
    InvalidState,
    NormalizationWarning,
    TailClipped,
)

NORM_TOL = 1e-9
TAIL_TOL = 1e-12
REL_NODE_THRESHOLD = 1e-12


def _frozen(a, dtype=None):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _as_tuple(x, cast):
    if np.ndim(x) == 0:
        return (cast(x),)
    return tuple(cast(v) for v in x)


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product grid in one or two dimensions.

    Both end points are grid nodes, so ``spacing = (q_max - q_min) / (n_points - 1)``.
    """

    q_min: tuple
    q_max: tuple
    n_points: tuple

    def __post_init__(self):
        object.__setattr__(self, "q_min", _as_tuple(self.q_min, float))
        object.__setattr__(self, "q_max", _as_tuple(self.q_max, float))
        object.__setattr__(self, "n_points", _as_tuple(self.n_points, int))
        if not (len(self.q_min) == len(self.q_max) == len(self.n_points)):
            raise InvalidGrid("q_min, q_max and n_points must have the same length")
        if self.dims not in (1, 2):
            raise InvalidGrid(f"only 1D and 2D grids are supported, got dims={self.dims}")
        for lo, hi, n in zip(self.q_min, self.q_max, self.n_points):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
                raise InvalidGrid(f"need q_max > q_min, got [{lo}, {hi}]")
            if n < 8:
                raise InvalidGrid(f"n_points must be >= 8, got {n}")

    @classmethod
    def line(cls, q_min, q_max, n_points):
        return cls((q_min,), (q_max,), (n_points,))

    @classmethod
    def square(cls, q_min, q_max, n_points):
        return cls((q_min, q_min), (q_max, q_max), (n_points, n_points))

    @property
    def dims(self):
        return len(self.n_points)

    @property
    def shape(self):
        return tuple(self.n_points)

    @property
    def spacing(self):
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.q_min, self.q_max, self.n_points))

    @property
    def dq(self):
        """Spacing of a 1D grid."""
        if self.dims != 1:
            raise InvalidGrid("dq is only defined for 1D grids; use spacing")
        return self.spacing[0]

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @cached_property
    def axes(self):
        return tuple(
            np.linspace(lo, hi, n) for lo, hi, n in zip(self.q_min, self.q_max, self.n_points)
        )

    @property
    def q(self):
        """Coordinates of a 1D grid."""
        if self.dims != 1:
            raise InvalidGrid("q is only defined for 1D grids; use mesh")
        return self.axes[0]

    @cached_property
    def mesh(self):
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def axis_grid(self, axis):
        """The 1D grid along one axis."""
        return Grid.line(self.q_min[axis], self.q_max[axis], self.n_points[axis])

    def integrate(self, values):
        """Quadrature of ``values`` over the grid (sum times cell volume).

        For integrands that vanish at the boundary this is the trapezoid rule.
        """
        return np.sum(values) * self.cell_volume


@dataclass(frozen=True, eq=False)
class GridState:
    """A normalized wave function sampled on a :class:`Grid`."""

    grid: Grid
    hbar: float
    psi: np.ndarray

    def __post_init__(self):
        psi = _frozen(self.psi, dtype=complex)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "hbar", float(self.hbar))
        if not self.hbar > 0:
            raise InvalidState(f"hbar must be positive, got {self.hbar}")
        if psi.shape != self.grid.shape:
            raise InvalidState(f"psi has shape {psi.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(psi)):
            raise InvalidState("psi contains non-finite entries")
        norm = self.norm()
        if abs(norm - 1.0) > NORM_TOL:
            raise InvalidState(f"psi is not normalized (norm = {norm!r})")

    @classmethod
    def from_unnormalized(cls, grid, hbar, psi):
        psi = np.asarray(psi, dtype=complex)
        norm = np.sum(np.abs(psi) ** 2) * grid.cell_volume
        if not norm > 0 or not np.isfinite(norm):
            raise InvalidState("cannot normalize a zero or non-finite wave function")
        return cls(grid, hbar, psi / np.sqrt(norm))

    @property
    def dims(self):
        return self.grid.dims

    @cached_property
    def density(self):
        return _frozen(np.abs(self.psi) ** 2)

    def norm(self):
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.cell_volume)

    def overlap(self, other):
        """Inner product <self|other>."""
        if other.grid != self.grid:
            raise GridMismatch("states live on different grids")
        return complex(np.vdot(self.psi, other.psi) * self.grid.cell_volume)

    def fidelity(self, other):
        return abs(self.overlap(other)) ** 2

    def mean_position(self):
        rho = self.density
        return np.array([self.grid.integrate(rho * m) for m in self.grid.mesh])

    def position_moment(self, k, axis=0):
        return float(self.grid.integrate(self.density * self.grid.mesh[axis] ** k))

    def node_mask(self, node_threshold=None):
        rho = self.density
        if node_threshold is None:
            node_threshold = REL_NODE_THRESHOLD * rho.max()
        return rho < node_threshold


@dataclass(frozen=True, eq=False)
class PolarFields:
    """Density and unwrapped phase of a wave function, ``psi = sqrt(rho) exp(i S / hbar)``.

    ``S`` is also filled in on masked points but carries no meaning there.
    """

    grid: Grid
    hbar: float
    rho: np.ndarray
    S: np.ndarray
    node_mask: np.ndarray
    node_threshold: float

    def reassemble(self):
        return np.sqrt(self.rho) * np.exp(1j * self.S / self.hbar)

    @property
    def regions(self):
        """Connected unmasked runs of a 1D field as (start, stop) index pairs."""
        return unmasked_runs(self.node_mask)


@dataclass(frozen=True, eq=False)
class MixedState:
    """Incoherent mixture ``sum_l r_l |psi_l><psi_l|``."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise BadWeights("a mixture needs at least one component")
        weights = np.array([w for w, _ in comps])
        if np.any(weights < 0) or np.any(weights > 1):
            raise BadWeights(f"weights must lie in [0, 1], got {weights.tolist()}")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise BadWeights(f"weights must sum to 1, got {weights.sum()!r}")
        grid, hbar = comps[0][1].grid, comps[0][1].hbar
        for _, s in comps:
            if s.grid != grid or s.hbar != hbar:
                raise GridMismatch("all mixture components must share grid and hbar")

    @property
    def grid(self):
        return self.components[0][1].grid

    @property
    def hbar(self):
        return self.components[0][1].hbar

    @property
    def weights(self):
        return np.array([w for w, _ in self.components])

    @property
    def states(self):
        return [s for _, s in self.components]

    @property
    def density(self):
        return sum(w * s.density for w, s in self.components)

    def average(self, fn):
        """Convex combination ``sum_l r_l fn(psi_l)``."""
        return sum(w * fn(s) for w, s in self.components)


def unmasked_runs(mask):
    """(start, stop) pairs of maximal runs of False in a 1D boolean mask."""
    good = ~np.asarray(mask, dtype=bool)
    edges = np.diff(np.concatenate(([0], good.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), stops.tolist()))


def check_tails(psi, tol=TAIL_TOL):
    """Raise :class:`TailClipped` if the boundary density exceeds ``tol`` relative to the peak."""
    rho = np.abs(np.asarray(psi)) ** 2
    peak = rho.max()
    edge = max(
        max(np.take(rho, 0, axis=ax).max(), np.take(rho, -1, axis=ax).max())
        for ax in range(rho.ndim)
    )
    if edge > tol * peak:
        raise TailClipped(
            f"boundary density is {edge / peak:.3e} of the peak (limit {tol:.0e}); enlarge the grid"
        )


def _require_1d(grid, what):
    if grid.dims != 1:
        raise InvalidGrid(f"{what} requires a 1D grid")


def build_gaussian(grid, hbar, q0, p0, sigma_q, tail_tol=TAIL_TOL):
    """Minimum-uncertainty packet centered at ``q0`` with mean momentum ``p0``."""
    _require_1d(grid, "build_gaussian")
    if not sigma_q > 0:
        raise InvalidState(f"sigma_q must be positive, got {sigma_q}")
    q = grid.q
    psi = (2 * np.pi * sigma_q**2) ** -0.25 * np.exp(
        -((q - q0) ** 2) / (4 * sigma_q**2) + 1j * p0 * q / hbar
    )
    check_tails(psi, tail_tol)
    return GridState.from_unnormalized(grid, hbar, psi)


def build_correlated_gaussian(grid, hbar, mean, cov, p0=(0.0, 0.0), tail_tol=TAIL_TOL):
    """2D Gaussian with position covariance ``cov``; entangled when ``cov`` is not diagonal."""
    if grid.dims != 2:
        raise InvalidGrid("build_correlated_gaussian requires a 2D grid")
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (2, 2) or np.any(np.linalg.eigvalsh(cov) <= 0):
        raise InvalidState("cov must be a symmetric positive-definite 2x2 matrix")
    prec = np.linalg.inv(cov)
    x = grid.mesh[0] - mean[0]
    y = grid.mesh[1] - mean[1]
    quad = prec[0, 0] * x * x + 2 * prec[0, 1] * x * y + prec[1, 1] * y * y
    phase = (p0[0] * grid.mesh[0] + p0[1] * grid.mesh[1]) / hbar
    psi = np.exp(-0.25 * quad + 1j * phase)
    check_tails(psi, tail_tol)
    return GridState.from_unnormalized(grid, hbar, psi)


def plane_wave(grid, hbar, p0):
    """Box-normalized ``exp(i p0 q / hbar)``; deliberately not tail-checked."""
    _require_1d(grid, "plane_wave")
    return GridState.from_unnormalized(grid, hbar, np.exp(1j * p0 * grid.q / hbar))


def harmonic_eigenstate(grid, hbar, level, mass=1.0, omega=1.0, center=0.0):
    """Harmonic-oscillator eigenfunction via the normalized Hermite recurrence."""
    _require_1d(grid, "harmonic_eigenstate")
    if level < 0:
        raise InvalidState(f"level must be >= 0, got {level}")
    length = np.sqrt(hbar / (mass * omega))
    x = (grid.q - center) / length
    prev = np.zeros_like(x)
    cur = np.pi**-0.25 * np.exp(-0.5 * x * x)
    for k in range(level):
        prev, cur = cur, np.sqrt(2.0 / (k + 1)) * x * cur - np.sqrt(k / (k + 1)) * prev
    return GridState.from_unnormalized(grid, hbar, cur / np.sqrt(length))


def superpose(states: Sequence[GridState], coeffs, warn=True):
    """Normalized ``sum_k c_k psi_k``; warns when the coefficients were not normalized."""
    if len(states) != len(coeffs) or not states:
        raise InvalidState("need one coefficient per state")
    grid, hbar = states[0].grid, states[0].hbar
    for s in states:
        if s.grid != grid or s.hbar != hbar:
            raise GridMismatch("superposed states must share grid and hbar")
    psi = sum(complex(c) * s.psi for c, s in zip(coeffs, states))
    out = GridState.from_unnormalized(grid, hbar, psi)
    raw_norm = np.sum(np.abs(psi) ** 2) * grid.cell_volume
    if warn and abs(raw_norm - 1.0) > NORM_TOL:
        warnings.warn(
            f"superposition had norm {raw_norm:.6g}; output was renormalized",
            NormalizationWarning,
            stacklevel=2,
        )
    return out


def eigen_superposition(grid, hbar, coeffs, levels=None, mass=1.0, omega=1.0, warn=True):
    levels = list(range(len(coeffs))) if levels is None else list(levels)
    states = [harmonic_eigenstate(grid, hbar, n, mass, omega) for n in levels]
    return superpose(states, coeffs, warn=warn)


def two_gaussian(grid, hbar, a, sigma_q, p0=0.0, relative_phase=0.0):
    """Equal-weight superposition of packets at ``-a`` and ``+a`` (double-slit state)."""
    left = build_gaussian(grid, hbar, -a, p0, sigma_q)
    right = build_gaussian(grid, hbar, a, p0, sigma_q)
    return superpose([left, right], [1.0, np.exp(1j * relative_phase)], warn=False)


def _unwrap_1d(raw, mask):
    out = raw.copy()
    for start, stop in unmasked_runs(mask):
        out[start:stop] = np.unwrap(raw[start:stop])
    return out


def polar_decompose(state: GridState, node_threshold=None):
    """Split ``psi`` into density and unwrapped phase.

    The phase is measured relative to the first unmasked point (row-major),
    where ``S = 0``. Each nodeless run is unwrapped independently, so the
    offset between runs is kept only modulo ``2 pi hbar``.
    """
    rho = np.asarray(state.density)
    if node_threshold is None:
        node_threshold = REL_NODE_THRESHOLD * rho.max()
    mask = rho < node_threshold
    if mask.all():
        raise AllNodes("every grid point lies below the node threshold")
    ref = np.flatnonzero(~mask.ravel())[0]
    psi = state.psi
    raw = np.angle(psi * np.conj(psi.ravel()[ref]))
    if state.dims == 1:
        phase = _unwrap_1d(raw, mask)
    else:
        phase = np.empty_like(raw)
        for i in range(raw.shape[0]):
            phase[i] = _unwrap_1d(raw[i], mask[i])
        # stitch rows by whole turns so neighbouring rows agree
        for i in range(1, raw.shape[0]):
            both = ~mask[i] & ~mask[i - 1]
            if both.any():
                turns = np.round(np.median(phase[i - 1, both] - phase[i, both]) / (2 * np.pi))
                phase[i] += 2 * np.pi * turns
        phase -= phase.ravel()[ref]
    return PolarFields(
        grid=state.grid,
        hbar=state.hbar,
        rho=_frozen(rho),
        S=_frozen(state.hbar * phase),
        node_mask=_frozen(mask),
        node_threshold=float(node_threshold),
    )


def _translate(psi, grid, shift):
    """Spectral translation ``psi(q) -> psi(q - shift)`` along every axis."""
    out = np.asarray(psi, dtype=complex)
    for ax, (d, h) in enumerate(zip(shift, grid.spacing)):
        if d == 0:
            continue
        n = out.shape[ax]
        k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        shape = [1] * out.ndim
        shape[ax] = n
        out = np.fft.ifft(np.fft.fft(out, axis=ax) * np.exp(-1j * k * d).reshape(shape), axis=ax)
    return out


def shift_phase_space(state: GridState, q0, p0, tail_tol=TAIL_TOL):
    """Displace a state by ``q0`` in position and ``p0`` in mean momentum.

    ``psi'(q) = exp(i p0 (q - q0) / hbar) psi(q - q0)``; in 2D ``q0`` and
    ``p0`` are per-axis pairs.
    """
    grid = state.grid
    q0 = np.broadcast_to(np.asarray(q0, dtype=float), (grid.dims,))
    p0 = np.broadcast_to(np.asarray(p0, dtype=float), (grid.dims,))
    psi = _translate(state.psi, grid, q0)
    phase = sum(p * (m - d) for p, m, d in zip(p0, grid.mesh, q0)) / state.hbar
    psi = psi * np.exp(1j * phase)
    check_tails(psi, tail_tol)
    return GridState.from_unnormalized(grid, state.hbar, psi)


def tensor_product(a: GridState, b: GridState):
    """Product state ``psi(q1, q2) = psi_a(q1) psi_b(q2)`` on the product grid."""
    if a.dims != 1 or b.dims != 1:
        raise GridMismatch("tensor_product takes two 1D states")
    if a.hbar != b.hbar:
        raise GridMismatch(f"hbar differs between factors ({a.hbar} vs {b.hbar})")
    grid = Grid(
        (a.grid.q_min[0], b.grid.q_min[0]),
        (a.grid.q_max[0], b.grid.q_max[0]),
        (a.grid.n_points[0], b.grid.n_points[0]),
    )
    return GridState.from_unnormalized(grid, a.hbar, np.outer(a.psi, b.psi))


def mix(states):
    """Build a :class:`MixedState` from ``[(weight, state), ...]``."""
    return MixedState(tuple(states))
