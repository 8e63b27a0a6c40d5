"""Split-step Schroedinger evolution and Wiseman average-momentum trajectories."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidGrid, NodeCrossing, NodeEvaluation, NormDrift
from .state import REL_NODE_THRESHOLD, GridState, check_tails
from .stencils import DEFAULT_ORDER, log_derivative
from .weak import NODE_MARGIN

NORM_DRIFT_TOL = 1e-8
# fourth-order symmetric composition (Yoshida) of the Strang step
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1
SPLITTINGS = {"strang": (1.0,), "yoshida4": (_W1, _W0, _W1)}


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """``p^2 / 2m + V(q)`` on a 1D grid."""

    mass: float
    potential: np.ndarray

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        V = np.array(self.potential, dtype=float)
        if not np.all(np.isfinite(V)):
            raise ValueError("potential must be finite")
        V.setflags(write=False)
        object.__setattr__(self, "potential", V)

    @classmethod
    def free(cls, grid, mass=1.0):
        return cls(mass, np.zeros(grid.shape))

    @classmethod
    def harmonic(cls, grid, mass=1.0, omega=1.0, center=0.0):
        return cls(mass, 0.5 * mass * omega**2 * (grid.q - center) ** 2)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled path ``q(t)``; ``truncated`` marks a path stopped at a masked region."""

    times: np.ndarray
    positions: np.ndarray
    truncated: bool = False


class SplitStepPropagator:
    """Kinetic/potential splitting with an exact spectral kinetic factor.

    The spectral step treats the grid as periodic, so wave packets must
    stay clear of the edges.
    """

    def __init__(self, grid, hbar, H: Hamiltonian, dt, splitting="yoshida4"):
        if grid.dims != 1:
            raise InvalidGrid("propagation is implemented for 1D grids")
        if H.potential.shape != grid.shape:
            raise ValueError("potential does not match the grid")
        vmax = np.abs(H.potential).max()
        if dt * vmax / hbar >= 0.1:
            raise ValueError(f"dt * max|V| / hbar = {dt * vmax / hbar:.3g} must be < 0.1")
        if splitting not in SPLITTINGS:
            raise ValueError(f"unknown splitting {splitting!r}")
        k = 2 * np.pi * np.fft.fftfreq(grid.n_points[0], d=grid.dq)
        self.grid = grid
        self.hbar = hbar
        self.dt = dt
        self._stages = []
        for w in SPLITTINGS[splitting]:
            half_v = np.exp(-0.5j * w * dt * H.potential / hbar)
            kin = np.exp(-0.5j * w * dt * hbar * k**2 / H.mass)
            self._stages.append((half_v, kin))

    def step(self, psi):
        for half_v, kin in self._stages:
            psi = half_v * np.fft.ifft(kin * np.fft.fft(half_v * psi))
        return psi


def _finish(grid, hbar, psi, tail_tol):
    norm = np.sum(np.abs(psi) ** 2) * grid.dq
    if abs(norm - 1.0) > NORM_DRIFT_TOL:
        raise NormDrift(f"norm drifted to {norm!r}")
    check_tails(psi, tail_tol)
    return GridState.from_unnormalized(grid, hbar, psi)


def propagate(state: GridState, H: Hamiltonian, dt, n_steps, splitting="yoshida4", tail_tol=1e-10):
    """Evolve ``state`` by ``n_steps`` steps of size ``dt``."""
    prop = SplitStepPropagator(state.grid, state.hbar, H, dt, splitting)
    psi = np.array(state.psi)
    for _ in range(int(n_steps)):
        psi = prop.step(psi)
    return _finish(state.grid, state.hbar, psi, tail_tol)


def average_velocity(psi, grid, hbar, mass, order=DEFAULT_ORDER, node_threshold=None):
    """``Re pw / m`` on the grid, NaN where the weak value is masked."""
    rho = np.abs(psi) ** 2
    thr = REL_NODE_THRESHOLD * rho.max() if node_threshold is None else node_threshold
    v = hbar * log_derivative(psi, grid.spacing, order)[0].imag / mass
    v[rho < NODE_MARGIN * thr] = np.nan
    return v


def wiseman_trajectories(initial_points, state: GridState, H: Hamiltonian, dt, n_steps,
                         splitting="yoshida4", order=DEFAULT_ORDER, node_threshold=None):
    """Integral curves of ``dq/dt = Re pw(q, t) / m`` for every starting point.

    The wave function is advanced in half steps so that classical RK4 sees
    the field at ``t``, ``t + dt/2`` and ``t + dt``; the field is linearly
    interpolated in ``q``. A trajectory that enters a masked region is
    truncated at its last valid sample, flagged, and a ``NodeCrossing``
    warning is emitted.
    """
    grid, hbar, m = state.grid, state.hbar, H.mass
    q = np.array(initial_points, dtype=float).ravel()
    prop = SplitStepPropagator(grid, hbar, H, 0.5 * dt, splitting)
    x = grid.q

    def vel(psi, pts):
        v = average_velocity(psi, grid, hbar, m, order, node_threshold)
        return np.interp(pts, x, v, left=np.nan, right=np.nan)

    psi = np.array(state.psi)
    v0 = vel(psi, q)
    if np.any(np.isnan(v0)):
        raise NodeEvaluation("some initial points lie in masked regions")
    n_steps = int(n_steps)
    out = np.full((n_steps + 1, q.size), np.nan)
    out[0] = q
    alive = np.ones(q.size, dtype=bool)
    k1 = v0
    for n in range(n_steps):
        psi_half = prop.step(psi)
        psi_next = prop.step(psi_half)
        k2 = vel(psi_half, q + 0.5 * dt * k1)
        k3 = vel(psi_half, q + 0.5 * dt * k2)
        k4 = vel(psi_next, q + dt * k3)
        q = q + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        psi = psi_next
        k1 = vel(psi, q)
        alive &= np.isfinite(q) & np.isfinite(k1)
        out[n + 1, alive] = q[alive]
        q = np.where(alive, q, 0.0)
        k1 = np.where(alive, k1, 0.0)
    times = dt * np.arange(n_steps + 1)
    result = []
    for i in range(out.shape[1]):
        valid = np.isfinite(out[:, i])
        stop = int(np.argmin(valid)) if not valid.all() else valid.size
        result.append(Trajectory(times[:stop], out[:stop, i], truncated=stop < valid.size))
    n_cut = sum(tr.truncated for tr in result)
    if n_cut:
        warnings.warn(f"{n_cut} trajectories entered masked regions and were truncated",
                      NodeCrossing, stacklevel=2)
    return result
