"""Quadratic-in-momentum observables: operator ordering and two-route expectation values.

A classical ``O(p, q) = sum_n A_n p_n^2 + sum_n B_n p_n + C (+ D p1 p2)`` is
quantized as ``p A p + (p B + B p) / 2 + C (+ (p1 D p2 + p2 D p1) / 2)``.
Its quantum expectation is compared with the average of ``O`` over the ERPS
distribution, where the delta constraint removes the momentum integral.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.sparse as sp

from .errors import GridMismatch, InvalidState
from .phase_space import polar_gradients
from .state import Grid, MixedState, polar_decompose
from .stencils import DEFAULT_ORDER, derivative_matrix, differentiate
from .xi import XiDistribution

HERMITIAN_TOL = 1e-10
IMAG_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QuadraticObservable:
    """Coefficient fields sampled on a grid.

    ``A`` and ``B`` have shape ``(dims, *grid.shape)`` (one field per
    momentum component), ``C`` has the grid shape, and ``D`` (2D only,
    optional) multiplies ``p1 p2``.
    """

    grid: Grid
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray | None = None

    def __post_init__(self):
        shape = self.grid.shape
        dims = self.grid.dims
        for name in ("A", "B"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape == shape:
                arr = arr[None] if dims == 1 else np.stack([arr] + [np.zeros(shape)] * (dims - 1))
            if arr.shape != (dims,) + shape:
                raise InvalidState(f"{name} must have shape {(dims,) + shape}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        C = np.asarray(self.C, dtype=float)
        if C.shape != shape:
            raise InvalidState(f"C must have shape {shape}, got {C.shape}")
        object.__setattr__(self, "C", C)
        if self.D is not None:
            if dims != 2:
                raise InvalidState("a cross term D needs a 2D grid")
            D = np.asarray(self.D, dtype=float)
            if D.shape != shape:
                raise InvalidState(f"D must have shape {shape}, got {D.shape}")
            object.__setattr__(self, "D", D)
        for arr in (self.A, self.B, self.C) + (() if self.D is None else (self.D,)):
            if not np.all(np.isfinite(arr)):
                raise InvalidState("observable coefficients must be finite")

    @classmethod
    def from_functions(cls, grid, A=None, B=None, C=None, D=None):
        """Sample coefficient callables ``f(*mesh)``; ``A``/``B`` may be a list, one per axis."""
        mesh = grid.mesh
        zero = np.zeros(grid.shape)

        def per_axis(f):
            if f is None:
                return np.zeros((grid.dims,) + grid.shape)
            fs = f if isinstance(f, (list, tuple)) else [f] + [None] * (grid.dims - 1)
            return np.stack([zero if g is None else np.broadcast_to(g(*mesh), grid.shape) for g in fs])

        return cls(
            grid,
            per_axis(A),
            per_axis(B),
            zero if C is None else np.broadcast_to(C(*mesh), grid.shape),
            None if D is None else np.broadcast_to(D(*mesh), grid.shape),
        )

    def evaluate(self, p, mask=None):
        """Classical value ``O(p, q)`` for momentum fields ``p`` of shape ``(dims, *grid)``."""
        out = self.C + sum(self.A[n] * p[n] ** 2 + self.B[n] * p[n] for n in range(self.grid.dims))
        if self.D is not None:
            out = out + self.D * p[0] * p[1]
        return out

    def to_json(self):
        doc = {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}
        if self.D is not None:
            doc["D"] = self.D.tolist()
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text, grid):
        doc = json.loads(text)
        return cls(grid, doc["A"], doc["B"], doc["C"], doc.get("D"))


@dataclass(frozen=True, eq=False)
class HermitianOperatorMatrix:
    grid: Grid
    matrix: sp.csr_matrix

    def hermiticity_error(self):
        diff = self.matrix - self.matrix.conj().T
        return float(np.abs(diff.data).max(initial=0.0))

    def is_hermitian(self, tol=HERMITIAN_TOL):
        return self.hermiticity_error() <= tol

    def apply(self, psi):
        return (self.matrix @ np.asarray(psi).reshape(-1)).reshape(self.grid.shape)


def momentum_matrices(grid, hbar, order=DEFAULT_ORDER):
    """``-i hbar D_n`` for every axis, as sparse matrices on the flattened grid."""
    mats = []
    for ax in range(grid.dims):
        d = derivative_matrix(grid.n_points[ax], grid.spacing[ax], order)
        if grid.dims == 2:
            eye = sp.identity(grid.n_points[1 - ax], format="csr")
            d = sp.kron(d, eye) if ax == 0 else sp.kron(eye, d)
        mats.append((-1j * hbar * d).tocsr())
    return mats


def quantize(obs: QuadraticObservable, hbar=1.0, order=DEFAULT_ORDER, cross_ordering="sandwich"):
    """Operator for ``obs`` in the ordering ``p A p + (p B + B p)/2 + C``.

    The left momentum factor of each product is the adjoint of the stencil
    matrix, which keeps the result exactly Hermitian even where the stencil
    becomes one-sided. ``cross_ordering`` selects ``(p1 D p2 + p2 D p1)/2``
    (``"sandwich"``) or ``D (p1 p2 + p2 p1)/2`` symmetrized as
    ``(D P + P D)/2`` with ``P = (p1 p2 + p2 p1)/2`` (``"symmetric"``).
    """
    grid = obs.grid
    P = momentum_matrices(grid, hbar, order)
    diag = lambda f: sp.diags(np.asarray(f).reshape(-1))
    op = diag(obs.C).astype(complex)
    for n in range(grid.dims):
        Ph = P[n].conj().T
        op = op + Ph @ diag(obs.A[n]) @ P[n]
        B = diag(obs.B[n])
        op = op + 0.5 * (Ph @ B + B @ P[n])
    if obs.D is not None:
        D = diag(obs.D)
        if cross_ordering == "sandwich":
            op = op + 0.5 * (P[0].conj().T @ D @ P[1] + P[1].conj().T @ D @ P[0])
        elif cross_ordering == "symmetric":
            pp = 0.5 * (P[0] @ P[1] + P[1] @ P[0])
            pp = 0.5 * (pp + pp.conj().T)
            op = op + 0.5 * (D @ pp + pp @ D)
        else:
            raise ValueError(f"unknown cross_ordering {cross_ordering!r}")
    # the sparse products round differently from their adjoints
    op = 0.5 * (op + op.conj().T)
    return HermitianOperatorMatrix(grid, op.tocsr())


def _components(state):
    if isinstance(state, MixedState):
        return list(state.components)
    return [(1.0, state)]


def quantum_expectation(state, op: HermitianOperatorMatrix):
    """``<psi|O|psi>`` (or ``Tr rho O`` for a mixture); warns on a large imaginary residual."""
    total = 0.0 + 0.0j
    for r, s in _components(state):
        if s.grid != op.grid:
            raise GridMismatch("operator and state live on different grids")
        psi = s.psi.reshape(-1)
        total += r * np.vdot(psi, op.matrix @ psi) * s.grid.cell_volume
    if abs(total.imag) > IMAG_RESIDUAL_TOL * (1.0 + abs(total.real)):
        warnings.warn(f"expectation value has imaginary residual {total.imag:.3e}", stacklevel=2)
    return float(total.real)


def _xi_combinations(chi, dims, xi_mode):
    if xi_mode == "global":
        return [((x,) * dims, w) for x, w in chi.atoms]
    if xi_mode == "independent":
        return [
            (tuple(a[0] for a in combo), float(np.prod([a[1] for a in combo])))
            for combo in product(chi.atoms, repeat=dims)
        ]
    raise ValueError(f"unknown xi_mode {xi_mode!r}")


def _pure_phase_space_expectation(state, obs, chi, xi_mode, node_threshold, order):
    polar = polar_decompose(state, node_threshold)
    dS, dlnrho = polar_gradients(polar, order)
    good = ~polar.node_mask
    rho = np.where(good, polar.rho, 0.0)
    dS = np.where(good, dS, 0.0)
    dlnrho = np.where(good, dlnrho, 0.0)
    total = 0.0
    for xis, w in _xi_combinations(chi, state.dims, xi_mode):
        p = np.stack([dS[n] + 0.5 * xis[n] * dlnrho[n] for n in range(state.dims)])
        total += w * state.grid.integrate(rho * obs.evaluate(p))
    if xi_mode == "global" and polar.node_mask.any():
        total += _masked_cell_limit(state, obs, polar.node_mask, order)
    return float(total)


def _masked_cell_limit(state, obs, mask, order):
    # rho * E_xi[O] stays regular where rho -> 0: E[rho p_j] = hbar Im(conj(psi) d_j psi) and
    # E[rho p_j p_k] = hbar^2 Re(conj(d_j psi) d_k psi) for a global xi of mean 0, variance hbar^2
    hbar, psi = state.hbar, state.psi
    d = [differentiate(psi, h, axis=ax, order=order) for ax, h in enumerate(state.grid.spacing)]
    val = obs.C * np.abs(psi) ** 2
    for n in range(state.dims):
        val = val + obs.A[n] * hbar**2 * np.abs(d[n]) ** 2 + obs.B[n] * hbar * np.imag(np.conj(psi) * d[n])
    if obs.D is not None:
        val = val + obs.D * hbar**2 * np.real(np.conj(d[0]) * d[1])
    return state.grid.integrate(np.where(mask, val, 0.0))


def phase_space_expectation(state, obs: QuadraticObservable, chi: XiDistribution, xi_mode="global",
                            node_threshold=None, order=DEFAULT_ORDER):
    """Average of ``O(p, q)`` over the ERPS law, summed exactly over the atoms of ``chi``.

    ``xi_mode="independent"`` draws a separate ``xi`` for each degree of
    freedom, a deliberately wrong variant kept for comparison.
    """
    return float(sum(
        r * _pure_phase_space_expectation(s, obs, chi, xi_mode, node_threshold, order)
        for r, s in _components(state)
    ))


@dataclass(frozen=True)
class EquivalenceReport:
    quantum: float
    phase_space: float
    tol: float

    @property
    def deviation(self):
        return abs(self.quantum - self.phase_space)

    @property
    def passed(self):
        return self.deviation <= self.tol * (1.0 + abs(self.quantum))


def equivalence_check(state, obs, chi, tol=1e-6, hbar=None, xi_mode="global", order=DEFAULT_ORDER,
                      cross_ordering="sandwich"):
    hbar = _components(state)[0][1].hbar if hbar is None else hbar
    op = quantize(obs, hbar, order, cross_ordering)
    return EquivalenceReport(
        quantum=quantum_expectation(state, op),
        phase_space=phase_space_expectation(state, obs, chi, xi_mode, order=order),
        tol=tol,
    )


def polynomial_observable(grid, a_coeffs=(), b_coeffs=(), c_coeffs=()):
    """1D observable whose coefficient fields are polynomials in ``q`` (lowest degree first)."""
    q = grid.q
    poly = lambda c: np.polynomial.polynomial.polyval(q, c) if len(c) else np.zeros_like(q)
    return QuadraticObservable(grid, poly(a_coeffs), poly(b_coeffs), poly(c_coeffs))
