"""Invariant checks run by ``erps verify`` on a single state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DisconnectedDomain
from .observables import QuadraticObservable, equivalence_check
from .phase_space import momentum_field_grid, uncertainty_product
from .state import GridState, polar_decompose
from .tomography import reconstruct
from .weak import field_from_weak, moment_identities_check, weak_momentum_value
from .xi import XiDistribution

PASS, FAIL, SKIP = "pass", "fail", "skip"


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: str
    status: str
    detail: str = ""

    @property
    def ok(self):
        return self.status != FAIL


def _row(name, value, ok, tolerance, detail=""):
    return CheckResult(name, float(value), tolerance, PASS if ok else FAIL, detail)


def field_equivalence_deviation(state: GridState, chi: XiDistribution):
    """Largest pointwise gap between the polar-form and weak-value forms of the momentum field."""
    polar = polar_decompose(state)
    wv = weak_momentum_value(state)
    good = ~(polar.node_mask | wv.node_mask)
    worst = 0.0
    for xi, _ in chi.atoms:
        a = momentum_field_grid(polar, xi)
        b = field_from_weak(wv, xi)
        worst = max(worst, float(np.abs(a[:, good] - b[:, good]).max(initial=0.0)))
    return worst


def _observables(grid):
    mesh = grid.mesh
    zero = np.zeros(grid.shape)
    one = np.ones(grid.shape)
    q2 = sum(m**2 for m in mesh)
    stack = lambda f: np.stack([f] * grid.dims)
    obs = {
        "kinetic_plus_harmonic": QuadraticObservable(grid, stack(0.5 * one), stack(zero), 0.5 * q2),
        "position_weighted_kinetic": QuadraticObservable(grid, stack(1.0 + 0.25 * q2), stack(zero), zero),
        "dilation": QuadraticObservable(grid, stack(zero), np.stack(mesh), zero),
    }
    if grid.dims == 2:
        obs["momentum_cross_term"] = QuadraticObservable(grid, stack(zero), stack(zero), zero, one)
    return obs


def verify_state(state: GridState, chi: XiDistribution | None = None):
    """Run the invariant suite; returns a list of :class:`CheckResult` rows."""
    hbar = state.hbar
    chi = XiDistribution.two_point(hbar) if chi is None else chi
    rows = [
        _row("normalization", abs(state.norm() - 1.0), abs(state.norm() - 1.0) <= 1e-9, "<= 1e-9"),
        _row("xi_mean", abs(chi.mean), abs(chi.mean) <= 1e-12 * max(1.0, hbar), "<= 1e-12"),
        _row("xi_variance_over_hbar2", chi.variance / hbar**2,
             abs(chi.variance / hbar**2 - 1.0) <= 1e-9, "1 +- 1e-9"),
    ]
    if state.dims == 1:
        _, _, prod = uncertainty_product(state, chi)
        rows.append(_row("heisenberg_product_over_hbar", prod / hbar, prod >= 0.5 * hbar - 1e-9,
                         ">= 0.5 - 1e-9"))
    rep = moment_identities_check(state, chi)
    dev = max(rep.max_mean_deviation, rep.max_var_deviation)
    rows.append(_row("moment_identities", dev, rep.passed(1e-6), "< 1e-6", f"{rep.n_masked} masked"))
    dev = field_equivalence_deviation(state, chi)
    rows.append(_row("field_polar_vs_weak", dev, dev < 1e-10, "< 1e-10"))
    for name, obs in _observables(state.grid).items():
        r = equivalence_check(state, obs, chi, tol=1e-6)
        rel = r.deviation / (1.0 + abs(r.quantum))
        rows.append(_row(f"expectation_{name}", rel, r.passed, "rel <= 1e-6",
                         f"quantum={r.quantum:.12g} phase_space={r.phase_space:.12g}"))
    if state.dims == 1:
        try:
            fid = reconstruct(weak_momentum_value(state), truth=state).fidelity
            rows.append(_row("reconstruction_infidelity", 1.0 - fid, fid >= 1.0 - 1e-8, "<= 1e-8"))
        except DisconnectedDomain as exc:
            rows.append(CheckResult("reconstruction_infidelity", float("nan"), "<= 1e-8", SKIP,
                                    f"{len(exc.regions)} node-separated regions"))
    return rows


def format_table(rows):
    head = ("check", "value", "tolerance", "status", "detail")
    body = [(r.name, f"{r.value:.6g}", r.tolerance, r.status.upper(), r.detail) for r in rows]
    widths = [max(len(str(x[i])) for x in [head] + body) for i in range(len(head))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*head), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*b) for b in body]
    return "\n".join(line.rstrip() for line in lines)
