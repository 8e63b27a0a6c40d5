"""Wave-function reconstruction from a weak momentum value field.

The phase is the running integral of ``Re pw`` and the log-density the
running integral of ``-(2/hbar) Im pw``; normalization fixes the constant.
The default method solves the equivalent linear equation ``psi' = (i/hbar)
pw psi`` by collocation, which stays accurate where the density dips and
the integrands spike. Regions separated by masked nodes are reconstructed
independently because their relative phase is not determined by the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_simpson, cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .errors import AllNodes, DisconnectedDomain, InvalidGrid, InvalidState
from .state import Grid, GridState, unmasked_runs
from .stencils import DEFAULT_ORDER, derivative_matrix
from .weak import WeakValueField


@dataclass(frozen=True, eq=False)
class RegionReconstruction:
    """Reconstruction on one connected unmasked run ``[start, stop)``."""

    start: int
    stop: int
    phase: np.ndarray
    log_density: np.ndarray
    state: GridState
    norm_constant: float


@dataclass(frozen=True, eq=False)
class NoiseBand:
    """First-order infidelity distribution induced by the input standard errors."""

    mean_infidelity: float
    std_infidelity: float

    @property
    def fidelity_interval(self):
        lo = max(0.0, 1.0 - self.mean_infidelity - 2.0 * self.std_infidelity)
        hi = min(1.0, 1.0 - max(0.0, self.mean_infidelity - 2.0 * self.std_infidelity))
        return lo, hi

    def to_dict(self):
        lo, hi = self.fidelity_interval
        return {"mean_infidelity": self.mean_infidelity, "std_infidelity": self.std_infidelity,
                "fidelity_low": lo, "fidelity_high": hi}


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    state: GridState
    norm_constant: float
    fidelity: float | None
    n_masked: int
    regions: list = field(default_factory=list)
    noise_band: NoiseBand | None = None

    def report(self):
        return {
            "fidelity": self.fidelity,
            "n_masked": self.n_masked,
            "regions": [[int(r.start), int(r.stop)] for r in self.regions],
            "noise_band": None if self.noise_band is None else self.noise_band.to_dict(),
        }


def _running_integral(values, dx, method):
    if values.size == 1:
        return np.zeros(1)
    if method == "simpson" and values.size >= 3:
        return cumulative_simpson(values, dx=dx, initial=0.0)
    if method in ("simpson", "trapezoid"):
        return cumulative_trapezoid(values, dx=dx, initial=0.0)
    raise ValueError(f"unknown integration method {method!r}")


def _region_psi(re, im, hbar, dx, method):
    phase = _running_integral(re, dx, method)
    log_rho = -(2.0 / hbar) * _running_integral(im, dx, method)
    # anchoring at the maximum keeps exp() in range for long domains
    amp = np.exp(0.5 * (log_rho - log_rho.max()))
    return phase, log_rho, amp * np.exp(1j * phase / hbar)


def _collocation_psi(re, im, hbar, dx, order):
    """Solve ``(D - i pw / hbar) psi = 0`` with ``psi = 1`` at the estimated density peak."""
    m = re.size
    _, log_rho, _ = _region_psi(re, im, hbar, dx, "simpson")
    A = (derivative_matrix(m, dx, order) - sp.diags(1j * (re + 1j * im) / hbar)).tolil()
    k = int(np.argmax(log_rho))
    A[k, :] = 0.0
    A[k, k] = 1.0
    rhs = np.zeros(m, dtype=complex)
    rhs[k] = 1.0
    psi = spsolve(A.tocsc(), rhs)
    psi = psi * np.exp(-1j * np.angle(psi[0]))
    with np.errstate(divide="ignore"):
        log_rho = np.log(np.abs(psi) ** 2)
    return hbar * np.unwrap(np.angle(psi)), log_rho, psi


def fidelity_against(estimate: GridState, truth: GridState):
    """``|<estimate|truth>|^2``, resampling ``estimate`` onto the truth grid if needed."""
    if estimate.grid == truth.grid:
        return float(min(1.0, estimate.fidelity(truth)))
    if estimate.grid.dims != 1 or truth.grid.dims != 1:
        raise InvalidGrid("resampled fidelity is implemented for 1D grids")
    psi_hat = resample(estimate, truth.grid)
    ov = np.vdot(psi_hat, truth.psi) * truth.grid.dq
    norm = np.vdot(psi_hat, psi_hat).real * truth.grid.dq
    return float(min(1.0, abs(ov) ** 2 / norm))


def resample(state: GridState, grid: Grid):
    """Spline the amplitude and unwrapped phase of a nodeless 1D state onto ``grid``; zero outside."""
    x = state.grid.q
    amp = np.abs(state.psi)
    if np.any(amp <= 0):
        raise InvalidState("resampling needs a nodeless state")
    phase = np.unwrap(np.angle(state.psi))
    t = grid.q
    inside = (t >= x[0]) & (t <= x[-1])
    out = np.zeros(grid.shape, dtype=complex)
    log_amp = CubicSpline(x, np.log(amp))(t[inside])
    out[inside] = np.exp(log_amp + 1j * CubicSpline(x, phase)(t[inside]))
    return out


def _reconstruct_regions(wv: WeakValueField, hbar, method, order=DEFAULT_ORDER):
    if wv.grid.dims != 1:
        raise InvalidGrid("reconstruction is implemented for 1D fields")
    grid = wv.grid
    mask = np.asarray(wv.node_mask) | ~np.isfinite(wv.pw[0])
    runs = unmasked_runs(mask)
    if not runs:
        raise AllNodes("weak-value field is masked everywhere")
    regions = []
    for start, stop in runs:
        sl = slice(start, stop)
        re, im = wv.re[0, sl], wv.im[0, sl]
        if method == "collocation" and stop - start > order + 1:
            phase, log_rho, psi_r = _collocation_psi(re, im, hbar, grid.dq, order)
        else:
            phase, log_rho, psi_r = _region_psi(re, im, hbar, grid.dq,
                                                "simpson" if method == "collocation" else method)
        psi = np.zeros(grid.shape, dtype=complex)
        psi[sl] = psi_r
        norm = np.sum(np.abs(psi) ** 2) * grid.dq
        regions.append(RegionReconstruction(
            start, stop, phase, log_rho,
            GridState.from_unnormalized(grid, hbar, psi),
            float(1.0 / norm),
        ))
    return mask, regions


def reconstruct(wv: WeakValueField, hbar=None, truth: GridState | None = None, method="collocation"):
    """Rebuild ``psi`` from the weak value field on its connected unmasked domain.

    The integrals start at the leftmost unmasked point, so ``S(q_ref) = 0``.
    ``method`` is ``"collocation"``, ``"simpson"`` or ``"trapezoid"``.
    Raises ``DisconnectedDomain`` (carrying the per-region results) when
    masked nodes split the domain.
    """
    hbar = wv.hbar if hbar is None else hbar
    mask, regions = _reconstruct_regions(wv, hbar, method)
    if len(regions) > 1:
        raise DisconnectedDomain(
            f"nodes split the domain into {len(regions)} regions with undetermined relative phases",
            regions=regions,
        )
    (region,) = regions
    fid = None if truth is None else fidelity_against(region.state, truth)
    return ReconstructionResult(region.state, region.norm_constant, fid, int(mask.sum()), regions)


def _integration_matrix(n, dx, method):
    """Matrix ``L`` with ``L @ f`` equal to the running integral of ``f``."""
    eye = np.eye(n)
    if n == 1:
        return np.zeros((1, 1))
    if method == "simpson" and n >= 3:
        return cumulative_simpson(eye, dx=dx, axis=0, initial=0.0)
    return cumulative_trapezoid(eye, dx=dx, axis=0, initial=0.0)


def noise_band(wv: WeakValueField, stderr_re, stderr_im, hbar=None, method="simpson"):
    """Mean and spread of ``1 - F`` to first order in independent Gaussian input errors.

    With ``psi_hat = psi exp(a + i b)`` the infidelity is ``Var_rho(a) +
    Var_rho(b)``, a quadratic form ``n^T Q n`` in the noise ``n``; its mean is
    ``tr(Q C)`` and its variance ``2 tr((Q C)^2)``.
    """
    hbar = wv.hbar if hbar is None else hbar
    mask, regions = _reconstruct_regions(wv, hbar, method)
    if len(regions) != 1:
        raise DisconnectedDomain("noise band needs a connected domain", regions=regions)
    (r,) = regions
    sl = slice(r.start, r.stop)
    n = r.stop - r.start
    L = _integration_matrix(n, wv.grid.dq, "trapezoid" if method == "trapezoid" else "simpson")
    w = np.abs(r.state.psi[sl]) ** 2 * wv.grid.dq
    M = np.diag(w) - np.outer(w, w)
    # b = L n_re / hbar and a = -L n_im / hbar
    Q = L.T @ M @ L / hbar**2
    mean = 0.0
    var = 0.0
    for se in (np.asarray(stderr_re, float).reshape(-1)[sl], np.asarray(stderr_im, float).reshape(-1)[sl]):
        QC = Q * se[None, :] ** 2
        mean += float(np.trace(QC))
        var += 2.0 * float(np.sum(QC * QC.T))
    return NoiseBand(mean, float(np.sqrt(var)))


def reconstruct_from_noisy(wv: WeakValueField, stderr_re, stderr_im, hbar=None,
                           truth: GridState | None = None, method="simpson"):
    """``reconstruct`` on estimated fields, plus a first-order fidelity band from the standard errors.

    Quadrature is the default here: the collocation solve inverts a central
    stencil whose response vanishes at the grid Nyquist frequency, so it
    amplifies white noise that the running integrals average out.
    """
    se_re = np.asarray(stderr_re, dtype=float)
    se_im = np.asarray(stderr_im, dtype=float)
    good = ~np.asarray(wv.node_mask).reshape(-1)
    if not (np.all(np.isfinite(se_re.reshape(-1)[good])) and np.all(np.isfinite(se_im.reshape(-1)[good]))):
        raise InvalidState("standard errors must be finite on the unmasked domain")
    res = reconstruct(wv, hbar, truth, method)
    band = noise_band(wv, se_re, se_im, hbar, method)
    return ReconstructionResult(res.state, res.norm_constant, res.fidelity, res.n_masked, res.regions, band)
