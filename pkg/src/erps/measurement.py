"""Simulated von Neumann weak measurement of momentum with position post-selection.

The system couples to a Gaussian pointer through ``exp(-(i/hbar) g p (x) p_y)``,
which shifts the pointer position by ``g p``. The joint state is built
exactly on a grid in two pointer representations: position ``y`` (giving
``<y>``, which tracks ``Re pw``) and momentum ``p_y`` (giving ``<p_y>``,
which tracks ``Im pw``). Shots are drawn from the exact joint densities
and binned on the system position.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptyBin, EmptyCalibration, InvalidGrid, InvalidState, StrongCouplingWarning
from .state import Grid, GridState, build_gaussian
from .weak import WeakValueField

CHUNK_SHOTS = 1 << 16
WEAK_RATIO = 0.1
_SUPPORT_TOL = 1e-16


@dataclass(frozen=True)
class PointerConfig:
    """Gaussian pointer of position spread ``sigma_ptr`` coupled with strength ``g``."""

    sigma_ptr: float
    g: float
    n_pointer_points: int = 256

    def __post_init__(self):
        if not self.sigma_ptr > 0:
            raise ValueError(f"sigma_ptr must be positive, got {self.sigma_ptr}")
        if not self.g >= 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if int(self.n_pointer_points) < 16:
            raise ValueError(f"n_pointer_points must be at least 16, got {self.n_pointer_points}")


@dataclass(frozen=True)
class WeakEstimate:
    """Weak-value estimate for one post-selection bin centred at ``q``."""

    q: float
    re_pw: float
    im_pw: float
    stderr_re: float
    stderr_im: float
    count: int


@dataclass(frozen=True)
class Binning:
    """Contiguous equal-width runs of grid points; ``labels[i]`` is the bin of grid point ``i`` or -1."""

    labels: np.ndarray
    centers: np.ndarray

    @classmethod
    def uniform(cls, grid: Grid, bins: int, q_range=None):
        if grid.dims != 1:
            raise InvalidGrid("post-selection binning is implemented for 1D systems")
        q = grid.q
        lo, hi = (q[0], q[-1]) if q_range is None else q_range
        idx = np.flatnonzero((q >= lo - 1e-12) & (q <= hi + 1e-12))
        bins = int(bins)
        if bins < 1 or idx.size < bins:
            raise ValueError(f"bins must be between 1 and {idx.size}, got {bins}")
        width = idx.size // bins
        first = idx[0] + (idx.size - bins * width) // 2
        labels = np.full(q.size, -1, dtype=np.int64)
        sel = np.arange(first, first + bins * width)
        labels[sel] = (sel - first) // width
        centers = q[sel].reshape(bins, width).mean(axis=1)
        return cls(labels, centers)

    @property
    def n_bins(self):
        return self.centers.size

    def bin_average(self, values, weights):
        """Weighted average of ``values`` over each bin."""
        ok = self.labels >= 0
        num = np.bincount(self.labels[ok], weights=(weights * values)[ok], minlength=self.n_bins)
        den = np.bincount(self.labels[ok], weights=weights[ok], minlength=self.n_bins)
        with np.errstate(invalid="ignore", divide="ignore"):
            return num / den


def _momentum_support(psi_k, p):
    w = np.abs(psi_k) ** 2
    return float(np.abs(p[w > _SUPPORT_TOL * w.max()]).max())


class JointState:
    """Exact post-coupling system-pointer state on a ``(q, y)`` and a ``(q, p_y)`` grid."""

    def __init__(self, state: GridState, cfg: PointerConfig):
        grid = state.grid
        if grid.dims != 1:
            raise InvalidGrid("weak-measurement simulation is implemented for 1D systems")
        hbar = state.hbar
        n = grid.n_points[0]
        k = 2 * np.pi * np.fft.fftfreq(n, d=grid.dq)
        p = hbar * k
        psi_k = np.fft.fft(state.psi)
        s, g, m = cfg.sigma_ptr, cfg.g, int(cfg.n_pointer_points)
        half = 8.0 * s + g * _momentum_support(psi_k, p)
        y = np.linspace(-half, half, m)
        if y[1] - y[0] > s / 3.0:
            raise InvalidGrid(
                f"n_pointer_points={m} cannot resolve sigma_ptr={s} over a pointer range of {2 * half:.3g}"
            )
        phi = lambda u: np.exp(-(u**2) / (4 * s**2))
        joint_y = np.fft.ifft(psi_k[:, None] * phi(y[None, :] - g * p[:, None]), axis=0)
        sp_ = hbar / (2 * s)
        py = np.linspace(-8.0 * sp_, 8.0 * sp_, m)
        shifted = np.fft.ifft(psi_k[:, None] * np.exp(-1j * np.outer(k, g * py)), axis=0)
        joint_p = np.exp(-(py**2) / (4 * sp_**2))[None, :] * shifted
        self.grid = grid
        self.hbar = hbar
        self.y = y
        self.py = py
        self.density_y = self._normalized(np.abs(joint_y) ** 2)
        self.density_p = self._normalized(np.abs(joint_p) ** 2)

    @staticmethod
    def _normalized(w):
        return w / w.sum()

    def position_probabilities(self):
        """Post-selection probability of each system grid point."""
        return self.density_y.sum(axis=1)

    def expected_moments(self, binning: Binning):
        """Exact per-bin ``<y>``, ``<p_y>`` and bin probability."""
        out = []
        for dens, axis_vals in ((self.density_y, self.y), (self.density_p, self.py)):
            w = dens.sum(axis=1)
            first = dens @ axis_vals
            with np.errstate(invalid="ignore", divide="ignore"):
                out.append(binning.bin_average(first / w, w))
        probs = np.bincount(binning.labels[binning.labels >= 0],
                            weights=self.position_probabilities()[binning.labels >= 0],
                            minlength=binning.n_bins)
        return out[0], out[1], probs


def _sample_chunk(cdf, n_ptr, labels, values, n_bins, seed, stream, chunk, count):
    rng = np.random.default_rng([seed, stream, chunk])
    flat = np.searchsorted(cdf, rng.random(count), side="right")
    flat = np.minimum(flat, cdf.size - 1)
    b = labels[flat // n_ptr]
    v = values[flat % n_ptr]
    ok = b >= 0
    b, v = b[ok], v[ok]
    return (np.bincount(b, minlength=n_bins).astype(float),
            np.bincount(b, weights=v, minlength=n_bins),
            np.bincount(b, weights=v * v, minlength=n_bins))


def _sample_stream(density, values, binning, shots, seed, stream, threads):
    cdf = np.cumsum(density.reshape(-1))
    cdf /= cdf[-1]
    sizes = [CHUNK_SHOTS] * (shots // CHUNK_SHOTS)
    if shots % CHUNK_SHOTS:
        sizes.append(shots % CHUNK_SHOTS)
    job = lambda a: _sample_chunk(cdf, values.size, binning.labels, values, binning.n_bins, seed, stream, *a)
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        parts = list(pool.map(job, enumerate(sizes)))
    # summing in chunk order keeps the result independent of the thread count
    n = np.zeros(binning.n_bins)
    s1 = np.zeros(binning.n_bins)
    s2 = np.zeros(binning.n_bins)
    for c, a, b in parts:
        n += c
        s1 += a
        s2 += b
    return n, s1, s2


def _mean_and_stderr(n, s1, s2):
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = s1 / n
        var = (s2 - n * mean**2) / (n - 1)
        se = np.where(n >= 2, np.sqrt(np.maximum(var, 0.0) / n), np.nan)
    return mean, se


def calibration_state(grid: Grid, hbar, p0=1.0):
    """Broad Gaussian with ``pw = p0 + i hbar (q - q_c) / (2 sigma^2)`` known exactly."""
    q = grid.q
    center = 0.5 * (q[0] + q[-1])
    sigma = (q[-1] - q[0]) / 16.0
    state = build_gaussian(grid, hbar, center, p0, sigma)
    pw = p0 + 1j * hbar * (q - center) / (2 * sigma**2)
    return state, pw, center, sigma


@lru_cache(maxsize=64)
def calibrate(cfg: PointerConfig, grid: Grid, hbar=1.0, p0=1.0, bins=33):
    """``(kappa_re, kappa_im)`` with ``<y> = kappa_re g Re pw`` and ``<p_y> = kappa_im g Im pw``.

    Obtained from the exact joint simulation of a calibration Gaussian, using
    noise-free pointer moments over bins within two widths of its centre.
    """
    if cfg.g == 0:
        raise EmptyCalibration("g = 0 leaves the pointer unshifted; the weak value is not measurable")
    if p0 == 0:
        raise EmptyCalibration("p0 = 0 carries no real-part signal to calibrate against")
    state, pw, center, sigma = calibration_state(grid, hbar, p0)
    joint = JointState(state, cfg)
    binning = Binning.uniform(grid, bins, (center - 2 * sigma, center + 2 * sigma))
    my, mp, probs = joint.expected_moments(binning)
    rho = state.density
    re = binning.bin_average(pw.real, rho)
    im = binning.bin_average(pw.imag, rho)
    kappa_re = float(np.sum(probs * my * re) / (cfg.g * np.sum(probs * re * re)))
    kappa_im = float(np.sum(probs * mp * im) / (cfg.g * np.sum(probs * im * im)))
    return kappa_re, kappa_im


def _system_momentum_spread(state):
    psi_k = np.fft.fft(state.psi)
    p = state.hbar * 2 * np.pi * np.fft.fftfreq(state.grid.n_points[0], d=state.grid.dq)
    w = np.abs(psi_k) ** 2
    w = w / w.sum()
    mean = np.sum(w * p)
    return float(np.sqrt(max(np.sum(w * p * p) - mean**2, 0.0)))


def _check_weak_regime(state, cfg):
    spread = cfg.g * _system_momentum_spread(state)
    if spread > WEAK_RATIO * cfg.sigma_ptr:
        warnings.warn(
            f"g * sigma_p = {spread:.3g} is not small against sigma_ptr = {cfg.sigma_ptr}",
            StrongCouplingWarning, stacklevel=3,
        )


def expected_estimates(state: GridState, cfg: PointerConfig, bins, q_range=None, calibration=None):
    """Infinite-shot estimates: exact pointer moments inverted with the calibration constants."""
    kre, kim = calibrate(cfg, state.grid, state.hbar) if calibration is None else calibration
    binning = Binning.uniform(state.grid, bins, q_range)
    my, mp, _ = JointState(state, cfg).expected_moments(binning)
    return binning.centers, my / (kre * cfg.g), mp / (kim * cfg.g)


def exact_bin_weak_values(state: GridState, bins, q_range=None, pw=None):
    """``rho``-weighted bin averages of the exact weak value, the ``g -> 0`` target of the estimates."""
    from .weak import weak_momentum_value

    binning = Binning.uniform(state.grid, bins, q_range)
    pw = weak_momentum_value(state).pw[0] if pw is None else pw
    rho = state.density
    good = np.isfinite(pw)
    safe = np.where(good, pw, 0.0)
    w = np.where(good, rho, 0.0)
    return binning.centers, binning.bin_average(safe.real, w), binning.bin_average(safe.imag, w)


def simulate_weak_measurement(state: GridState, cfg: PointerConfig, bins, shots, seed, threads=1,
                              q_range=None, calibration=None):
    """Per-bin weak-value estimates from ``shots`` simulated repetitions.

    Half of the shots read the pointer position and half its momentum.
    Deterministic given ``seed``; ``threads`` only changes the wall time.
    """
    if int(shots) < 2:
        raise ValueError(f"shots must be at least 2, got {shots}")
    kre, kim = calibrate(cfg, state.grid, state.hbar) if calibration is None else calibration
    _check_weak_regime(state, cfg)
    binning = Binning.uniform(state.grid, bins, q_range)
    joint = JointState(state, cfg)
    shots = int(shots)
    n_y, sy1, sy2 = _sample_stream(joint.density_y, joint.y, binning, shots // 2, seed, 0, threads)
    n_p, sp1, sp2 = _sample_stream(joint.density_p, joint.py, binning, shots - shots // 2, seed, 1, threads)
    empty = np.flatnonzero((n_y == 0) | (n_p == 0))
    if empty.size:
        raise EmptyBin(f"no post-selected shots in bin(s) centred at {binning.centers[empty].round(6).tolist()}")
    my, sey = _mean_and_stderr(n_y, sy1, sy2)
    mp, sep = _mean_and_stderr(n_p, sp1, sp2)
    sre, sim = kre * cfg.g, kim * cfg.g
    return [
        WeakEstimate(float(binning.centers[b]), float(my[b] / sre), float(mp[b] / sim),
                     float(sey[b] / abs(sre)), float(sep[b] / abs(sim)), int(n_y[b] + n_p[b]))
        for b in range(binning.n_bins)
    ]


def estimates_to_field(estimates, hbar=1.0):
    """Weak-value field on the uniform grid of bin centres, with its standard errors."""
    if not estimates:
        raise InvalidState("no estimates")
    q = np.array([e.q for e in estimates])
    spacing = np.diff(q)
    if q.size > 1 and not np.allclose(spacing, spacing[0], rtol=1e-9, atol=1e-12):
        raise InvalidGrid("bin centres are not uniformly spaced")
    grid = Grid.line(q[0], q[-1], q.size)
    pw = np.array([[e.re_pw + 1j * e.im_pw for e in estimates]])
    mask = ~np.isfinite(pw[0])
    se_re = np.array([e.stderr_re for e in estimates])
    se_im = np.array([e.stderr_im for e in estimates])
    return WeakValueField(grid, hbar, pw, mask), se_re, se_im
