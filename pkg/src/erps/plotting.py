"""Static PNG figures for the CLI report path (non-interactive Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _figure(width=7.0, height=None, nrows=1):
    height = width * GOLDEN if height is None else height
    fig, axes = plt.subplots(nrows, 1, figsize=(width, height), sharex=True, squeeze=False)
    return fig, axes[:, 0]


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_state(state, path):
    """Density and phase of a 1D state, or the density of a 2D state."""
    if state.grid.dims == 2:
        fig, (ax,) = _figure(6.0, 5.0)
        (a1, a2) = state.grid.axes
        im = ax.pcolormesh(a1, a2, state.density.T, shading="auto")
        fig.colorbar(im, ax=ax, label=r"$\rho$")
        ax.set_xlabel("$q_1$")
        ax.set_ylabel("$q_2$")
        return _save(fig, path)
    fig, (top, bottom) = _figure(7.0, 6.0, nrows=2)
    q = state.grid.q
    top.plot(q, state.density, color="k")
    top.set_ylabel(r"$\rho(q)$")
    rho = state.density
    phase = np.where(rho > 1e-10 * rho.max(), np.angle(state.psi), np.nan)
    bottom.plot(q, phase, color="C0")
    bottom.set_ylabel(r"$\arg\psi$")
    bottom.set_xlabel("$q$")
    return _save(fig, path)


def plot_weak_values(wv, path, stderr_re=None, stderr_im=None):
    """Real and imaginary parts of the weak momentum value (first axis), with error bars if given."""
    fig, (top, bottom) = _figure(7.0, 6.0, nrows=2)
    q = wv.grid.q if wv.grid.dims == 1 else wv.grid.axes[0]
    re = wv.re[0] if wv.grid.dims == 1 else wv.re[0][:, wv.grid.n_points[1] // 2]
    im = wv.im[0] if wv.grid.dims == 1 else wv.im[0][:, wv.grid.n_points[1] // 2]
    if stderr_re is None:
        top.plot(q, re, color="C0")
        bottom.plot(q, im, color="C1")
    else:
        top.errorbar(q, re, yerr=stderr_re, fmt="o", ms=3, color="C0")
        bottom.errorbar(q, im, yerr=stderr_im, fmt="o", ms=3, color="C1")
    top.set_ylabel(r"Re $p^w$")
    bottom.set_ylabel(r"Im $p^w$")
    bottom.set_xlabel("$q$")
    return _save(fig, path)


def plot_samples(samples, path, max_points=20000):
    """Scatter of phase-space draws (first axis), thinned to ``max_points``."""
    fig, (ax,) = _figure()
    n = len(samples)
    step = max(1, n // max_points)
    q = samples.q.reshape(n, -1)[::step, 0]
    p = samples.p.reshape(n, -1)[::step, 0]
    ax.plot(q, p, ",", color="k", alpha=0.5)
    ax.set_xlabel("$q$")
    ax.set_ylabel("$p$")
    return _save(fig, path)


def plot_marginal(p_grid, density, path, reference=None):
    fig, (ax,) = _figure()
    ax.plot(p_grid, density, color="k", label="ERPS marginal")
    if reference is not None:
        ax.plot(p_grid, reference, "--", color="C3", label=r"$|\tilde\psi(p)|^2$")
        ax.legend(frameon=False)
    ax.set_xlabel("$p$")
    ax.set_ylabel("density")
    return _save(fig, path)


def plot_trajectories(trajectories, path):
    fig, (ax,) = _figure()
    for tr in trajectories:
        ax.plot(tr.times, tr.positions, lw=0.6, color="k")
    ax.set_xlabel("$t$")
    ax.set_ylabel("$q(t)$")
    return _save(fig, path)


def plot_reconstruction(estimate, path, truth=None):
    """Reconstructed density and phase, overlaid on the true state when available."""
    fig, (top, bottom) = _figure(7.0, 6.0, nrows=2)
    q = estimate.grid.q
    top.plot(q, estimate.density, color="C0", label="reconstructed")
    if truth is not None:
        top.plot(truth.grid.q, truth.density, "--", color="k", label="true")
        top.legend(frameon=False)
    top.set_ylabel(r"$\rho(q)$")
    rho = estimate.density
    phase = np.where(rho > 1e-10 * rho.max(), np.unwrap(np.angle(estimate.psi)), np.nan)
    bottom.plot(q, phase, color="C0")
    bottom.set_ylabel("phase")
    bottom.set_xlabel("$q$")
    return _save(fig, path)
