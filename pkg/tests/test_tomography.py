import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erps.errors import AllNodes, DisconnectedDomain, InvalidState
from erps.state import (
    Grid,
    GridState,
    build_gaussian,
    eigen_superposition,
    harmonic_eigenstate,
)
from erps.tomography import (
    fidelity_against,
    noise_band,
    reconstruct,
    reconstruct_from_noisy,
    resample,
)
from erps.weak import WeakValueField, weak_momentum_value

METHODS = ("collocation", "simpson", "trapezoid")


def _field(grid, pw, mask=None, hbar=1.0):
    pw = np.asarray(pw, dtype=complex).reshape(1, -1)
    mask = np.zeros(grid.shape, bool) if mask is None else mask
    return WeakValueField(grid, hbar, pw, mask)


@pytest.mark.parametrize("method", METHODS)
def test_gaussian_round_trip(line_grid, method):
    truth = build_gaussian(line_grid, 1.0, 0.4, -0.9, 1.1)
    res = reconstruct(weak_momentum_value(truth), truth=truth, method=method)
    assert res.fidelity >= 1 - 1e-10
    assert res.state.norm() == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= res.fidelity <= 1.0


@pytest.mark.parametrize("method", METHODS)
def test_constant_field_gives_flat_density(method):
    grid = Grid.line(0.0, 5.0, 257)
    res = reconstruct(_field(grid, np.full(grid.shape, 0.7)), method=method)
    rho = res.state.density
    assert np.ptp(rho) < 1e-12 * rho.max()
    phase = np.unwrap(np.angle(res.state.psi))
    assert np.allclose(phase - phase[0], 0.7 * (grid.q - grid.q[0]), atol=1e-10)
    assert res.n_masked == 0


def test_random_superpositions_round_trip(line_grid):
    rng = np.random.default_rng(404)
    for _ in range(8):
        coeffs = rng.normal(size=3) + 1j * rng.normal(size=3)
        truth = eigen_superposition(line_grid, 1.0, coeffs, warn=False)
        res = reconstruct(weak_momentum_value(truth), truth=truth)
        assert res.fidelity >= 1 - 1e-8


@settings(max_examples=15, deadline=None)
@given(theta=st.floats(0, 2 * np.pi), k=st.integers(0, 300))
def test_gauge_invariance(theta, k):
    grid = Grid.line(-10, 10, 2048)
    truth = eigen_superposition(grid, 1.0, [1.0, 0.5j, 0.2 + 0.1j], warn=False)
    rotated = GridState(grid, 1.0, np.exp(1j * theta) * truth.psi)
    wv = weak_momentum_value(rotated)
    base = reconstruct(weak_momentum_value(truth), truth=truth).fidelity
    assert reconstruct(wv, truth=truth).fidelity == pytest.approx(base, abs=1e-12)
    # moving the reference point inwards over empty tail cells changes nothing measurable
    mask = np.array(wv.node_mask)
    first = int(np.argmin(mask))
    mask[: first + k] = True
    pw = np.array(wv.pw)
    pw[:, mask] = np.nan
    moved = reconstruct(WeakValueField(grid, 1.0, pw, mask), truth=truth)
    lost = truth.density[: first + k].sum() * grid.dq
    assert moved.fidelity == pytest.approx(1.0 - lost, abs=1e-8)


def test_nodes_split_domain():
    grid = Grid.line(-10, 10, 1025)
    wv = weak_momentum_value(harmonic_eigenstate(grid, 1.0, 1))
    with pytest.raises(DisconnectedDomain) as info:
        reconstruct(wv)
    regions = info.value.regions
    assert len(regions) == 2
    for r in regions:
        assert r.state.norm() == pytest.approx(1.0, abs=1e-12)
        assert r.norm_constant > 0
    # each region alone reproduces the matching half of |psi_1|
    truth = harmonic_eigenstate(grid, 1.0, 1)
    left = regions[0].state
    half = np.where(grid.q < 0, truth.psi, 0.0)
    ov = abs(np.vdot(left.psi, half) * grid.dq) ** 2 / (np.sum(np.abs(half) ** 2) * grid.dq)
    assert ov == pytest.approx(1.0, abs=1e-8)


def test_all_masked_raises(small_grid):
    mask = np.ones(small_grid.shape, bool)
    with pytest.raises(AllNodes):
        reconstruct(_field(small_grid, np.full(small_grid.shape, np.nan), mask))


def test_unknown_method(small_grid):
    with pytest.raises(ValueError):
        reconstruct(_field(small_grid, np.ones(small_grid.shape)), method="euler")


def test_report_fields(line_grid):
    truth = build_gaussian(line_grid, 1.0, 0.0, 0.0, 1.0)
    rep = reconstruct(weak_momentum_value(truth), truth=truth).report()
    assert set(rep) == {"fidelity", "n_masked", "regions", "noise_band"}
    assert rep["noise_band"] is None
    assert len(rep["regions"]) == 1


# --- resampling and fidelity ------------------------------------------------------

def test_fidelity_across_grids():
    fine = Grid.line(-8, 8, 2049)
    coarse = Grid.line(-7, 7, 161)
    truth = build_gaussian(fine, 1.0, 0.3, 0.8, 0.8)
    est = build_gaussian(coarse, 1.0, 0.3, 0.8, 0.8)
    assert fidelity_against(est, truth) == pytest.approx(1.0, abs=1e-6)
    psi = resample(est, fine)
    assert np.all(psi[np.abs(fine.q) > 7.0 + 1e-9] == 0)


def test_resample_needs_nodeless_state():
    grid = Grid.line(-2, 2, 65)
    psi = np.where(np.arange(65) == 10, 0.0, 1.0)
    with pytest.raises(InvalidState):
        resample(GridState.from_unnormalized(grid, 1.0, psi), Grid.line(-2, 2, 33))


# --- noisy inputs --------------------------------------------------------------------

@pytest.fixture(scope="module")
def gaussian_1024():
    grid = Grid.line(-8, 8, 1024)
    truth = build_gaussian(grid, 1.0, 0.0, 0.5, 1.0)
    return truth, weak_momentum_value(truth)


def _noisy(wv, rel, rng):
    scale = rel * np.abs(wv.pw[0])
    noise = scale * (rng.normal(size=scale.size) + 1j * rng.normal(size=scale.size))
    return WeakValueField(wv.grid, wv.hbar, wv.pw + noise, wv.node_mask), scale


def test_zero_noise_matches_exact(gaussian_1024):
    truth, wv = gaussian_1024
    zero = np.zeros(truth.grid.shape)
    for method in METHODS:
        a = reconstruct(wv, truth=truth, method=method)
        b = reconstruct_from_noisy(wv, zero, zero, truth=truth, method=method)
        assert np.array_equal(a.state.psi, b.state.psi)
        assert b.noise_band.mean_infidelity == 0.0 and b.noise_band.std_infidelity == 0.0


def test_relative_noise_keeps_high_fidelity(gaussian_1024):
    truth, wv = gaussian_1024
    rng = np.random.default_rng(1)
    fids = []
    for _ in range(100):
        noisy, scale = _noisy(wv, 1e-3, rng)
        fids.append(reconstruct_from_noisy(noisy, scale, scale, truth=truth).fidelity)
    assert min(fids) >= 0.99


def test_noise_band_matches_monte_carlo(gaussian_1024):
    truth, wv = gaussian_1024
    rng = np.random.default_rng(2)
    rel = 1e-2
    band = noise_band(wv, rel * np.abs(wv.pw[0]), rel * np.abs(wv.pw[0]))
    inf = []
    for _ in range(200):
        noisy, _ = _noisy(wv, rel, rng)
        inf.append(1.0 - reconstruct(noisy, truth=truth, method="simpson").fidelity)
    inf = np.array(inf)
    assert inf.mean() == pytest.approx(band.mean_infidelity, rel=0.15)
    assert inf.std() == pytest.approx(band.std_infidelity, rel=0.3)
    lo, hi = band.fidelity_interval
    assert 0.0 <= lo <= hi <= 1.0
    assert np.mean((1 - inf >= lo) & (1 - inf <= hi)) > 0.9


def test_infidelity_scales_quadratically_with_noise(gaussian_1024):
    truth, wv = gaussian_1024
    levels = np.array([1e-3, 3e-3, 1e-2])
    means = []
    for i, rel in enumerate(levels):
        rng = np.random.default_rng(100 + i)
        inf = [1.0 - reconstruct(_noisy(wv, rel, rng)[0], truth=truth, method="simpson").fidelity
               for _ in range(60)]
        means.append(np.mean(inf))
    slope = np.polyfit(np.log(levels), np.log(means), 1)[0]
    assert abs(slope - 2.0) <= 0.3


def test_noisy_rejects_non_finite_errors(gaussian_1024):
    truth, wv = gaussian_1024
    se = np.ones(truth.grid.shape)
    se[500] = np.nan
    with pytest.raises(InvalidState):
        reconstruct_from_noisy(wv, se, np.ones(truth.grid.shape))
