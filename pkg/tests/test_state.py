import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from erps.errors import AllNodes, BadWeights, GridMismatch, InvalidGrid, InvalidState, TailClipped
from erps.errors import NormalizationWarning
from erps.observables import momentum_matrices
from erps.state import (
    Grid,
    GridState,
    build_gaussian,
    eigen_superposition,
    harmonic_eigenstate,
    mix,
    plane_wave,
    polar_decompose,
    shift_phase_space,
    superpose,
    tensor_product,
    two_gaussian,
    unmasked_runs,
)


def _aligned_deviation(a, b):
    """Max pointwise gap after removing the best global phase."""
    phase = np.vdot(a, b)
    phase /= abs(phase)
    return np.abs(a * phase - b).max()


# --- Grid -----------------------------------------------------------------

def test_grid_spacing_and_axes():
    g = Grid.line(-1.0, 1.0, 9)
    assert g.dq == pytest.approx(0.25)
    assert g.q[0] == -1.0 and g.q[-1] == 1.0
    sq = Grid.square(-2, 2, 17)
    assert sq.shape == (17, 17)
    assert sq.cell_volume == pytest.approx(0.0625)


@pytest.mark.parametrize("args", [(1.0, 1.0, 16), (1.0, -1.0, 16), (0.0, 1.0, 7), (0.0, np.inf, 16)])
def test_grid_rejects_invalid(args):
    with pytest.raises(InvalidGrid):
        Grid.line(*args)


def test_grid_rejects_three_dims():
    with pytest.raises(InvalidGrid):
        Grid((0, 0, 0), (1, 1, 1), (8, 8, 8))


# --- GridState --------------------------------------------------------------

def test_state_validation(small_grid):
    with pytest.raises(InvalidState):
        GridState(small_grid, 1.0, np.ones(small_grid.shape))
    with pytest.raises(InvalidState):
        GridState.from_unnormalized(small_grid, 1.0, np.zeros(small_grid.shape))
    with pytest.raises(InvalidState):
        GridState.from_unnormalized(small_grid, -1.0, np.ones(small_grid.shape))
    bad = np.ones(small_grid.shape, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(InvalidState):
        GridState.from_unnormalized(small_grid, 1.0, bad)


def test_state_arrays_are_immutable(small_grid):
    s = build_gaussian(small_grid, 1.0, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        s.psi[0] = 1.0


# --- build_gaussian -------------------------------------------------------

def test_gaussian_peak_density(line_grid):
    s = build_gaussian(line_grid, 1.0, 0.0, 0.0, 1.0)
    # the analytic peak, read at the grid point nearest q = 0
    i = np.argmin(np.abs(line_grid.q))
    assert s.density[i] == pytest.approx(oracles.gaussian_density(line_grid.q[i]), rel=1e-9)
    assert s.density.max() == pytest.approx((2 * np.pi) ** -0.5, rel=1e-4)


def test_gaussian_real_has_zero_phase(line_grid):
    polar = polar_decompose(build_gaussian(line_grid, 1.0, 0.0, 0.0, 1.0))
    assert np.abs(polar.S[~polar.node_mask]).max() < 1e-12


def test_gaussian_moments_by_operator_quadrature(line_grid):
    s = build_gaussian(line_grid, 1.0, 1.0, 2.0, 0.5)
    assert s.position_moment(1) == pytest.approx(1.0, abs=1e-10)
    psi = lambda q: oracles.gaussian_psi(q, 1.0, 2.0, 0.5)
    # <p> on the grid through the momentum operator matrix
    P = momentum_matrices(line_grid, 1.0)[0]
    p_grid = float(np.real(np.vdot(s.psi, P @ s.psi)) * line_grid.dq)
    one = lambda q: np.ones_like(q)
    zero = lambda q: np.zeros_like(q)
    p_oracle = oracles.quadratic_expectation(
        psi, lambda q: (-(q - 1.0) / (2 * 0.25) + 2.0j) * psi(q), zero, one, zero)
    assert p_oracle == pytest.approx(2.0, abs=1e-10)
    assert p_grid == pytest.approx(p_oracle, abs=1e-10)


def test_gaussian_tail_clipping():
    with pytest.raises(TailClipped):
        build_gaussian(Grid.line(-3, 3, 256), 1.0, 0.0, 0.0, 1.0)
    with pytest.raises(InvalidState):
        build_gaussian(Grid.line(-3, 3, 256), 1.0, 0.0, 0.0, -1.0)


# --- polar_decompose --------------------------------------------------------

def test_plane_wave_phase_is_linear(small_grid):
    s = plane_wave(small_grid, 1.0, 1.3)
    polar = polar_decompose(s)
    q = small_grid.q
    assert np.abs(polar.S - 1.3 * (q - q[0])).max() < 1e-10


def test_moving_gaussian_phase_and_density(line_grid):
    s = build_gaussian(line_grid, 1.0, 0.0, 0.7, 1.0)
    polar = polar_decompose(s)
    q = line_grid.q
    good = ~polar.node_mask
    assert np.abs(polar.S - 0.7 * (q - q[good][0]))[good].max() < 1e-9
    assert np.abs(polar.rho - oracles.gaussian_density(q)).max() < 1e-10


def test_first_excited_state_has_node_at_origin():
    grid = Grid.line(-10, 10, 1025)
    polar = polar_decompose(harmonic_eigenstate(grid, 1.0, 1))
    i0 = np.argmin(np.abs(grid.q))
    assert grid.q[i0] == 0.0
    assert polar.node_mask[i0]
    assert len(polar.regions) >= 2


def test_eigenstates_match_hermite_oracle(line_grid):
    for n in range(6):
        s = harmonic_eigenstate(line_grid, 1.0, n)
        ref = oracles.ho_eigenfunction(n, line_grid.q)
        assert np.abs(s.psi - ref).max() < 1e-9


def test_all_nodes_raises(small_grid):
    s = GridState.from_unnormalized(small_grid, 1.0, np.ones(small_grid.shape))
    with pytest.raises(AllNodes):
        polar_decompose(s, node_threshold=1e9)


@settings(max_examples=25, deadline=None)
@given(coeffs=st.lists(st.complex_numbers(max_magnitude=1.0), min_size=3, max_size=3).filter(
    lambda c: max(abs((a * b.conjugate()).imag) for a, b in [(c[0], c[1]), (c[1], c[2]), (c[0], c[2])]) > 0.05))
def test_polar_reassembly_and_unwrap_jumps(coeffs):
    # non-collinear coefficients keep real and imaginary zeros apart, so psi has no node
    grid = Grid.line(-10, 10, 1024)
    s = eigen_superposition(grid, 1.0, coeffs, warn=False)
    polar = polar_decompose(s)
    good = ~polar.node_mask
    back = polar.reassemble()
    assert _aligned_deviation(back[good], s.psi[good]) < 1e-9
    for start, stop in polar.regions:
        jumps = np.abs(np.diff(polar.S[start:stop]))
        assert jumps.max(initial=0.0) < np.pi * s.hbar


def test_polar_density_normalized(line_grid):
    polar = polar_decompose(build_gaussian(line_grid, 1.0, 0.5, 0.0, 1.0))
    assert np.all(polar.rho >= 0)
    assert np.sum(polar.rho) * line_grid.dq == pytest.approx(1.0, abs=1e-9)


def test_unmasked_runs():
    mask = np.array([True, False, False, True, False, True, True, False])
    assert unmasked_runs(mask) == [(1, 3), (4, 5), (7, 8)]


# --- shift_phase_space -------------------------------------------------------

def test_shift_identity(line_grid):
    s = build_gaussian(line_grid, 1.0, 0.0, 0.0, 1.0)
    assert shift_phase_space(s, 0.0, 0.0).fidelity(s) == pytest.approx(1.0, abs=1e-12)


def test_shift_gaussian_to_target(line_grid):
    s = build_gaussian(line_grid, 1.0, 0.0, 0.0, 1.0)
    target = build_gaussian(line_grid, 1.0, 2.0, 3.0, 1.0)
    assert abs(abs(shift_phase_space(s, 2.0, 3.0).overlap(target)) - 1.0) < 1e-9


@settings(max_examples=20, deadline=None)
@given(q0=st.floats(-2, 2), p0=st.floats(-3, 3))
def test_shift_round_trip(q0, p0):
    grid = Grid.line(-12, 12, 1024)
    s = eigen_superposition(grid, 1.0, [1.0, 0.4j, 0.3], warn=False)
    back = shift_phase_space(shift_phase_space(s, q0, p0), -q0, -p0)
    assert back.norm() == pytest.approx(1.0, abs=1e-9)
    assert abs(abs(back.overlap(s)) - 1.0) < 1e-9


def test_shift_convention_moves_momentum_up(line_grid):
    s = shift_phase_space(build_gaussian(line_grid, 1.0, 0.0, 0.0, 1.0), 1.0, 0.5)
    polar = polar_decompose(s)
    dS = np.gradient(polar.S, line_grid.dq)
    centre = np.abs(line_grid.q - 1.0) < 2.0
    assert np.allclose(dS[centre], 0.5, atol=1e-6)
    assert s.position_moment(1) == pytest.approx(1.0, abs=1e-9)


# --- tensor_product ----------------------------------------------------------

def test_tensor_product_structure():
    g = Grid.line(-8, 8, 128)
    a = build_gaussian(g, 1.0, 0.5, 0.3, 1.0)
    b = build_gaussian(g, 1.0, -0.4, -0.8, 0.9)
    ab = tensor_product(a, b)
    assert ab.norm() == pytest.approx(1.0, abs=1e-12)
    assert np.abs(ab.density - np.outer(a.density, b.density)).max() < 1e-12
    marginal = ab.density.sum(axis=1) * g.dq
    assert np.abs(marginal - a.density).max() < 1e-9

    pa, pb, pab = polar_decompose(a), polar_decompose(b), polar_decompose(ab)
    good = ~pab.node_mask
    resid = (pab.S - pa.S[:, None] - pb.S[None, :])[good]
    assert np.ptp(resid) < 1e-9


def test_tensor_product_hbar_mismatch():
    g = Grid.line(-8, 8, 64)
    a = build_gaussian(g, 1.0, 0.0, 0.0, 1.0)
    b = build_gaussian(g, 0.5, 0.0, 0.0, 1.0)
    with pytest.raises(GridMismatch):
        tensor_product(a, b)


# --- superpose / mix -------------------------------------------------------

def test_superpose_warns_and_normalizes(line_grid):
    a = harmonic_eigenstate(line_grid, 1.0, 0)
    b = harmonic_eigenstate(line_grid, 1.0, 1)
    with pytest.warns(NormalizationWarning):
        s = superpose([a, b], [1.0, 1.0])
    assert s.norm() == pytest.approx(1.0, abs=1e-12)


def test_two_gaussian_is_symmetric(line_grid):
    s = two_gaussian(line_grid, 1.0, 3.0, 0.7)
    assert np.abs(s.density - s.density[::-1]).max() < 1e-14
    assert s.position_moment(1) == pytest.approx(0.0, abs=1e-12)


def test_mix_validation(line_grid):
    a = build_gaussian(line_grid, 1.0, -2.0, 0.0, 1.0)
    with pytest.raises(BadWeights):
        mix([(0.6, a), (0.6, a)])
    with pytest.raises(BadWeights):
        mix([(-0.1, a), (1.1, a)])
    with pytest.raises(BadWeights):
        mix([])
    other = build_gaussian(Grid.line(-10, 10, 512), 1.0, 0.0, 0.0, 1.0)
    with pytest.raises(GridMismatch):
        mix([(0.5, a), (0.5, other)])


def test_mixture_position_moments(line_grid):
    a, sigma = 2.5, 0.8
    m = mix([(0.5, build_gaussian(line_grid, 1.0, -a, 0.0, sigma)),
             (0.5, build_gaussian(line_grid, 1.0, a, 0.0, sigma))])
    q = line_grid.q
    assert m.average(lambda s: s.position_moment(1)) == pytest.approx(0.0, abs=1e-12)
    # convex combination of per-component oracle moments
    oracle = 0.5 * sum(oracles.fine_quadrature(lambda x, c=c: x**2 * oracles.gaussian_density(x, c, sigma))
                       for c in (-a, a))
    assert oracle == pytest.approx(a**2 + sigma**2, rel=1e-12)
    assert m.average(lambda s: s.position_moment(2)) == pytest.approx(oracle, rel=1e-9)
    assert np.sum(m.density) * line_grid.dq == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.isfinite(m.density)) and q.size == m.density.size


def test_single_component_mixture_matches_pure(line_grid):
    s = build_gaussian(line_grid, 1.0, 0.3, 0.0, 1.0)
    m = mix([(1.0, s)])
    assert m.average(lambda x: x.position_moment(2)) == s.position_moment(2)
    assert np.array_equal(m.density, s.density)
