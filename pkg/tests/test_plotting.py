import numpy as np
import pytest

from erps import plotting
from erps.dynamics import Hamiltonian, wiseman_trajectories
from erps.phase_space import marginal_momentum, sample_erps
from erps.state import Grid, build_correlated_gaussian, build_gaussian
from erps.weak import weak_momentum_value
from erps.xi import XiDistribution

PNG = b"\x89PNG"


@pytest.fixture(scope="module")
def state():
    return build_gaussian(Grid.line(-8, 8, 256), 1.0, 0.0, 0.5, 1.0)


def _check(path):
    data = path.read_bytes()
    assert data.startswith(PNG) and len(data) > 1000


def test_every_figure_writes_a_png(tmp_path, state):
    chi = XiDistribution.two_point(1.0)
    wv = weak_momentum_value(state)
    p = np.linspace(-4, 4, 201)
    trs = wiseman_trajectories([-1.0, 0.0, 1.0], state, Hamiltonian.free(state.grid), 0.01, 20)
    n = state.grid.n_points[0]
    calls = {
        "state": lambda f: plotting.plot_state(state, f),
        "state2d": lambda f: plotting.plot_state(
            build_correlated_gaussian(Grid.square(-8, 8, 32), 1.0, (0, 0), [[1, 0.4], [0.4, 1]]), f),
        "wv": lambda f: plotting.plot_weak_values(wv, f),
        "wv_err": lambda f: plotting.plot_weak_values(wv, f, np.full(n, 0.1), np.full(n, 0.1)),
        "samples": lambda f: plotting.plot_samples(sample_erps(state, chi, 500, seed=1), f),
        "marginal": lambda f: plotting.plot_marginal(p, marginal_momentum(state, chi, p), f),
        "trajectories": lambda f: plotting.plot_trajectories(trs, f),
        "reconstruction": lambda f: plotting.plot_reconstruction(state, f, truth=state),
    }
    for name, call in calls.items():
        path = tmp_path / f"{name}.png"
        call(path)
        _check(path)
