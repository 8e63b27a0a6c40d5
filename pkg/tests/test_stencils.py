import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erps.stencils import derivative_matrix, differentiate, fd_weights, log_derivative


def test_central_weights_match_textbook():
    assert np.allclose(fd_weights([-1, 0, 1]), [-0.5, 0.0, 0.5])
    assert np.allclose(fd_weights([-2, -1, 0, 1, 2]), [1 / 12, -2 / 3, 0.0, 2 / 3, -1 / 12])


@pytest.mark.parametrize("order", [2, 4, 8])
def test_exact_on_polynomials_up_to_order(order):
    n, h = 40, 0.1
    q = np.arange(n) * h - 1.7
    D = derivative_matrix(n, h, order)
    for k in range(order + 1):
        assert np.allclose(D @ q**k, k * q ** max(k - 1, 0) * (k > 0), atol=1e-8 * max(1, k * 2.0**k))


def test_convergence_order_on_smooth_function():
    errs = []
    for n in (101, 201):
        q = np.linspace(-1, 1, n)
        errs.append(np.abs(differentiate(np.sin(3 * q), q[1] - q[0], order=2) - 3 * np.cos(3 * q))[5:-5].max())
    assert errs[0] / errs[1] > 3.5


def test_rejects_bad_order_and_short_grid():
    with pytest.raises(ValueError):
        derivative_matrix(20, 0.1, order=3)
    with pytest.raises(ValueError):
        derivative_matrix(5, 0.1, order=8)


def test_matrix_is_cached_and_read_only_shape():
    a = derivative_matrix(64, 0.25)
    b = derivative_matrix(64, 0.25)
    assert a is b
    assert a.shape == (64, 64)


@settings(max_examples=30, deadline=None)
@given(k=st.floats(-3, 3), c=st.complex_numbers(min_magnitude=0.5, max_magnitude=2.0))
def test_log_derivative_of_exponential(k, c):
    q = np.linspace(-2, 2, 129)
    psi = c * np.exp(1j * k * q)
    out = log_derivative(psi, (q[1] - q[0],))
    assert np.allclose(out[0], 1j * k, atol=1e-5)


def test_differentiate_along_second_axis():
    x = np.linspace(0, 1, 33)
    y = np.linspace(0, 2, 65)
    X, Y = np.meshgrid(x, y, indexing="ij")
    f = X * Y**2
    assert np.allclose(differentiate(f, y[1] - y[0], axis=1), 2 * X * Y, atol=1e-10)
