import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridbase import numkit


def test_least_squares_exact_square_system():
    rng = np.random.default_rng(0)
    G = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    x_true = rng.standard_normal(4)
    sol = numkit.least_squares_apply(G, G @ x_true)
    assert sol.rank_ok
    np.testing.assert_allclose(sol.solution, x_true, rtol=1e-12)


def test_least_squares_overdetermined_normal_residual():
    rng = np.random.default_rng(1)
    G = rng.standard_normal((10, 3))
    d = rng.standard_normal(10)
    sol = numkit.least_squares_apply(G, d)
    # the normal equations hold at the least-squares minimizer
    assert sol.normal_residual <= 1e-10 * max(1.0, np.linalg.norm(G.T @ d))


def test_least_squares_matrix_rhs_matches_columnwise():
    rng = np.random.default_rng(2)
    G = rng.standard_normal((8, 4))
    D = rng.standard_normal((8, 3))
    sol = numkit.least_squares_apply(G, D)
    for j in range(3):
        col = numkit.least_squares_apply(G, D[:, j]).solution
        np.testing.assert_allclose(sol.solution[:, j], col, rtol=1e-13)


def test_least_squares_detects_rank_deficiency():
    G = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    sol = numkit.least_squares_apply(G, np.array([1.0, 2.0, 3.0]))
    assert not sol.rank_ok


def test_least_squares_rejects_wide_matrix():
    with pytest.raises(ValueError):
        numkit.least_squares_apply(np.ones((2, 3)), np.ones(2))


def test_least_squares_rejects_mismatched_rhs():
    with pytest.raises(ValueError):
        numkit.least_squares_apply(np.ones((3, 2)), np.ones(4))


def test_check_matrix_rejects_nonfinite():
    with pytest.raises(ValueError):
        numkit.check_matrix(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_spectral_norm_diagonal():
    assert numkit.spectral_norm(np.diag([3.0, -7.0, 2.0])) == 7.0


def test_spectral_norm_rejects_asymmetric():
    with pytest.raises(ValueError):
        numkit.spectral_norm(np.array([[0.0, 1.0], [0.0, 0.0]]))


@given(st.lists(st.floats(-50.0, 50.0), min_size=1, max_size=6))
@settings(max_examples=50, deadline=None)
def test_default_fd_steps_positive_and_scaled(vals):
    x = np.array(vals)
    h = numkit.default_fd_steps(x)
    assert np.all(h > 0)
    np.testing.assert_allclose(h, 1e-4 * np.maximum(1.0, np.abs(x)))


def test_fd_gradient_exact_on_quadratic():
    A = np.array([[2.0, 0.5], [0.5, 3.0]])
    b = np.array([1.0, -2.0])

    def f(x):
        return 0.5 * x @ A @ x + b @ x

    x0 = np.array([0.3, -0.7])
    g = numkit.fd_gradient(f, x0)
    np.testing.assert_allclose(g, A @ x0 + b, rtol=0, atol=1e-8)


def test_fd_hessian_exact_on_quadratic():
    A = np.array([[2.0, 0.5, -1.0], [0.5, 3.0, 0.2], [-1.0, 0.2, 1.5]])

    def f(x):
        return 0.5 * x @ A @ x

    H = numkit.fd_hessian(f, np.zeros(3))
    np.testing.assert_allclose(H, A, rtol=0, atol=1e-6)
    np.testing.assert_array_equal(H, H.T)


def test_fd_gradient_names_bad_coordinate():
    def f(x):
        return float("nan") if x[1] != 0 else 0.0

    with pytest.raises(ValueError, match="coordinate 1"):
        numkit.fd_gradient(f, np.zeros(3))


def test_fd_hessian_cubic_truncation_small():
    def f(x):
        return x[0] ** 3

    H = numkit.fd_hessian(f, np.array([2.0]))
    assert abs(H[0, 0] - 12.0) < 1e-5 * 12.0
