from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from tapopf.fd_oracle import NonFiniteValueError, compare, fd_hessian_contract, fd_jacobian


def test_jacobian_of_linear_map(rng):
    A = rng.standard_normal((4, 3))
    x0 = rng.standard_normal(3)
    np.testing.assert_allclose(fd_jacobian(lambda x: A @ x, x0), A, atol=1e-9)


def test_derivative_of_square():
    J = fd_jacobian(lambda x: x**2, np.array([3.0]))
    assert J.shape == (1, 1)
    assert J[0, 0] == pytest.approx(6.0, rel=1e-9)


def test_trigonometric_jacobian():
    x0 = np.array([0.3, -1.2])
    J = fd_jacobian(lambda x: np.array([np.sin(x[0]) * np.cos(x[1]), x[0] * x[1]]), x0)
    expected = np.array(
        [
            [np.cos(0.3) * np.cos(-1.2), -np.sin(0.3) * np.sin(-1.2)],
            [-1.2, 0.3],
        ]
    )
    np.testing.assert_allclose(J, expected, rtol=1e-8)


def test_contracted_hessian_of_quadratic(rng):
    Q = rng.standard_normal((3, 3))
    Q = Q + Q.T
    lam = rng.standard_normal(2)
    B = rng.standard_normal((2, 3))

    def gradient(x):
        # d/dx of lam . [x'Qx/2, Bx]
        return lam[0] * (Q @ x) + lam[1] * B[1]

    H = fd_hessian_contract(gradient, rng.standard_normal(3))
    np.testing.assert_allclose(H, lam[0] * Q, rtol=1e-7, atol=1e-9)


def test_zero_multiplier_gives_zero_hessian():
    H = fd_hessian_contract(lambda x: 0.0 * np.sin(x), np.array([0.1, 0.2]))
    assert np.all(H == 0.0)


def test_empty_input_gives_empty_columns():
    J = fd_jacobian(lambda x: np.ones(3), np.zeros(0))
    assert J.shape == (3, 0)


def test_nonfinite_value_raises():
    with pytest.raises(NonFiniteValueError, match="coordinate 0"):
        fd_jacobian(lambda x: np.log(x), np.array([0.0]))


def test_nonpositive_step_rejected():
    with pytest.raises(ValueError):
        fd_jacobian(lambda x: x, np.ones(2), step=0.0)


def test_error_shrinks_with_step():
    f = lambda x: np.exp(3 * x)  # noqa: E731
    x0 = np.array([0.5])
    exact = 3 * np.exp(1.5)
    coarse = abs(fd_jacobian(f, x0, step=1e-2)[0, 0] - exact)
    fine = abs(fd_jacobian(f, x0, step=5e-3)[0, 0] - exact)
    # central differences are second order
    assert fine == pytest.approx(coarse / 4, rel=0.01)


def test_compare_identical():
    a = np.arange(6.0).reshape(2, 3)
    report = compare(sp.csr_matrix(a), a, name="block")
    assert report.passed
    assert report.max_rel_err == 0.0
    assert report.block_name == "block"


def test_compare_reports_worst_entry():
    numeric = np.ones((3, 4))
    analytic = numeric.copy()
    analytic[2, 1] += 1e-3
    analytic[0, 0] += 1e-5
    report = compare(analytic, numeric, rtol=1e-6, atol=0.0, step=1e-6)
    assert not report.passed
    assert report.worst_index == (2, 1)
    assert report.max_abs_err == pytest.approx(1e-3)
    assert report.max_rel_err == pytest.approx(1e-3)
    assert report.to_dict()["worst_index"] == [2, 1]


def test_compare_absolute_floor():
    report = compare(np.array([[1e-12]]), np.zeros((1, 1)), rtol=1e-6, atol=1e-9)
    assert report.passed


def test_compare_reports_zero_error_when_both_sides_vanish():
    report = compare(np.zeros((2, 2)), np.full((2, 2), 1e-12), rtol=1e-6, atol=1e-9)
    assert report.passed
    assert report.max_rel_err == 0.0


def test_compare_empty_block():
    report = compare(np.zeros((0, 3)), np.zeros((0, 3)))
    assert report.passed
    assert report.worst_index is None
    assert report.to_dict()["worst_index"] is None


def test_compare_shape_mismatch():
    with pytest.raises(ValueError, match="shape mismatch"):
        compare(np.zeros((2, 2)), np.zeros((2, 3)), name="G:Va")
