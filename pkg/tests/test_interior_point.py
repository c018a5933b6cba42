from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from tapopf.interior_point import IpmOptions, NlpProblem, SolveStatus, solve_nlp


def _none(n):
    return lambda x: (np.zeros(0), sp.csr_matrix((0, n)))


def _quadratic(target):
    target = np.asarray(target, dtype=float)

    def objective(x):
        return float(np.sum((x - target) ** 2)), 2.0 * (x - target)

    return objective


def _identity_hessian(scale=2.0):
    return lambda x, lam, mu: scale * sp.identity(len(x), format="csr")


def test_bound_constrained_quadratic():
    problem = NlpProblem(
        objective=_quadratic([2.0, -3.0]),
        equalities=_none(2),
        inequalities=_none(2),
        hessian=_identity_hessian(),
        xmin=np.array([-1.0, -1.0]),
        xmax=np.array([1.0, 1.0]),
    )
    res = solve_nlp(problem, np.zeros(2))
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, -1.0], atol=1e-6)
    assert res.mu_upper[0] == pytest.approx(2.0, rel=1e-4)
    assert res.mu_lower[1] == pytest.approx(4.0, rel=1e-4)
    assert res.mu_lower[0] == pytest.approx(0.0, abs=1e-6)


def test_equality_constrained_quadratic():
    def equalities(x):
        return np.array([x[0] + x[1] - 1.0]), sp.csr_matrix(np.ones((1, 2)))

    problem = NlpProblem(
        objective=_quadratic([0.0, 0.0]),
        equalities=equalities,
        inequalities=_none(2),
        hessian=_identity_hessian(),
        xmin=np.full(2, -np.inf),
        xmax=np.full(2, np.inf),
    )
    res = solve_nlp(problem, np.array([3.0, -1.0]))
    assert res.converged
    np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-8)
    np.testing.assert_allclose(res.lam, [-1.0], atol=1e-6)


def test_nonlinear_inequality():
    def objective(x):
        return float(-x[0] - x[1]), np.array([-1.0, -1.0])

    def inequalities(x):
        return np.array([x @ x - 1.0]), sp.csr_matrix(2.0 * x.reshape(1, 2))

    def hessian(x, lam, mu):
        return 2.0 * mu[0] * sp.identity(2, format="csr")

    problem = NlpProblem(
        objective=objective,
        equalities=_none(2),
        inequalities=inequalities,
        hessian=hessian,
        xmin=np.full(2, -np.inf),
        xmax=np.full(2, np.inf),
    )
    res = solve_nlp(problem, np.zeros(2))
    assert res.converged
    np.testing.assert_allclose(res.x, [np.sqrt(0.5)] * 2, atol=1e-6)
    np.testing.assert_allclose(res.mu, [np.sqrt(0.5)], rtol=1e-5)
    assert res.history[-1] < res.history[0]


def test_fixed_variables_are_priced_by_stationarity():
    problem = NlpProblem(
        objective=_quadratic([2.0, 0.5]),
        equalities=_none(2),
        inequalities=_none(2),
        hessian=_identity_hessian(),
        xmin=np.array([1.0, 0.0]),
        xmax=np.array([1.0, 2.0]),
    )
    res = solve_nlp(problem, np.array([0.0, 0.0]))
    assert res.converged
    assert res.x[0] == 1.0
    assert res.x[1] == pytest.approx(0.5, abs=1e-6)
    assert res.mu_upper[0] == pytest.approx(2.0)
    assert res.mu_lower[0] == 0.0


def test_iteration_limit_status():
    problem = NlpProblem(
        objective=_quadratic([2.0]),
        equalities=_none(1),
        inequalities=_none(1),
        hessian=_identity_hessian(),
        xmin=np.array([-1.0]),
        xmax=np.array([1.0]),
    )
    res = solve_nlp(problem, np.zeros(1), IpmOptions(max_iter=1))
    assert res.status is SolveStatus.ITER_LIMIT
    assert res.iterations == 1


def test_infeasible_constraints():
    # x <= -1 and x >= 1 through a nonlinear row and a bound
    def inequalities(x):
        return np.array([x[0] + 1.0]), sp.csr_matrix(np.ones((1, 1)))

    problem = NlpProblem(
        objective=_quadratic([0.0]),
        equalities=_none(1),
        inequalities=inequalities,
        hessian=_identity_hessian(),
        xmin=np.array([1.0]),
        xmax=np.array([np.inf]),
    )
    res = solve_nlp(problem, np.array([1.5]), IpmOptions(max_iter=30))
    assert not res.converged
    assert res.status in (SolveStatus.INFEASIBLE, SolveStatus.NUMERIC_FAILURE)


def test_nonfinite_objective_is_a_numeric_failure():
    problem = NlpProblem(
        objective=lambda x: (float("nan"), np.zeros(1)),
        equalities=_none(1),
        inequalities=_none(1),
        hessian=_identity_hessian(),
        xmin=np.array([-np.inf]),
        xmax=np.array([np.inf]),
    )
    res = solve_nlp(problem, np.zeros(1))
    assert res.status is SolveStatus.NUMERIC_FAILURE
    assert res.iterations == 0


@pytest.mark.parametrize(
    "change",
    [
        {"max_iter": -1},
        {"feas_tol": 0.0},
        {"step_to_boundary": 1.0},
        {"initial_centering": 0.0},
        {"regularization": 1e-2, "max_regularization": 1e-4},
    ],
)
def test_options_validation(change):
    with pytest.raises(ValueError):
        IpmOptions(**change)


def test_bounds_must_match_start():
    problem = NlpProblem(
        objective=_quadratic([0.0]),
        equalities=_none(1),
        inequalities=_none(1),
        hessian=_identity_hessian(),
        xmin=np.array([1.0]),
        xmax=np.array([0.0]),
    )
    with pytest.raises(ValueError):
        solve_nlp(problem, np.zeros(1))
