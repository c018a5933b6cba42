from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from tapopf.admittance import TapState
from tapopf.case_model import to_internal
from tapopf.derivative_suite import CheckTolerances, lagrangian_checks
from tapopf.interior_point import IpmOptions
from tapopf.line_flow import flow_constraints
from tapopf.opf_solver import (
    OpfProblem,
    PowerFlowOptions,
    SolverError,
    SolveStatus,
    binding_bounds,
    dispatch_cost,
    fix_taps,
    grid_search_taps,
    lagrangian_gradient,
    lagrangian_hessian,
    newton_power_flow,
    solve_opf,
)
from tapopf.power_balance import mismatch
from tapopf.synthetic import random_case, random_point

CASE9_OPTIMUM = 5296.69


# -- power flow --------------------------------------------------------------


def test_two_bus_power_flow_matches_closed_form(model2):
    res = newton_power_flow(model2, options=PowerFlowOptions(tol=1e-10))
    assert res.converged
    delta = brentq(lambda d: 10.0 * np.sin(d) * np.cos(d) + 0.5, -0.5, 0.0)
    assert res.x.Va[1] == pytest.approx(delta, abs=1e-8)
    assert res.x.Vm[1] == pytest.approx(np.cos(delta), abs=1e-8)
    assert res.x.Pg[0] == pytest.approx(0.5, abs=1e-8)
    assert res.x.Qg[0] == pytest.approx(10.0 * np.sin(delta) ** 2, abs=1e-8)
    assert res.feasibility < 1e-9


def test_unloaded_network_needs_no_update(case2):
    idle = replace(case2, buses=tuple(replace(b, Pd=0.0, Qd=0.0) for b in case2.buses))
    res = newton_power_flow(to_internal(idle))
    assert res.converged
    assert res.iterations <= 1


def test_case9_power_flow(model9):
    res = newton_power_flow(model9)
    assert res.converged
    assert res.iterations <= 6
    assert 0.65 < res.x.Pg[0] < 0.80
    np.testing.assert_allclose(res.x.Vm[[0, 1, 2]], [1.04, 1.025, 1.025])
    np.testing.assert_allclose(res.x.Pg[1:], model9.Pg0[1:])
    assert np.max(np.abs(mismatch(res.x, model9))) < 1e-8
    assert res.objective == pytest.approx(dispatch_cost(model9, res.x.Pg))


def test_power_flow_iteration_limit(model9):
    res = newton_power_flow(model9, options=PowerFlowOptions(max_iter=0))
    assert res.status is SolveStatus.ITER_LIMIT
    assert res.iterations == 0
    # dispatch is left as written when the solve stops early
    np.testing.assert_allclose(res.x.Pg, model9.Pg0)


def test_pv_bus_without_generator_is_solved_as_load_bus(case9):
    trimmed = replace(case9, gens=case9.gens[:2], gencosts=case9.gencosts[:2])
    m = to_internal(trimmed)
    res = newton_power_flow(m)
    assert res.converged
    assert abs(res.x.Vm[2] - 1.025) > 1e-4
    assert np.max(np.abs(mismatch(res.x, m))) < 1e-8


def test_power_flow_at_given_taps(model3):
    low = newton_power_flow(model3, taps=TapState.nominal(model3))
    high = newton_power_flow(model3, taps=TapState.nominal(model3).with_branch(1, tau=1.05))
    assert low.converged and high.converged
    assert high.x.tau[0] == pytest.approx(1.05)
    assert high.x.Vm[2] > low.x.Vm[2]


def test_power_flow_options_validated():
    with pytest.raises(ValueError):
        PowerFlowOptions(tol=0.0)
    with pytest.raises(ValueError):
        PowerFlowOptions(max_iter=-1)


# -- optimal power flow ---------------------------------------------------------


@pytest.fixture(scope="module")
def case9_solution(model9):
    p = OpfProblem.from_model(model9)
    return p, solve_opf(p)


def test_case9_optimum(case9_solution, model9):
    p, res = case9_solution
    assert res.converged
    assert res.objective == pytest.approx(CASE9_OPTIMUM, rel=1e-3)
    x = res.x
    assert x.Va[model9.ref] == 0.0
    assert np.max(np.abs(mismatch(x, model9))) < 1e-7
    assert np.all(x.Vm >= model9.Vmin - 1e-7) and np.all(x.Vm <= model9.Vmax + 1e-7)
    assert np.all(x.Pg >= model9.Pmin - 1e-7) and np.all(x.Pg <= model9.Pmax + 1e-7)
    assert res.lam.shape == (18,)
    # real power prices in $/MWh
    assert np.all(res.lam[:9] / model9.base_mva > 20.0)
    assert res.history[-1] < res.history[0]


@pytest.mark.parametrize("solution", ["case9_solution", "tap_solution"])
def test_optimum_is_stationary(solution, request):
    p, res = request.getfixturevalue(solution)
    assert res.converged
    # the fixed slack angle carries its bound price
    grad = lagrangian_gradient(res.x, p, res.lam, res.mu) + res.mu_upper - res.mu_lower
    assert np.max(np.abs(grad)) <= 1e-6


@pytest.mark.parametrize("solution", ["case9_solution", "tap_solution"])
def test_merit_decreases_over_every_ten_iterations(solution, request):
    _, res = request.getfixturevalue(solution)
    history = np.asarray(res.history)
    assert len(history) == res.iterations + 1
    for i in range(len(history) - 10):
        assert history[i + 10] < history[i], i


def test_flow_limit_binds(case9):
    limited = replace(
        case9, branches=tuple(replace(br, imax=1.0) if k == 6 else br for k, br in enumerate(case9.branches))
    )
    m = to_internal(limited)
    p = OpfProblem.from_model(m)
    res = solve_opf(p)
    assert res.converged
    ev = flow_constraints(res.x, m)
    assert max(abs(ev.If[6]), abs(ev.It[6])) <= 1.0 + 1e-6
    assert res.objective > CASE9_OPTIMUM * (1 + 1e-4)
    assert res.mu.shape == (2,)
    assert np.max(res.mu) > 0.0
    assert any(group in ("If", "It") and k == 6 for group, k, _ in binding_bounds(p, res.x))


@pytest.fixture(scope="module")
def tap_solution(model3):
    p = OpfProblem.from_model(model3)
    return p, solve_opf(p)


def test_variable_tap_beats_fixed_tap(tap_solution, model3):
    p, res = tap_solution
    fixed = solve_opf(OpfProblem.from_model(model3, fixed_taps=True))
    assert res.converged and fixed.converged
    assert res.objective < fixed.objective
    assert res.x.tau[0] > 1.0


def test_tap_optimum_against_grid(tap_solution):
    p, res = tap_solution
    grid = grid_search_taps(p, 0, np.round(np.arange(0.95, 1.1 + 1e-9, 0.01), 2))
    solved = [r.objective for _, r in grid if r.converged]
    assert solved
    assert res.objective <= min(solved) * (1 + 1e-6)
    assert min(solved) <= res.objective * (1 + 1e-2)


def test_fixed_taps_match_grid_point(model3):
    p = OpfProblem.from_model(model3)
    fixed = solve_opf(OpfProblem.from_model(model3, fixed_taps=True))
    [(value, at_one)] = grid_search_taps(p, 0, [1.0])
    assert value == 1.0
    assert at_one.objective == pytest.approx(fixed.objective, rel=1e-6)


def test_low_tap_is_infeasible(model3):
    p = OpfProblem.from_model(model3)
    [(_, res)] = grid_search_taps(p, 0, [0.9], IpmOptions(max_iter=60))
    assert not res.converged


def test_resolving_at_optimal_taps(tap_solution):
    p, res = tap_solution
    again = solve_opf(fix_taps(p, res.x))
    assert again.converged
    assert again.objective == pytest.approx(res.objective, rel=1e-5)
    np.testing.assert_allclose(again.x.tau, res.x.tau)


def test_tap_bound_becomes_active(model3):
    p = OpfProblem.from_model(model3).with_bounds("tau", 0, 0.95, 1.0)
    res = solve_opf(p)
    assert res.converged
    assert res.x.tau[0] == pytest.approx(1.0, abs=1e-6)
    assert res.mu_upper[p.layout.offsets["tau"]] > 0.0
    assert ("tau", 0, "upper") in binding_bounds(p, res.x)


def test_initial_point_respects_bounds(model3):
    p = OpfProblem.from_model(model3)
    x = p.initial_point().stack()
    assert np.all(x >= p.xmin) and np.all(x <= p.xmax)
    assert p.initial_point().Pg == pytest.approx([1.5, 1.0])


# -- Lagrangian ----------------------------------------------------------------


@pytest.mark.parametrize("seed", range(10))
def test_lagrangian_hessian_matches_differences(seed):
    rng = np.random.default_rng(seed)
    m = to_internal(random_case(rng))
    p = OpfProblem.from_model(m)
    x = random_point(rng, m)
    lam = 10.0 * rng.standard_normal(2 * m.nb)
    mu = rng.uniform(0.0, 2.0, p.inequality_count)
    reports = lagrangian_checks(p, x, lam, mu, CheckTolerances())
    assert all(r.passed for r in reports), reports


def test_lagrangian_hessian_is_symmetric_before_symmetrizing(rng):
    m = to_internal(random_case(np.random.default_rng(5), nb=7))
    p = OpfProblem.from_model(m)
    x = random_point(rng, m)
    H = lagrangian_hessian(
        x, p, rng.standard_normal(2 * m.nb), rng.uniform(0, 1, p.inequality_count), symmetrize=False
    ).toarray()
    assert np.max(np.abs(H - H.T)) <= 1e-9 * max(np.max(np.abs(H)), 1.0)


def test_objective_hessian_scaling(model9):
    p = OpfProblem.from_model(model9)
    H = p.objective_hessian().toarray()
    start = p.layout.offsets["Pg"]
    np.testing.assert_allclose(np.diag(H)[start:start + 3], 2.0 * np.array([0.11, 0.085, 0.1225]) * 100.0**2)


# -- malformed input -------------------------------------------------------------


def test_bad_multiplier_lengths(model3, rng):
    p = OpfProblem.from_model(model3)
    with pytest.raises(SolverError, match="balance multipliers"):
        lagrangian_hessian(random_point(rng, model3), p, np.ones(3), np.zeros(0))


def test_cost_rows_must_match_generators(model3):
    with pytest.raises(SolverError, match="cost rows"):
        OpfProblem.from_model(replace(model3, cost=model3.cost[:1]))
    assert np.isnan(dispatch_cost(replace(model3, cost=model3.cost[:1]), np.zeros(2)))


def test_bound_and_index_checks(model3):
    p = OpfProblem.from_model(model3)
    with pytest.raises(SolverError):
        p.with_bounds("tau", 3, 0.9, 1.1)
    with pytest.raises(SolverError):
        p.with_bounds("Vm", 0, 1.1, 0.9)
    with pytest.raises(SolverError):
        grid_search_taps(p, 1, [1.0])
