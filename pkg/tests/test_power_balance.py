from __future__ import annotations

import numpy as np
import pytest

from tapopf.case_model import to_internal
from tapopf.derivative_suite import CheckTolerances, mismatch_checks
from tapopf.power_balance import d2_mismatch, d_mismatch, mismatch, tap_row_blocks
from tapopf.synthetic import random_case, random_complex, random_point
from tapopf.variables import VariableVector


def _failures(reports):
    return [r for r in reports if not r.passed]


def test_mismatch_vanishes_at_a_solved_point(model2):
    delta = -0.5 * np.arcsin(0.1)
    x = VariableVector.from_model(model2).with_values(
        Va=[0.0, delta], Vm=[1.0, np.cos(delta)], Pg=[0.5], Qg=[0.0]
    )
    G = mismatch(x, model2)
    # Qg at the slack absorbs the reactive losses
    assert abs(G[0].real) < 1e-12
    assert abs(G[1]) < 1e-12


def test_mismatch_includes_demand_and_generation(model2):
    x = VariableVector.from_model(model2).with_values(Va=[0.0, 0.0], Vm=[1.0, 1.0], Pg=[0.2], Qg=[0.1])
    np.testing.assert_allclose(mismatch(x, model2), [-0.2 - 0.1j, 0.5], atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_mismatch_derivatives_match_differences(seed):
    rng = np.random.default_rng(seed)
    m = to_internal(random_case(rng))
    x = random_point(rng, m)
    assert _failures(mismatch_checks(m, x, random_complex(rng, m.nb), CheckTolerances())) == []


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10, 60))
def test_mismatch_derivatives_many_cases(seed):
    rng = np.random.default_rng(seed)
    m = to_internal(random_case(rng))
    x = random_point(rng, m)
    assert _failures(mismatch_checks(m, x, rng.standard_normal(m.nb), CheckTolerances())) == []


def test_mismatch_derivatives_on_tap_case(model3, rng):
    x = random_point(rng, model3)
    reports = mismatch_checks(model3, x, random_complex(rng, 3), CheckTolerances())
    assert _failures(reports) == []
    names = {r.block_name for r in reports}
    assert "G:tau" in names
    assert "G_XX[im]:Vm,theta" in names
    assert "G_XX^T:theta,Va" in names


def test_transpose_identities(model3, rng):
    x = random_point(rng, model3)
    lam = random_complex(rng, 3)
    H = d2_mismatch(x, model3, lam)
    direct = tap_row_blocks(x, model3, lam)
    assert set(direct) == {("tau", "Va"), ("tau", "Vm"), ("theta", "Va"), ("theta", "Vm"), ("theta", "tau")}
    for (a, b), block in direct.items():
        np.testing.assert_allclose(block.toarray(), H.block(a, b).toarray(), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(block.toarray(), H.block(b, a).toarray().T, rtol=1e-12, atol=1e-14)


def test_dispatch_blocks(model9, rng):
    x = random_point(rng, model9)
    d = d_mismatch(x, model9)
    np.testing.assert_allclose(d.dPg.toarray(), -model9.Cg.toarray())
    np.testing.assert_allclose(d.dQg.toarray(), -1j * model9.Cg.toarray())
    H = d2_mismatch(x, model9, random_complex(rng, 9))
    for a in ("Pg", "Qg"):
        for b in ("Va", "Vm", "Pg", "Qg", "tau", "theta"):
            assert H.block(a, b).nnz == 0
            assert H.block(b, a).nnz == 0


def test_tap_columns_empty_without_adjustable_branches(model9, rng):
    d = d_mismatch(random_point(rng, model9), model9)
    assert d.dTau.shape == (9, 0)
    assert d.dTheta.shape == (9, 0)
    assert d.stacked().shape == (9, 2 * 9 + 2 * 3)


def test_uniform_angle_shift_leaves_mismatch_unchanged(model3, rng):
    x = random_point(rng, model3)
    shifted = x.with_values(Va=x.Va + 0.7)
    np.testing.assert_allclose(mismatch(shifted, model3), mismatch(x, model3), atol=1e-12)


def test_multiplier_length_checked(model3, rng):
    with pytest.raises(ValueError, match="length 3"):
        d2_mismatch(random_point(rng, model3), model3, np.ones(2))


def test_contracted_gradient_matches_stacked_jacobian(model3, rng):
    x = random_point(rng, model3)
    lam = random_complex(rng, 3)
    bundle = d_mismatch(x, model3)
    np.testing.assert_allclose(bundle.contract(lam), bundle.stacked().T @ lam, rtol=1e-12, atol=1e-14)
