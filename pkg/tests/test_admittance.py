from __future__ import annotations

import numpy as np
import pytest

from tapopf.admittance import TapState, branch_admittances, dYbusGamma_dtau, network
from tapopf.derivative_suite import CheckTolerances, ybus_checks
from tapopf.case_model import to_internal
from tapopf.synthetic import random_case, random_complex, random_point


def test_ybus_of_case9(model9):
    _, system = network(model9, TapState.nominal(model9))
    Y = system.Ybus.toarray()
    assert Y.shape == (9, 9)
    assert Y[0, 0] == pytest.approx(-1j / 0.0576)
    assert Y[0, 3] == pytest.approx(1j / 0.0576)
    # no shunts: rows sum to the line charging only
    assert np.sum(Y[0]) == pytest.approx(0.0, abs=1e-9)


def test_ybus_symmetric_without_phase_shift(model9):
    taps = TapState.nominal(model9).with_branch(0, tau=1.05)
    _, system = network(model9, taps)
    Y = system.Ybus.toarray()
    np.testing.assert_allclose(Y, Y.T, atol=1e-12)


def test_phase_shift_breaks_symmetry(model9):
    taps = TapState.nominal(model9).with_branch(1, theta=0.1)
    _, system = network(model9, taps)
    Y = system.Ybus.toarray()
    assert abs(Y[3, 4] - Y[4, 3]) > 1e-3
    assert abs(Y[3, 3]) == pytest.approx(abs(network(model9, TapState.nominal(model9))[1].Ybus[3, 3]))


def test_branch_admittance_formulas(model3):
    taps = TapState.nominal(model3).with_branch(1, tau=0.95, theta=0.2)
    ba = branch_admittances(model3, taps)
    ys = model3.ys[1]
    assert ba.Yff[1] == pytest.approx(ys / 0.95**2)
    assert ba.Yft[1] == pytest.approx(-ys * np.exp(0.2j) / 0.95)
    assert ba.Ytf[1] == pytest.approx(-ys * np.exp(-0.2j) / 0.95)
    assert ba.Ytt[1] == pytest.approx(ys)


def test_branch_matrices_give_branch_currents(model3):
    taps = TapState.nominal(model3)
    ba, system = network(model3, taps)
    V = np.array([1.0, 0.98 * np.exp(-0.05j), 1.01 * np.exp(-0.1j)])
    If = system.Yf @ V
    assert If[1] == pytest.approx(ba.Yff[1] * V[2] + ba.Yft[1] * V[1])


@pytest.mark.parametrize("tau", [0.0, -1.0])
def test_tap_state_rejects_nonpositive_tau(model3, tau):
    with pytest.raises(ValueError):
        TapState.nominal(model3).with_branch(0, tau=tau)


def test_tap_derivative_columns_only_touch_branch_ends(model9, rng):
    taps = TapState.nominal(model9)
    ba, _ = network(model9, taps)
    D = dYbusGamma_dtau(model9, ba, taps, random_complex(rng, 9)).toarray()
    assert D.shape == (9, 9)
    for k in range(model9.nl):
        touched = set(np.flatnonzero(D[:, k]))
        assert touched <= {model9.f[k], model9.t[k]}


@pytest.mark.parametrize("seed", range(5))
def test_ybus_tap_derivatives_match_differences(seed):
    rng = np.random.default_rng(seed)
    m = to_internal(random_case(rng))
    x = random_point(rng, m)
    for report in ybus_checks(m, x, random_complex(rng, m.nb), CheckTolerances()):
        assert report.passed, report


def test_ybus_tap_derivatives_on_case9(model9, rng):
    x = random_point(rng, model9)
    reports = ybus_checks(model9, x, random_complex(rng, 9), CheckTolerances())
    assert [r.block_name for r in reports] == ["Ybus:tau", "Ybus:theta"]
    assert all(r.passed for r in reports)
