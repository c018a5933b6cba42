from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest

from tapopf.admittance import TapState, network
from tapopf.case_model import (
    BusType,
    CaseError,
    CaseFormat,
    CaseSyntaxError,
    IsolatedBusError,
    from_internal,
    load_case,
    parse_case,
    serialize_case,
    to_internal,
    validate_case,
)


def test_json_case_counts(case9):
    assert len(case9.buses) == 9
    assert len(case9.branches) == 9
    assert len(case9.gens) == 3
    assert len(case9.gencosts) == 3
    assert case9.warnings == ()
    assert case9.buses[0].bus_type is BusType.REF


def test_table_format_matches_json(cases_dir, case9):
    table = load_case(cases_dir / "case9.mpc")
    assert table == case9


@pytest.mark.parametrize("fmt", list(CaseFormat))
def test_serialize_round_trip(case9, case3_tap, fmt):
    for case in (case9, case3_tap):
        assert parse_case(serialize_case(case, fmt), fmt) == case


def test_json_syntax_error_reports_position():
    text = '{"baseMVA": 100,\n  "bus": [}\n'
    with pytest.raises(CaseSyntaxError) as info:
        parse_case(text, "json")
    assert info.value.line == 2
    assert info.value.column is not None
    assert str(info.value).startswith("line 2, column")


def test_table_syntax_error_reports_column():
    text = "BUS\n1 3 0 0 0 0 1.0 0 0.9 1.1\n2 1 abc 0 0 0 1.0 0 0.9 1.1\n"
    with pytest.raises(CaseSyntaxError) as info:
        parse_case(text, "mpc")
    assert info.value.line == 3
    assert info.value.column == 5


def test_unknown_columns_are_warned(case2):
    payload = json.loads(serialize_case(case2))
    payload["bus"][0]["zone"] = 4
    payload["extra"] = {}
    case = parse_case(json.dumps(payload))
    assert case == case2
    assert len(case.warnings) == 2
    assert any("zone" in w for w in case.warnings)


def test_table_trailing_columns_are_warned():
    text = (
        "BUS\n1 3 0 0 0 0 1.0 0 0.9 1.1 7 7\n2 1 10 0 0 0 1.0 0 0.9 1.1\n"
        "BRANCH\n1 2 0 0.1\nGEN\n1 10 0 0 100 -50 50 0 10 0\n"
    )
    case = parse_case(text, "mpc")
    assert len(case.buses) == 2
    assert case.gencosts[0].c1 == 10
    assert case.warnings == ("line 2: ignoring 2 unknown trailing column(s)",)


def test_missing_required_column(case2):
    payload = json.loads(serialize_case(case2))
    del payload["bus"][1]["Vmin"]
    with pytest.raises(CaseError, match="Vmin"):
        parse_case(json.dumps(payload))


def test_duplicate_bus_id(case2):
    payload = json.loads(serialize_case(case2))
    payload["bus"][1]["id"] = 1
    with pytest.raises(CaseError, match="duplicate bus ID 1"):
        parse_case(json.dumps(payload))


def test_absent_tap_bounds_pin_the_tap(case9):
    branch = case9.branches[0]
    assert branch.tau == 0.0
    assert branch.tau_min == branch.tau_max == 1.0
    assert not branch.adjustable
    assert branch.status


def test_validate_clean_case(case9):
    report = validate_case(case9)
    assert report.ok
    assert len(report) == 0


def test_validate_two_slack_buses(cases_dir):
    report = validate_case(load_case(cases_dir / "twoslack.json"))
    assert report.codes() == ["multiple slack"]


@pytest.mark.parametrize(
    "change, code",
    [
        (dict(tbus=1), "self loop"),
        (dict(r=0.0, x=0.0), "zero impedance"),
        (dict(tbus=42), "unknown bus"),
        (dict(adjustable=True, tau=1.2, tau_min=0.9, tau_max=1.1), "tap out of bounds"),
        (dict(adjustable=True, tau=1.0, tau_min=0.0, tau_max=1.1), "nonpositive tap lower bound"),
        (dict(adjustable=True, theta=5.0), "phase out of bounds"),
    ],
)
def test_validate_branch_issues(case2, change, code):
    broken = replace(case2, branches=(replace(case2.branches[0], **change),))
    assert code in validate_case(broken).codes()


def test_validate_slack_without_generator(case2):
    broken = replace(case2, gens=(), gencosts=())
    assert "slack without generator" in validate_case(broken).codes()


def test_validate_generation_limits(case2):
    broken = replace(case2, gens=(replace(case2.gens[0], Pmin=300.0),))
    assert validate_case(broken).codes() == ["generation limits"]


def test_to_internal_per_unit(model9):
    assert model9.nb == 9 and model9.nl == 9 and model9.ng == 3 and model9.na == 0
    assert model9.ref == 0
    np.testing.assert_allclose(model9.Sd[4], 0.9 + 0.3j)
    np.testing.assert_allclose(model9.Pg0, [0.723, 1.63, 0.85])
    np.testing.assert_allclose(model9.tau0, np.ones(9))
    assert model9.ys[0] == pytest.approx(1.0 / 0.0576j)
    assert list(model9.pv) == [1, 2]
    assert model9.Cf.shape == (9, 9)
    assert model9.Cg[0, 0] == 1.0


def test_to_internal_converts_degrees(model3):
    assert model3.na == 1
    assert list(model3.adjustable) == [1]
    np.testing.assert_allclose(model3.tau_min, [0.9])
    np.testing.assert_allclose(model3.theta_max, [0.0])


def test_isolated_bus_raises(case2):
    cut = replace(case2, branches=(replace(case2.branches[0], status=False),))
    with pytest.raises(IsolatedBusError, match="1, 2"):
        to_internal(cut)


def test_out_of_service_branches_are_dropped(case9):
    extra = replace(case9.branches[1], status=False)
    model = to_internal(replace(case9, branches=case9.branches + (extra,)))
    assert model.nl == 9
    assert list(model.branch_index) == list(range(9))


def test_from_internal_round_trip(model3):
    again = to_internal(from_internal(model3))
    for name in ("ys", "bc", "Ysh", "Sd", "tau0", "theta0", "tau_min", "tau_max", "Pmin", "Qmax", "cost", "Vmin"):
        np.testing.assert_allclose(getattr(again, name), getattr(model3, name), err_msg=name)
    assert list(again.adjustable) == list(model3.adjustable)


@pytest.mark.parametrize("name", ["case9", "case3_tap"])
def test_bus_order_only_permutes_the_model(name, request):
    case = request.getfixturevalue(name)
    order = np.random.default_rng(3).permutation(len(case.buses))
    base = to_internal(case)
    shuffled = to_internal(replace(case, buses=tuple(case.buses[i] for i in order)))
    # p[i] is the index of base bus i in the shuffled model
    position = {int(bus_id): i for i, bus_id in enumerate(shuffled.bus_ids)}
    p = np.array([position[int(bus_id)] for bus_id in base.bus_ids])
    Y = network(base, TapState.nominal(base))[1].Ybus.toarray()
    Y_shuffled = network(shuffled, TapState.nominal(shuffled))[1].Ybus.toarray()
    np.testing.assert_allclose(Y_shuffled[np.ix_(p, p)], Y, rtol=0.0, atol=1e-12)
    np.testing.assert_allclose(shuffled.Sd[p], base.Sd)
    np.testing.assert_allclose(shuffled.Ysh[p], base.Ysh)
    assert shuffled.ref == p[base.ref]
