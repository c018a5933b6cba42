"""Finite-difference checks of every analytic derivative family.

Each check returns a list of ``FDReport`` named ``<family>:<rows>,<cols>``
so that results from several operating points can be merged per block.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .admittance import TapState, branch_admittances, build_system, dYbusGamma_dtau, dYbusGamma_dtheta
from .case_model import Case, InternalModel, to_internal
from .fd_oracle import FDReport, compare, fd_hessian_contract, fd_jacobian
from .global_variables import FD_ATOL, FD_HESSIAN_RTOL, FD_HESSIAN_STEP, FD_RTOL, FD_STEP, VARIABLE_GROUPS
from .line_flow import (
    Side,
    current_gradients,
    current_row_blocks,
    d2_currents,
    d_currents,
    d_flow_constraints,
    flow_constraints,
    limit_gradient,
)
from .opf_solver import OpfProblem, lagrangian_gradient, lagrangian_hessian
from .power_balance import d2_mismatch, d_mismatch, mismatch, tap_row_blocks
from .synthetic import random_case, random_complex, random_point
from .variables import HessianBlocks, VariableVector

logger = logging.getLogger(__name__)

# Transposed blocks computed two ways agree to rounding.
TRANSPOSE_RTOL = 1e-12


@dataclass(frozen=True)
class CheckTolerances:
    step: float = FD_STEP
    hessian_step: float = FD_HESSIAN_STEP
    rtol: float = FD_RTOL
    hessian_rtol: float = FD_HESSIAN_RTOL
    atol: float = FD_ATOL


def _first_order(name: str, bundle: dict, numeric: np.ndarray, x: VariableVector, tol: CheckTolerances):
    return [
        compare(bundle[g], numeric[:, s], tol.rtol, tol.atol, f"{name}:{g}", tol.step)
        for g, s in x.layout.slices.items()
    ]


def _second_order(name: str, H: HessianBlocks, numeric: np.ndarray, x: VariableVector, tol: CheckTolerances):
    slices = x.layout.slices
    reports = []
    for a in VARIABLE_GROUPS:
        for b in VARIABLE_GROUPS:
            block = H.block(a, b).toarray()
            piece = numeric[slices[a], slices[b]]
            for part, take in (("re", np.real), ("im", np.imag)):
                reports.append(
                    compare(
                        take(block), take(piece), tol.hessian_rtol, tol.atol,
                        f"{name}[{part}]:{a},{b}", tol.hessian_step,
                    )
                )
    return reports


def _transposed(name: str, direct: dict, H: HessianBlocks) -> list[FDReport]:
    return [
        compare(block, H.block(a, b).toarray(), TRANSPOSE_RTOL, 0.0, f"{name}:{a},{b}", 0.0)
        for (a, b), block in direct.items()
    ]


def ybus_checks(m: InternalModel, x: VariableVector, gamma: np.ndarray, tol: CheckTolerances) -> list[FDReport]:
    """∂(Ybus·γ)/∂τ and ∂(Ybus·γ)/∂θ over every branch."""
    taps = x.taps(m)

    def ybus_gamma(t: TapState) -> np.ndarray:
        return build_system(m, branch_admittances(m, t)).Ybus @ gamma

    ba = branch_admittances(m, taps)
    num_tau = fd_jacobian(lambda v: ybus_gamma(TapState(v, taps.theta)), taps.tau, tol.step)
    num_theta = fd_jacobian(lambda v: ybus_gamma(TapState(taps.tau, v)), taps.theta, tol.step)
    return [
        compare(dYbusGamma_dtau(m, ba, taps, gamma), num_tau, tol.rtol, tol.atol, "Ybus:tau", tol.step),
        compare(dYbusGamma_dtheta(m, ba, gamma), num_theta, tol.rtol, tol.atol, "Ybus:theta", tol.step),
    ]


def mismatch_checks(m: InternalModel, x: VariableVector, lam: np.ndarray, tol: CheckTolerances) -> list[FDReport]:
    split = x.layout.split
    x0 = x.stack()
    numeric = fd_jacobian(lambda v: mismatch(split(v), m), x0, tol.step)
    reports = _first_order("G", d_mismatch(x, m).blocks(), numeric, x, tol)
    contracted = fd_hessian_contract(lambda v: d_mismatch(split(v), m).contract(lam), x0, tol.hessian_step)
    H = d2_mismatch(x, m, lam)
    reports += _second_order("G_XX", H, contracted, x, tol)
    reports += _transposed("G_XX^T", tap_row_blocks(x, m, lam), H)
    return reports


def current_checks(m: InternalModel, x: VariableVector, mu: np.ndarray, tol: CheckTolerances) -> list[FDReport]:
    """I_f and I_t families; both sides share one pass for values and one for contracted gradients."""
    split = x.layout.split
    x0 = x.stack()
    nl, n = m.nl, x.layout.n
    numeric = fd_jacobian(lambda v: _stacked_currents(split(v), m), x0, tol.step)
    contracted = fd_hessian_contract(
        lambda v: np.concatenate(current_gradients(split(v), m, mu, mu)), x0, tol.hessian_step
    )
    reports = []
    for k, (side, label) in enumerate(((Side.FROM, "I_f"), (Side.TO, "I_t"))):
        reports += _first_order(label, d_currents(x, m, side).blocks(), numeric[k * nl:(k + 1) * nl], x, tol)
        H = d2_currents(x, m, mu, side)
        reports += _second_order(f"{label}_XX", H, contracted[k * n:(k + 1) * n], x, tol)
        reports += _transposed(f"{label}_XX^T", current_row_blocks(x, m, mu, side), H)
    return reports


def _stacked_currents(x: VariableVector, m: InternalModel) -> np.ndarray:
    ev = flow_constraints(x, m)
    return np.concatenate([ev.If, ev.It])


def flow_checks(m: InternalModel, x: VariableVector, nu: np.ndarray, tol: CheckTolerances) -> list[FDReport]:
    """Jacobian and ν-contracted Hessian of the stacked squared current limits [hf; ht]."""
    nc = len(m.constrained)
    if nc == 0:
        return []
    split = x.layout.split
    x0 = x.stack()

    def limits(v: np.ndarray) -> np.ndarray:
        ev = flow_constraints(split(v), m)
        return np.concatenate([ev.hf, ev.ht])

    derivs = d_flow_constraints(x, m)
    jacobian = derivs.jacobian
    numeric = fd_jacobian(limits, x0, tol.step)
    reports = [
        compare(jacobian[rows], numeric[rows], tol.rtol, tol.atol, f"{label}:X", tol.step)
        for label, rows in (("h_f", slice(0, nc)), ("h_t", slice(nc, 2 * nc)))
    ]
    contracted = fd_hessian_contract(
        lambda v: limit_gradient(split(v), m, nu[:nc], nu[nc:]), x0, tol.hessian_step
    )
    reports.append(
        compare(derivs.hessian(nu[:nc], nu[nc:]), contracted, tol.hessian_rtol, tol.atol, "h_XX:X,X", tol.hessian_step)
    )
    return reports


def lagrangian_checks(
    p: OpfProblem, x: VariableVector, lam: np.ndarray, mu: np.ndarray, tol: CheckTolerances
) -> list[FDReport]:
    split = x.layout.split
    numeric = fd_hessian_contract(lambda v: lagrangian_gradient(split(v), p, lam, mu), x.stack(), tol.hessian_step)
    return [compare(lagrangian_hessian(x, p, lam, mu), numeric, tol.hessian_rtol, tol.atol, "L_XX:X,X", tol.hessian_step)]


def check_point(
    m: InternalModel, x: VariableVector, rng: np.random.Generator, tol: CheckTolerances | None = None
) -> list[FDReport]:
    """Every derivative family at one operating point with random multipliers."""
    tol = tol or CheckTolerances()
    nc = len(m.constrained)
    reports = ybus_checks(m, x, random_complex(rng, m.nb), tol)
    reports += mismatch_checks(m, x, rng.standard_normal(m.nb), tol)
    reports += current_checks(m, x, random_complex(rng, m.nl), tol)
    reports += flow_checks(m, x, rng.uniform(0.0, 2.0, 2 * nc), tol)
    if m.cost.shape[0] == m.ng:
        p = OpfProblem.from_model(m)
        lam = 10.0 * rng.standard_normal(2 * m.nb)
        reports += lagrangian_checks(p, x, lam, rng.uniform(0.0, 2.0, 2 * nc), tol)
    return reports


def merge_reports(reports: Iterable[FDReport]) -> list[FDReport]:
    """Worst report per block name, failing if any merged report failed."""
    merged: dict[str, FDReport] = {}
    for report in reports:
        seen = merged.get(report.block_name)
        if seen is None:
            merged[report.block_name] = report
            continue
        worst = report if report.max_rel_err > seen.max_rel_err else seen
        merged[report.block_name] = replace(worst, passed=seen.passed and report.passed)
    return list(merged.values())


def with_all_adjustable(case: Case) -> Case:
    """Copy of ``case`` in which every branch tap is a free variable."""
    branches = []
    for br in case.branches:
        tau = br.effective_tau
        theta = br.theta
        branches.append(
            replace(
                br,
                adjustable=True,
                tau_min=min(br.tau_min, tau, 0.9) if br.adjustable else min(tau, 0.9),
                tau_max=max(br.tau_max, tau, 1.1) if br.adjustable else max(tau, 1.1),
                theta_min=min(theta, -17.0),
                theta_max=max(theta, 17.0),
            )
        )
    return replace(case, branches=tuple(branches))


def run_checks(
    case: Case, rng: np.random.Generator, trials: int, tol: CheckTolerances | None = None
) -> list[FDReport]:
    """The given case (all taps free) at a random point, then ``trials`` random cases sized like it."""
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    tol = tol or CheckTolerances()
    m = to_internal(with_all_adjustable(case))
    reports = check_point(m, random_point(rng, m), rng, tol)
    largest = max(2, min(m.nb, 10))
    for trial in range(trials):
        nb = int(rng.integers(2, largest + 1))
        rm = to_internal(random_case(rng, nb))
        logger.debug("derivative trial %d: %d buses, %d branches", trial, rm.nb, rm.nl)
        reports += check_point(rm, random_point(rng, rm), rng, tol)
    return merge_reports(reports)


__all__ = [
    "CheckTolerances",
    "check_point",
    "current_checks",
    "flow_checks",
    "lagrangian_checks",
    "merge_reports",
    "mismatch_checks",
    "run_checks",
    "with_all_adjustable",
    "ybus_checks",
]
