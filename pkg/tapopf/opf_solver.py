"""Newton power flow and AC optimal power flow with adjustable transformer taps.

The OPF is posed over the stacked vector X = [Va; Vm; Pg; Qg; tau; theta]:

    min  Σ c2·(B·Pg)² + c1·(B·Pg) + c0            (B = baseMVA)
    s.t. [Re G(X); Im G(X)] = 0                    power balance
         |If|² - Imax² <= 0, |It|² - Imax² <= 0    limited branches
         box bounds on Vm, Pg, Qg, tau, theta      slack angle pinned

Multipliers are real: ``lam = [λP; λQ]`` prices the real and imaginary
balance rows and ``mu = [νf; νt]`` the current limits.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .admittance import TapState, network
from .case_model import BusType, InternalModel
from .global_variables import BINDING_TOL, PF_MAX_ITER, PF_TOL
from .interior_point import IpmOptions, NlpProblem, SolveStatus, solve_nlp
from .line_flow import d_flow_constraints, flow_constraints
from .power_balance import bus_injections, d2_mismatch, d_mismatch, dSbus_dV, mismatch
from .variables import VariableLayout, VariableVector, assemble

logger = logging.getLogger(__name__)

# Asymmetry of the assembled Lagrangian Hessian above which a warning is logged.
_HESSIAN_ASYMMETRY_TOL = 1e-9


class SolverError(RuntimeError):
    """Raised for malformed solver input, never for a failed solve."""


@dataclass(frozen=True)
class PowerFlowOptions:
    tol: float = PF_TOL
    max_iter: int = PF_MAX_ITER

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be non-negative, got {self.max_iter}")


@dataclass(frozen=True, eq=False)
class SolveResult:
    x: VariableVector
    objective: float
    lam: np.ndarray
    mu: np.ndarray
    mu_lower: np.ndarray
    mu_upper: np.ndarray
    iterations: int
    status: SolveStatus
    feasibility: float
    optimality: float = 0.0
    complementarity: float = 0.0
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


def dispatch_cost(m: InternalModel, Pg: np.ndarray) -> float:
    """Total generation cost of a per-unit dispatch."""
    if m.cost.shape[0] != m.ng:
        return float("nan")
    P = m.base_mva * np.asarray(Pg, dtype=float)
    c2, c1, c0 = m.cost.T
    return float(np.sum(c2 * P**2 + c1 * P + c0))


@dataclass(frozen=True, eq=False)
class OpfProblem:
    """Network model with the box bounds of every optimization variable.

    A variable whose lower and upper bound coincide is held at that value;
    the slack angle and fixed taps are expressed this way.
    """

    model: InternalModel
    xmin: np.ndarray
    xmax: np.ndarray

    def __post_init__(self) -> None:
        n = self.layout.n
        if self.xmin.shape != (n,) or self.xmax.shape != (n,):
            raise SolverError(f"bounds must have length {n}")
        if np.any(self.xmin > self.xmax):
            raise SolverError("a lower bound exceeds its upper bound")
        if self.model.cost.shape != (self.model.ng, 3):
            raise SolverError(f"expected {self.model.ng} cost rows, got {self.model.cost.shape[0]}")
        if not np.all(np.isfinite(self.model.cost)):
            raise SolverError("cost coefficients must be finite")

    @classmethod
    def from_model(cls, m: InternalModel, fixed_taps: bool = False) -> "OpfProblem":
        layout = VariableLayout.for_model(m)
        s = layout.slices
        xmin = np.full(layout.n, -np.inf)
        xmax = np.full(layout.n, np.inf)
        slack = s["Va"].start + m.ref
        xmin[slack] = xmax[slack] = m.Va0[m.ref]
        pairs = {
            "Vm": (m.Vmin, m.Vmax),
            "Pg": (m.Pmin, m.Pmax),
            "Qg": (m.Qmin, m.Qmax),
            "tau": (m.tau_min, m.tau_max),
            "theta": (m.theta_min, m.theta_max),
        }
        if fixed_taps:
            tau = m.tau0[m.adjustable]
            theta = m.theta0[m.adjustable]
            pairs["tau"] = (tau, tau)
            pairs["theta"] = (theta, theta)
        for name, (lo, hi) in pairs.items():
            xmin[s[name]] = lo
            xmax[s[name]] = hi
        return cls(m, xmin, xmax)

    @property
    def layout(self) -> VariableLayout:
        return VariableLayout.for_model(self.model)

    @property
    def equality_count(self) -> int:
        return 2 * self.model.nb

    @property
    def inequality_count(self) -> int:
        return 2 * len(self.model.constrained)

    def with_bounds(self, group: str, index: int, lower: float, upper: float) -> "OpfProblem":
        s = self.layout.slices[group]
        size = s.stop - s.start
        if not 0 <= index < size:
            raise SolverError(f"{group} index {index} out of range for {size} entries")
        xmin, xmax = self.xmin.copy(), self.xmax.copy()
        xmin[s.start + index] = lower
        xmax[s.start + index] = upper
        return replace(self, xmin=xmin, xmax=xmax)

    def fix_taps(self, tau: np.ndarray, theta: np.ndarray) -> "OpfProblem":
        """Same problem with every adjustable tap pinned at the given setting."""
        s = self.layout.slices
        xmin, xmax = self.xmin.copy(), self.xmax.copy()
        xmin[s["tau"]] = xmax[s["tau"]] = tau
        xmin[s["theta"]] = xmax[s["theta"]] = theta
        return replace(self, xmin=xmin, xmax=xmax)

    def bounds_of(self, group: str) -> tuple[np.ndarray, np.ndarray]:
        s = self.layout.slices[group]
        return self.xmin[s], self.xmax[s]

    def initial_point(self) -> VariableVector:
        """Flat voltages, dispatch at mid-range and taps at their written settings."""
        m = self.model
        layout = self.layout
        s = layout.slices
        x = np.zeros(layout.n)
        x[s["Va"]] = m.Va0[m.ref]
        x[s["Vm"]] = 1.0
        for name, written in (("Pg", m.Pg0), ("Qg", m.Qg0)):
            lo, hi = self.bounds_of(name)
            finite = np.isfinite(lo) & np.isfinite(hi)
            mid = 0.5 * (np.where(finite, lo, 0.0) + np.where(finite, hi, 0.0))
            x[s[name]] = np.where(finite, mid, written)
        x[s["tau"]] = m.tau0[m.adjustable]
        x[s["theta"]] = m.theta0[m.adjustable]
        return layout.split(np.clip(x, self.xmin, self.xmax))

    def objective(self, x: VariableVector) -> float:
        return dispatch_cost(self.model, x.Pg)

    def objective_gradient(self, x: VariableVector) -> np.ndarray:
        m = self.model
        base = m.base_mva
        c2, c1, _ = m.cost.T
        grad = np.zeros(self.layout.n)
        grad[self.layout.slices["Pg"]] = base * (2.0 * c2 * base * x.Pg + c1)
        return grad

    def objective_hessian(self) -> sp.csr_matrix:
        m = self.model
        layout = self.layout
        start = layout.offsets["Pg"]
        index = start + np.arange(m.ng)
        values = 2.0 * m.cost[:, 0] * m.base_mva**2
        return sp.csr_matrix((values, (index, index)), shape=(layout.n, layout.n))

    def equalities(self, x: VariableVector) -> tuple[np.ndarray, sp.csr_matrix]:
        G = mismatch(x, self.model)
        J = d_mismatch(x, self.model).stacked()
        return np.concatenate([G.real, G.imag]), sp.csr_matrix(sp.vstack([J.real, J.imag]))

    def inequalities(self, x: VariableVector) -> tuple[np.ndarray, sp.csr_matrix]:
        ev = flow_constraints(x, self.model)
        h = np.concatenate([ev.hf, ev.ht])
        if len(h) == 0:
            return h, sp.csr_matrix((0, self.layout.n))
        return h, d_flow_constraints(x, self.model).jacobian

    def as_nlp(self) -> NlpProblem:
        split = self.layout.split

        def objective(v: np.ndarray):
            x = split(v)
            return self.objective(x), self.objective_gradient(x)

        return NlpProblem(
            objective=objective,
            equalities=lambda v: self.equalities(split(v)),
            inequalities=lambda v: self.inequalities(split(v)),
            hessian=lambda v, lam, mu: lagrangian_hessian(split(v), self, lam, mu),
            xmin=self.xmin,
            xmax=self.xmax,
        )


def _split_multipliers(p: OpfProblem, lam: np.ndarray, mu: np.ndarray):
    nb = p.model.nb
    nc = len(p.model.constrained)
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if lam.shape != (2 * nb,):
        raise SolverError(f"expected {2 * nb} balance multipliers, got shape {lam.shape}")
    if mu.shape != (2 * nc,):
        raise SolverError(f"expected {2 * nc} flow multipliers, got shape {mu.shape}")
    return lam[:nb], lam[nb:], mu[:nc], mu[nc:]


def lagrangian_gradient(x: VariableVector, p: OpfProblem, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """∇f + Jgᵀ·lam + Jhᵀ·mu over the nonlinear constraints."""
    _split_multipliers(p, lam, mu)
    _, Jg = p.equalities(x)
    _, Jh = p.inequalities(x)
    return p.objective_gradient(x) + Jg.T @ lam + Jh.T @ mu


def lagrangian_hessian(
    x: VariableVector, p: OpfProblem, lam: np.ndarray, mu: np.ndarray, symmetrize: bool = True
) -> sp.csr_matrix:
    """Hessian of f + λPᵀ·Re G + λQᵀ·Im G + νfᵀ·hf + νtᵀ·ht."""
    lam_p, lam_q, nu_f, nu_t = _split_multipliers(p, lam, mu)
    m = p.model
    # Re(H(λP)) + Im(H(λQ)) = Re(H(λP - jλQ))
    balance = d2_mismatch(x, m, lam_p - 1j * lam_q).stacked().real
    H = p.objective_hessian() + sp.csr_matrix(balance)
    if len(m.constrained):
        H = H + d_flow_constraints(x, m).hessian(nu_f, nu_t)
    H = sp.csr_matrix(H)
    if not symmetrize:
        return H
    gap = abs(H - H.T)
    if gap.nnz:
        scale = max(abs(H).max(), 1.0)
        if gap.max() > _HESSIAN_ASYMMETRY_TOL * scale:
            logger.warning("Lagrangian Hessian asymmetry %.3e before symmetrization", gap.max())
    return sp.csr_matrix(0.5 * (H + H.T))


def solve_opf(
    p: OpfProblem, options: IpmOptions | None = None, start: VariableVector | None = None
) -> SolveResult:
    x0 = (start if start is not None else p.initial_point()).stack()
    logger.info(
        "solving OPF: %d buses, %d generators, %d adjustable branches, %d limited branches",
        p.model.nb, p.model.ng, p.model.na, len(p.model.constrained),
    )
    res = solve_nlp(p.as_nlp(), x0, options)
    return SolveResult(
        x=p.layout.split(res.x),
        objective=res.f,
        lam=res.lam,
        mu=res.mu,
        mu_lower=res.mu_lower,
        mu_upper=res.mu_upper,
        iterations=res.iterations,
        status=res.status,
        feasibility=res.feascond,
        optimality=res.gradcond,
        complementarity=res.compcond,
        history=res.history,
    )


def fix_taps(p: OpfProblem, x: VariableVector) -> OpfProblem:
    """Pin the adjustable taps of ``p`` at the setting found in ``x``."""
    return p.fix_taps(x.tau, x.theta)


def grid_search_taps(
    p: OpfProblem, branch: int, values: Iterable[float], options: IpmOptions | None = None
) -> list[tuple[float, SolveResult]]:
    """Solve with the tap of adjustable branch ``branch`` pinned at each value in turn."""
    if not 0 <= branch < p.model.na:
        raise SolverError(f"adjustable branch {branch} out of range for {p.model.na} adjustable branches")
    results = []
    for value in values:
        value = float(value)
        res = solve_opf(p.with_bounds("tau", branch, value, value), options)
        logger.info("tap %.4f: %s, objective %.6f", value, res.status.value, res.objective)
        results.append((value, res))
    return results


def binding_bounds(p: OpfProblem, x: VariableVector, tol: float = BINDING_TOL) -> list[tuple[str, int, str]]:
    """(group, index, side) of every free variable at a bound and every current limit at its rating."""
    out = []
    for name, s in p.layout.slices.items():
        values = x.stack()[s]
        lo, hi = p.xmin[s], p.xmax[s]
        free = lo < hi
        for i in np.flatnonzero(free & np.isfinite(lo) & (values - lo <= tol)):
            out.append((name, int(i), "lower"))
        for i in np.flatnonzero(free & np.isfinite(hi) & (hi - values <= tol)):
            out.append((name, int(i), "upper"))
    ev = flow_constraints(x, p.model)
    for side, h in (("If", ev.hf), ("It", ev.ht)):
        for i in np.flatnonzero(h >= -tol):
            out.append((side, int(ev.constrained[i]), "upper"))
    return out


def _power_flow_buses(m: InternalModel) -> tuple[np.ndarray, np.ndarray]:
    """PV and PQ bus indices; a PV bus without a generator is solved as PQ."""
    has_gen = np.zeros(m.nb, dtype=bool)
    has_gen[m.gen_bus] = True
    types = m.bus_types
    pv = np.flatnonzero((types == BusType.PV) & has_gen)
    pq = np.flatnonzero((types == BusType.PQ) | ((types == BusType.PV) & ~has_gen))
    return pv, pq


def newton_power_flow(
    m: InternalModel,
    taps: TapState | None = None,
    start: VariableVector | None = None,
    options: PowerFlowOptions | None = None,
) -> SolveResult:
    """Full Newton power flow in polar coordinates at fixed taps.

    Generator outputs are fixed except at the slack bus (P and Q) and PV
    buses (Q), which are updated after convergence so that the mismatch
    vanishes at every bus. ``iterations`` counts Newton updates.
    """
    opts = options or PowerFlowOptions()
    x = start if start is not None else VariableVector.from_model(m)
    if taps is not None:
        x = x.with_values(tau=taps.tau[m.adjustable], theta=taps.theta[m.adjustable])
    _, system = network(m, x.taps(m))
    Ybus = system.Ybus
    pv, pq = _power_flow_buses(m)
    pvpq = np.concatenate([pv, pq])
    n1, n2 = len(pvpq), len(pq)
    Sbus = m.Cg @ (x.Pg + 1j * x.Qg) - m.Sd

    def residual(V: np.ndarray) -> np.ndarray:
        mis = bus_injections(V, system) - Sbus
        return np.concatenate([mis[pvpq].real, mis[pq].imag])

    Va, Vm = x.Va.copy(), x.Vm.copy()
    V = Vm * np.exp(1j * Va)
    F = residual(V)
    norm = float(np.max(np.abs(F), initial=0.0))
    it = 0
    status = SolveStatus.ITER_LIMIT
    while True:
        logger.debug("power flow it %2d  max mismatch %.3e", it, norm)
        if not np.isfinite(norm):
            status = SolveStatus.NUMERIC_FAILURE
            break
        if norm < opts.tol:
            status = SolveStatus.CONVERGED
            break
        if it >= opts.max_iter:
            break
        dVa, dVm = dSbus_dV(Ybus, V)
        J = assemble(
            [
                (0, 0, dVa[pvpq][:, pvpq].real),
                (0, n1, dVm[pvpq][:, pq].real),
                (n1, 0, dVa[pq][:, pvpq].imag),
                (n1, n1, dVm[pq][:, pq].imag),
            ],
            (n1 + n2, n1 + n2),
            dtype=float,
        )
        try:
            dx = spla.splu(sp.csc_matrix(J)).solve(-F)
        except RuntimeError as exc:
            logger.warning("power flow Jacobian is singular: %s", exc)
            status = SolveStatus.NUMERIC_FAILURE
            break
        if not np.all(np.isfinite(dx)):
            status = SolveStatus.NUMERIC_FAILURE
            break
        Va[pvpq] += dx[:n1]
        Vm[pq] += dx[n1:]
        V = Vm * np.exp(1j * Va)
        F = residual(V)
        norm = float(np.max(np.abs(F), initial=0.0))
        it += 1

    Pg, Qg = x.Pg.copy(), x.Qg.copy()
    if status is SolveStatus.CONVERGED:
        logger.info("power flow converged in %d iterations", it)
        Pg, Qg = _balance_dispatch(m, V, system, pv, Pg, Qg)
    else:
        logger.warning("power flow stopped after %d iterations: %s", it, status.value)
    solved = x.with_values(Va=Va, Vm=Vm, Pg=Pg, Qg=Qg)
    n = solved.layout.n
    return SolveResult(
        x=solved,
        objective=dispatch_cost(m, Pg),
        lam=np.zeros(0),
        mu=np.zeros(0),
        mu_lower=np.zeros(n),
        mu_upper=np.zeros(n),
        iterations=it,
        status=status,
        feasibility=float(np.max(np.abs(mismatch(solved, m)), initial=0.0)),
    )


def _balance_dispatch(m: InternalModel, V, system, pv, Pg, Qg) -> tuple[np.ndarray, np.ndarray]:
    """Share the slack P, Q and PV-bus Q needs equally among the generators at each bus."""
    needed = bus_injections(V, system) + m.Sd
    for b in np.concatenate([[m.ref], pv]):
        gens = np.flatnonzero(m.gen_bus == b)
        if len(gens) == 0:
            continue
        delta = needed[b] - np.sum(Pg[gens] + 1j * Qg[gens])
        if b == m.ref:
            Pg[gens] += delta.real / len(gens)
        Qg[gens] += delta.imag / len(gens)
    return Pg, Qg


__all__ = [
    "IpmOptions",
    "OpfProblem",
    "PowerFlowOptions",
    "SolveResult",
    "SolveStatus",
    "SolverError",
    "binding_bounds",
    "dispatch_cost",
    "fix_taps",
    "grid_search_taps",
    "lagrangian_gradient",
    "lagrangian_hessian",
    "newton_power_flow",
    "solve_opf",
]
