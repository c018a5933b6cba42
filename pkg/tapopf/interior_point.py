"""
Primal-dual interior point method for smooth nonlinear programs

    min f(x)   s.t.   g(x) = 0,   h(x) <= 0,   xmin <= x <= xmax

Inequalities get a slack ``z > 0`` with ``h + z = 0``. Each iteration
solves the reduced Newton system

    [ M    Jgᵀ ] [dx]   [-N]      M = Lxx + Jhᵀ·[μ/z]·Jh
    [ Jg   0   ] [dλ] = [-g]      N = Lx + Jhᵀ·[1/z]·([μ]·h + r)

with a sparse LU factorization, once for an affine predictor (r = 0)
and once for the centered corrector. Variables with equal bounds are
removed before the solve; finite bounds of the remaining variables are
appended to ``h`` as linear rows.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .admittance import sparse_diag
from .global_variables import (
    IPM_GRAD_TOL,
    IPM_INITIAL_CENTERING,
    IPM_MAX_ITER,
    IPM_MAX_REGULARIZATION,
    IPM_REGULARIZATION,
    IPM_SLACK_FLOOR,
    IPM_STEP_TO_BOUNDARY,
    IPM_TOL,
)
from .variables import assemble

logger = logging.getLogger(__name__)

# Iterates larger than this are treated as divergence.
_DIVERGENCE_LIMIT = 1e10


class SolveStatus(str, enum.Enum):
    CONVERGED = "Converged"
    ITER_LIMIT = "IterLimit"
    INFEASIBLE = "Infeasible"
    NUMERIC_FAILURE = "NumericFailure"


@dataclass(frozen=True)
class IpmOptions:
    max_iter: int = IPM_MAX_ITER
    feas_tol: float = IPM_TOL
    grad_tol: float = IPM_GRAD_TOL
    comp_tol: float = IPM_TOL
    cost_tol: float = IPM_GRAD_TOL
    step_to_boundary: float = IPM_STEP_TO_BOUNDARY
    initial_centering: float = IPM_INITIAL_CENTERING
    slack_floor: float = IPM_SLACK_FLOOR
    regularization: float = IPM_REGULARIZATION
    max_regularization: float = IPM_MAX_REGULARIZATION
    predictor_corrector: bool = True

    def __post_init__(self) -> None:
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be non-negative, got {self.max_iter}")
        for name in ("feas_tol", "grad_tol", "comp_tol", "cost_tol", "slack_floor", "regularization"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.step_to_boundary < 1.0:
            raise ValueError(f"step_to_boundary must lie in (0, 1), got {self.step_to_boundary}")
        if not 0.0 < self.initial_centering <= 1.0:
            raise ValueError(f"initial_centering must lie in (0, 1], got {self.initial_centering}")
        if self.max_regularization < self.regularization:
            raise ValueError("max_regularization must not be smaller than regularization")


@dataclass(frozen=True)
class NlpProblem:
    """Callbacks of a nonlinear program over the full variable vector.

    ``objective(x) -> (f, ∇f)``, ``equalities(x) -> (g, Jg)``,
    ``inequalities(x) -> (h, Jh)`` and ``hessian(x, λ, μ)`` returning the
    Hessian of ``f + λᵀg + μᵀh``. Jacobians have one column per variable.
    """

    objective: Callable[[np.ndarray], tuple[float, np.ndarray]]
    equalities: Callable[[np.ndarray], tuple[np.ndarray, sp.spmatrix]]
    inequalities: Callable[[np.ndarray], tuple[np.ndarray, sp.spmatrix]]
    hessian: Callable[[np.ndarray, np.ndarray, np.ndarray], sp.spmatrix]
    xmin: np.ndarray
    xmax: np.ndarray


@dataclass(frozen=True, eq=False)
class IpmResult:
    x: np.ndarray
    f: float
    lam: np.ndarray
    mu: np.ndarray
    mu_lower: np.ndarray
    mu_upper: np.ndarray
    status: SolveStatus
    iterations: int
    feascond: float
    gradcond: float
    compcond: float
    costcond: float
    history: tuple[float, ...] = field(default=())

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED


@dataclass(frozen=True, eq=False)
class _Point:
    f: float
    df: np.ndarray
    g: np.ndarray
    Jg: sp.csr_matrix
    h: np.ndarray
    Jh: sp.csr_matrix
    # full-width values, used to price the eliminated variables
    df_full: np.ndarray
    Jg_full: sp.csr_matrix
    Jh_full: sp.csr_matrix


def _max_step(v: np.ndarray, dv: np.ndarray, xi: float) -> float:
    """Largest step in (0, 1] keeping ``v + α·dv`` a fraction ``xi`` inside the boundary."""
    shrinking = dv < 0
    if not np.any(shrinking):
        return 1.0
    return float(min(1.0, xi * np.min(-v[shrinking] / dv[shrinking])))


class _ReducedKKT:
    """LU factorization of the reduced Newton matrix, regularized until it factors."""

    def __init__(self, M: sp.csr_matrix, Jg: sp.csr_matrix, delta: float, max_delta: float) -> None:
        self.nf = M.shape[0]
        self.neq = Jg.shape[0]
        self.Jg = Jg
        self.M = M
        self.delta = delta
        self.max_delta = max_delta
        self.lu = None

    def _matrix(self, delta: float, dual: bool) -> sp.csc_matrix:
        primal = self.M + delta * sp.identity(self.nf, format="csr")
        if self.neq == 0:
            return sp.csc_matrix(primal)
        lower_right = -delta * sp.identity(self.neq, format="csr") if dual else None
        return sp.bmat([[primal, self.Jg.T], [self.Jg, lower_right]], format="csc")

    def factor(self, first_solve: Callable[["_ReducedKKT"], object]):
        """Factor with growing regularization until ``first_solve`` gives a finite answer."""
        delta = self.delta
        dual = False
        while delta <= self.max_delta:
            try:
                self.lu = spla.splu(self._matrix(delta, dual))
            except RuntimeError as exc:
                logger.debug("KKT factorization failed with regularization %.1e: %s", delta, exc)
                self.lu = None
            if self.lu is not None:
                self.delta = delta
                result = first_solve(self)
                if result is not None:
                    return result
            delta *= 100.0
            dual = True
        return None

    def solve(self, rhs: np.ndarray) -> np.ndarray | None:
        sol = self.lu.solve(rhs)
        return sol if np.all(np.isfinite(sol)) else None


def solve_nlp(problem: NlpProblem, x0: np.ndarray, options: IpmOptions | None = None) -> IpmResult:
    opts = options or IpmOptions()
    xmin = np.asarray(problem.xmin, dtype=float)
    xmax = np.asarray(problem.xmax, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    if xmin.shape != (n,) or xmax.shape != (n,):
        raise ValueError("bounds must match the length of the starting point")
    if np.any(xmin > xmax):
        raise ValueError("lower bound exceeds upper bound")

    fixed = xmin == xmax
    free = np.flatnonzero(~fixed)
    nf = len(free)
    base = np.clip(x0, xmin, xmax)
    base[fixed] = xmin[fixed]
    fmin, fmax = xmin[free], xmax[free]
    upper = np.flatnonzero(np.isfinite(fmax))
    lower = np.flatnonzero(np.isfinite(fmin))
    nu, nlo = len(upper), len(lower)
    Eu = sp.csr_matrix((np.ones(nu), (np.arange(nu), upper)), shape=(nu, nf))
    El = sp.csr_matrix((-np.ones(nlo), (np.arange(nlo), lower)), shape=(nlo, nf))

    def expand(y: np.ndarray) -> np.ndarray:
        full = base.copy()
        full[free] = y
        return full

    def evaluate(y: np.ndarray) -> _Point:
        full = expand(y)
        f, df = problem.objective(full)
        g, Jg = problem.equalities(full)
        hn, Jh = problem.inequalities(full)
        Jg = sp.csr_matrix(Jg, dtype=float)
        Jh = sp.csr_matrix(Jh, dtype=float)
        nh = len(hn)
        h = np.concatenate([np.asarray(hn, dtype=float), y[upper] - fmax[upper], fmin[lower] - y[lower]])
        Jh_all = assemble(
            [(0, 0, Jh[:, free]), (nh, 0, Eu), (nh + nu, 0, El)], (nh + nu + nlo, nf), dtype=float
        )
        df = np.asarray(df, dtype=float)
        return _Point(float(f), df[free], np.asarray(g, dtype=float), Jg[:, free], h, Jh_all, df, Jg, Jh)

    y = base[free].copy()
    pt = evaluate(y)
    nh = pt.Jh_full.shape[0]
    niq = len(pt.h)
    neq = len(pt.g)
    z = np.maximum(-pt.h, opts.slack_floor)
    mu = np.maximum(1.0 / z, opts.slack_floor)
    lam = np.zeros(neq)
    logger.info("interior point: %d free of %d variables, %d equalities, %d inequalities", nf, n, neq, niq)

    status = SolveStatus.ITER_LIMIT
    history: list[float] = []
    f_prev = pt.f
    it = 0
    conds = (np.inf, np.inf, np.inf, np.inf)
    while True:
        Lx = pt.df + pt.Jg.T @ lam + pt.Jh.T @ mu
        conds = _conditions(pt, y, z, lam, mu, Lx, f_prev)
        feascond, gradcond, compcond, costcond = conds
        history.append(max(feascond, gradcond, compcond))
        logger.debug(
            "it %3d  f %.8g  feas %.2e  grad %.2e  comp %.2e  cost %.2e",
            it, pt.f, feascond, gradcond, compcond, costcond,
        )
        if not all(np.isfinite(c) for c in conds):
            status = SolveStatus.NUMERIC_FAILURE
            break
        if (
            feascond < opts.feas_tol
            and gradcond < opts.grad_tol
            and compcond < opts.comp_tol
            and costcond < opts.cost_tol
        ):
            status = SolveStatus.CONVERGED
            break
        if it >= opts.max_iter:
            status = SolveStatus.INFEASIBLE if feascond > np.sqrt(opts.feas_tol) else SolveStatus.ITER_LIMIT
            break

        Lxx = sp.csr_matrix(problem.hessian(expand(y), lam, mu[:nh]), dtype=float)[free][:, free]
        step = _newton_step(pt, Lxx, Lx, z, mu, opts, centered=(it == 0))
        if step is None:
            logger.warning("interior point: KKT system singular beyond regularization %.1e", opts.max_regularization)
            status = SolveStatus.NUMERIC_FAILURE
            break
        dy, dlam, dz, dmu = step
        alpha_p = _max_step(z, dz, opts.step_to_boundary)
        alpha_d = _max_step(mu, dmu, opts.step_to_boundary)
        y = y + alpha_p * dy
        z = z + alpha_p * dz
        lam = lam + alpha_d * dlam
        mu = mu + alpha_d * dmu
        it += 1
        if np.max(np.abs(y), initial=0.0) > _DIVERGENCE_LIMIT or not np.all(np.isfinite(y)):
            status = SolveStatus.NUMERIC_FAILURE
            break
        f_prev = pt.f
        pt = evaluate(y)

    if status is SolveStatus.CONVERGED:
        logger.info("interior point converged in %d iterations, f = %.10g", it, pt.f)
    else:
        logger.warning("interior point stopped after %d iterations: %s", it, status.value)
    return _result(pt, expand(y), lam, mu, status, it, conds, history, free, fixed, upper, lower, nh, n)


def _conditions(pt: _Point, y, z, lam, mu, Lx, f_prev) -> tuple[float, float, float, float]:
    norm = lambda v: float(np.max(np.abs(v), initial=0.0))  # noqa: E731
    feascond = max(norm(pt.g), float(np.max(pt.h, initial=0.0)))
    gradcond = norm(Lx) / (1.0 + max(norm(lam), norm(mu)))
    compcond = float(z @ mu) / (1.0 + norm(y))
    costcond = abs(pt.f - f_prev) / (1.0 + abs(f_prev))
    return feascond, gradcond, compcond, costcond


def _newton_step(pt: _Point, Lxx, Lx, z, mu, opts: IpmOptions, centered: bool):
    niq = len(z)
    zinv = 1.0 / z
    M = sp.csr_matrix(Lxx + pt.Jh.T @ sparse_diag(mu * zinv) @ pt.Jh)
    kkt = _ReducedKKT(M, pt.Jg, opts.regularization, opts.max_regularization)
    nf = M.shape[0]

    def direction(system: _ReducedKKT, r: np.ndarray):
        N = Lx + pt.Jh.T @ (zinv * (mu * pt.h + r))
        sol = system.solve(np.concatenate([-N, -pt.g]))
        if sol is None:
            return None
        dx, dlam = sol[:nf], sol[nf:]
        dz = -pt.h - z - pt.Jh @ dx
        dmu = -mu + zinv * (r - mu * dz)
        return dx, dlam, dz, dmu

    gap = float(z @ mu) / niq if niq else 0.0
    plain = np.full(niq, opts.initial_centering * gap)
    if centered or not opts.predictor_corrector or niq == 0:
        return kkt.factor(lambda system: direction(system, plain))

    affine = kkt.factor(lambda system: direction(system, np.zeros(niq)))
    if affine is None:
        return None
    _, _, dz_aff, dmu_aff = affine
    alpha_p = _max_step(z, dz_aff, 1.0)
    alpha_d = _max_step(mu, dmu_aff, 1.0)
    gap_aff = float((z + alpha_p * dz_aff) @ (mu + alpha_d * dmu_aff)) / niq
    sigma = float(np.clip((gap_aff / gap) ** 3, 0.0, 1.0)) if gap > 0 else opts.initial_centering
    corrected = direction(kkt, sigma * gap - dz_aff * dmu_aff)
    if corrected is None:
        return direction(kkt, plain)
    return corrected


def _result(pt, x, lam, mu, status, it, conds, history, free, fixed, upper, lower, nh, n) -> IpmResult:
    nu = len(upper)
    mu_upper = np.zeros(n)
    mu_lower = np.zeros(n)
    mu_upper[free[upper]] = mu[nh:nh + nu]
    mu_lower[free[lower]] = mu[nh + nu:]
    if np.any(fixed):
        # stationarity of the eliminated variables gives their bound prices
        r = pt.df_full + pt.Jg_full.T @ lam + pt.Jh_full.T @ mu[:nh]
        mu_upper[fixed] = np.maximum(-r[fixed], 0.0)
        mu_lower[fixed] = np.maximum(r[fixed], 0.0)
    feascond, gradcond, compcond, costcond = conds
    return IpmResult(
        x=x,
        f=pt.f,
        lam=lam,
        mu=mu[:nh].copy(),
        mu_lower=mu_lower,
        mu_upper=mu_upper,
        status=status,
        iterations=it,
        feascond=feascond,
        gradcond=gradcond,
        compcond=compcond,
        costcond=costcond,
        history=tuple(history),
    )


__all__ = ["IpmOptions", "IpmResult", "NlpProblem", "SolveStatus", "solve_nlp"]
