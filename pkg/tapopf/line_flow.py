"""Branch currents, current-limit constraints and their derivatives.

The limit on a branch is written in squared form ``|I|² - Imax² <= 0``;
only branches with ``Imax > 0`` are constrained.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .admittance import BranchAdmittances, SystemMatrices, TapState, branch_admittances, sparse_diag
from .case_model import InternalModel
from .power_balance import NetworkState
from .variables import DerivativeBundle, HessianBlocks, VariableVector, assemble


class Side(str, enum.Enum):
    FROM = "from"
    TO = "to"


def branch_currents(V: np.ndarray, sys: SystemMatrices) -> tuple[np.ndarray, np.ndarray]:
    return sys.Yf @ V, sys.Yt @ V


def dIbr_dV(Ybr: sp.csr_matrix, V: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Current derivatives with respect to voltage angle and magnitude."""
    dVa = Ybr @ sparse_diag(1j * V)
    dVm = Ybr @ sparse_diag(V / np.abs(V))
    return sp.csr_matrix(dVa), sp.csr_matrix(dVm)


def _branch_matrix(state: NetworkState, which: Side) -> sp.csr_matrix:
    return state.system.Yf if which is Side.FROM else state.system.Yt


def _tap_columns(
    m: InternalModel, ba: BranchAdmittances, taps: TapState, V: np.ndarray, which: Side
) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of ∂I/∂τ and ∂I/∂θ over every branch."""
    Vf = m.Cf @ V
    Vt = m.Ct @ V
    inv_tau = 1.0 / taps.tau
    if which is Side.FROM:
        return -(2.0 * ba.Yff * Vf + ba.Yft * Vt) * inv_tau, 1j * ba.Yft * Vt
    return -ba.Ytf * Vf * inv_tau, -1j * ba.Ytf * Vf


def _side_bundle(m: InternalModel, state: NetworkState, which: Side) -> DerivativeBundle:
    dVa, dVm = dIbr_dV(_branch_matrix(state, which), state.V)
    dtau, dtheta = _tap_columns(m, state.admittances, state.taps, state.V, which)
    adj = m.adjustable
    rows, cols = adj, np.arange(len(adj))
    zeros = sp.csr_matrix((m.nl, m.ng), dtype=complex)
    return DerivativeBundle(
        dVa=dVa,
        dVm=dVm,
        dPg=zeros,
        dQg=zeros.copy(),
        dTau=sp.csr_matrix((dtau[adj], (rows, cols)), shape=(m.nl, len(adj))),
        dTheta=sp.csr_matrix((dtheta[adj], (rows, cols)), shape=(m.nl, len(adj))),
    )


def d_currents(x: VariableVector, m: InternalModel, which: Side | str) -> DerivativeBundle:
    return _side_bundle(m, NetworkState.evaluate(x, m), Side(which))


def _side_gradient(
    m: InternalModel, ba: BranchAdmittances, taps: TapState, V: np.ndarray, mu: np.ndarray, which: Side
) -> np.ndarray:
    """(∂I/∂X)ᵀ·μ with vector products only."""
    if which is Side.FROM:
        ybr_mu = m.Cf.T @ (ba.Yff * mu) + m.Ct.T @ (ba.Yft * mu)
    else:
        ybr_mu = m.Cf.T @ (ba.Ytf * mu) + m.Ct.T @ (ba.Ytt * mu)
    dtau, dtheta = _tap_columns(m, ba, taps, V, which)
    adj = m.adjustable
    zeros = np.zeros(m.ng, dtype=complex)
    return np.concatenate(
        [1j * V * ybr_mu, V / np.abs(V) * ybr_mu, zeros, zeros, (dtau * mu)[adj], (dtheta * mu)[adj]]
    )


def current_gradients(
    x: VariableVector, m: InternalModel, mu_from: np.ndarray, mu_to: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(∂I_f/∂X)ᵀ·μ_f and (∂I_t/∂X)ᵀ·μ_t without assembling either Jacobian."""
    taps = x.taps(m)
    ba = branch_admittances(m, taps)
    V = x.V
    return (
        _side_gradient(m, ba, taps, V, np.asarray(mu_from, dtype=complex), Side.FROM),
        _side_gradient(m, ba, taps, V, np.asarray(mu_to, dtype=complex), Side.TO),
    )


def d2Ibr_dV2(
    Ybr: sp.csr_matrix, V: np.ndarray, mu: np.ndarray
) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Angle/magnitude second derivatives of μᵀ·I: (Haa, Hav, Hva, Hvv)."""
    nb = len(V)
    Haa = sparse_diag(-(Ybr.T @ mu) * V)
    Hva = -1j * Haa @ sparse_diag(1.0 / np.abs(V))
    Hav = Hva
    Hvv = sp.csr_matrix((nb, nb), dtype=complex)
    return Haa, sp.csr_matrix(Hav), sp.csr_matrix(Hva), Hvv


def _mixed_blocks(m: InternalModel, state: NetworkState, mu: np.ndarray, which: Side):
    """I_Θτ, I_Θθ, I_Vτ, I_Vθ over every branch (nb × nl)."""
    ba = state.admittances
    V = state.V
    jV = sparse_diag(1j * V)
    VVm = sparse_diag(V / np.abs(V))
    inv_tau = sparse_diag(1.0 / state.taps.tau)
    if which is Side.FROM:
        tau_part = (m.Cf.T @ sparse_diag(mu * -2.0 * ba.Yff) + m.Ct.T @ sparse_diag(mu * -ba.Yft)) @ inv_tau
        theta_part = m.Ct.T @ sparse_diag(mu * 1j * ba.Yft)
    else:
        tau_part = m.Cf.T @ sparse_diag(mu * -ba.Ytf) @ inv_tau
        theta_part = m.Cf.T @ sparse_diag(mu * -1j * ba.Ytf)
    return jV @ tau_part, jV @ theta_part, VVm @ tau_part, VVm @ theta_part


def _diagonal_blocks(m: InternalModel, state: NetworkState, mu: np.ndarray, which: Side):
    """Diagonals of I_ττ, I_τθ, I_θθ."""
    ba = state.admittances
    Vf = m.Cf @ state.V
    Vt = m.Ct @ state.V
    inv_tau = 1.0 / state.taps.tau
    if which is Side.FROM:
        tt = inv_tau**2 * (6.0 * Vf * mu * ba.Yff + 2.0 * Vt * mu * ba.Yft)
        th = -inv_tau * Vt * mu * 1j * ba.Yft
        hh = -Vt * mu * ba.Yft
    else:
        tt = 2.0 * inv_tau**2 * Vf * mu * ba.Ytf
        th = inv_tau * Vf * mu * 1j * ba.Ytf
        hh = -Vf * mu * ba.Ytf
    return tt, th, hh


def d2_currents(x: VariableVector, m: InternalModel, mu: np.ndarray, which: Side | str) -> HessianBlocks:
    which = Side(which)
    mu = np.asarray(mu, dtype=complex)
    if mu.shape != (m.nl,):
        raise ValueError(f"multiplier must have length {m.nl}, got shape {mu.shape}")
    state = NetworkState.evaluate(x, m)
    Haa, Hav, Hva, Hvv = d2Ibr_dV2(_branch_matrix(state, which), state.V, mu)
    adj = m.adjustable
    H_at, H_ah, H_vt, H_vh = (sp.csr_matrix(h)[:, adj] for h in _mixed_blocks(m, state, mu, which))
    tt, th, hh = (d[adj] for d in _diagonal_blocks(m, state, mu, which))
    H_th = sparse_diag(th)
    blocks = {
        ("Va", "Va"): Haa,
        ("Va", "Vm"): Hav,
        ("Vm", "Va"): Hva,
        ("Vm", "Vm"): Hvv,
        ("Va", "tau"): H_at,
        ("Va", "theta"): H_ah,
        ("Vm", "tau"): H_vt,
        ("Vm", "theta"): H_vh,
        ("tau", "Va"): H_at.T,
        ("theta", "Va"): H_ah.T,
        ("tau", "Vm"): H_vt.T,
        ("theta", "Vm"): H_vh.T,
        ("tau", "tau"): sparse_diag(tt),
        ("tau", "theta"): H_th,
        ("theta", "tau"): H_th.T,
        ("theta", "theta"): sparse_diag(hh),
    }
    return HessianBlocks(x.layout, {key: sp.csr_matrix(b) for key, b in blocks.items()})


def current_row_blocks(
    x: VariableVector, m: InternalModel, mu: np.ndarray, which: Side | str
) -> dict[tuple[str, str], sp.csr_matrix]:
    """I_τΘ, I_τV, I_θΘ, I_θV and I_θτ taken directly as derivatives of the tap gradients."""
    which = Side(which)
    mu = np.asarray(mu, dtype=complex)
    state = NetworkState.evaluate(x, m)
    ba = state.admittances
    V = state.V
    jV = sparse_diag(1j * V)
    VVm = sparse_diag(V / np.abs(V))
    inv_tau = 1.0 / state.taps.tau
    if which is Side.FROM:
        tau_rows = sparse_diag(inv_tau * -2.0 * ba.Yff * mu) @ m.Cf + sparse_diag(inv_tau * -ba.Yft * mu) @ m.Ct
        theta_rows = sparse_diag(1j * ba.Yft * mu) @ m.Ct
    else:
        tau_rows = sparse_diag(inv_tau * -ba.Ytf * mu) @ m.Cf
        theta_rows = sparse_diag(-1j * ba.Ytf * mu) @ m.Cf
    # θ columns scale as 1/τ of their own branch
    _, dtheta = _tap_columns(m, ba, state.taps, V, which)
    theta_tau = -inv_tau * dtheta * mu
    adj = m.adjustable
    return {
        ("tau", "Va"): sp.csr_matrix(tau_rows @ jV)[adj, :],
        ("tau", "Vm"): sp.csr_matrix(tau_rows @ VVm)[adj, :],
        ("theta", "Va"): sp.csr_matrix(theta_rows @ jV)[adj, :],
        ("theta", "Vm"): sp.csr_matrix(theta_rows @ VVm)[adj, :],
        ("theta", "tau"): sparse_diag(theta_tau[adj]),
    }


@dataclass(frozen=True, eq=False)
class FlowConstraintEval:
    If: np.ndarray
    It: np.ndarray
    hf: np.ndarray
    ht: np.ndarray
    constrained: np.ndarray


def _currents(m: InternalModel, ba: BranchAdmittances, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Vf = m.Cf @ V
    Vt = m.Ct @ V
    return ba.Yff * Vf + ba.Yft * Vt, ba.Ytf * Vf + ba.Ytt * Vt


def flow_constraints(x: VariableVector, m: InternalModel) -> FlowConstraintEval:
    If, It = _currents(m, branch_admittances(m, x.taps(m)), x.V)
    idx = m.constrained
    limit = m.imax[idx] ** 2
    return FlowConstraintEval(
        If=If,
        It=It,
        hf=np.abs(If[idx]) ** 2 - limit,
        ht=np.abs(It[idx]) ** 2 - limit,
        constrained=idx,
    )


@dataclass(frozen=True, eq=False)
class FlowConstraintDerivatives:
    """Real Jacobians of hf/ht (constrained rows) and their Hessian contraction."""

    x: VariableVector
    model: InternalModel
    If: np.ndarray
    It: np.ndarray
    dIf: sp.csr_matrix
    dIt: sp.csr_matrix
    dhf: sp.csr_matrix
    dht: sp.csr_matrix

    @property
    def jacobian(self) -> sp.csr_matrix:
        nc = self.dhf.shape[0]
        return assemble([(0, 0, self.dhf), (nc, 0, self.dht)], (2 * nc, self.x.layout.n), dtype=float)

    def hessian(self, nu_f: np.ndarray, nu_t: np.ndarray) -> sp.csr_matrix:
        """∂²(ν_fᵀ·hf + ν_tᵀ·ht)/∂X² for real multipliers on the constrained branches."""
        m = self.model
        idx = m.constrained
        n = self.x.layout.n
        total = sp.csr_matrix((n, n), dtype=float)
        for side, current, dI, nu in (
            (Side.FROM, self.If, self.dIf, nu_f),
            (Side.TO, self.It, self.dIt, nu_t),
        ):
            nu = np.asarray(nu, dtype=float)
            if nu.shape != (len(idx),):
                raise ValueError(f"multiplier must have length {len(idx)}, got shape {nu.shape}")
            if len(idx) == 0:
                continue
            mu = np.zeros(m.nl, dtype=complex)
            mu[idx] = nu * np.conj(current[idx])
            second = d2_currents(self.x, m, mu, side).stacked()
            rows = dI[idx, :]
            first = rows.T @ sparse_diag(nu) @ rows.conj()
            total = total + 2.0 * (second + first).real
        return sp.csr_matrix(total)


def d_flow_constraints(x: VariableVector, m: InternalModel) -> FlowConstraintDerivatives:
    state = NetworkState.evaluate(x, m)
    If, It = branch_currents(state.V, state.system)
    dIf = _side_bundle(m, state, Side.FROM).stacked()
    dIt = _side_bundle(m, state, Side.TO).stacked()
    idx = m.constrained

    def jac(current: np.ndarray, dI: sp.csr_matrix) -> sp.csr_matrix:
        return sp.csr_matrix((2.0 * sparse_diag(np.conj(current[idx])) @ dI[idx, :]).real)

    return FlowConstraintDerivatives(
        x=x, model=m, If=If, It=It, dIf=dIf, dIt=dIt, dhf=jac(If, dIf), dht=jac(It, dIt)
    )


def limit_gradient(x: VariableVector, m: InternalModel, nu_f: np.ndarray, nu_t: np.ndarray) -> np.ndarray:
    """∂(ν_fᵀ·hf + ν_tᵀ·ht)/∂X for real multipliers on the constrained branches.

    Equals ``d_flow_constraints(x, m).jacobian.T @ [ν_f; ν_t]`` computed with
    vector products only.
    """
    taps = x.taps(m)
    ba = branch_admittances(m, taps)
    V = x.V
    If, It = _currents(m, ba, V)
    idx = m.constrained
    w_f = np.zeros(m.nl, dtype=complex)
    w_t = np.zeros(m.nl, dtype=complex)
    w_f[idx] = np.asarray(nu_f, dtype=float) * np.conj(If[idx])
    w_t[idx] = np.asarray(nu_t, dtype=float) * np.conj(It[idx])
    g_f = _side_gradient(m, ba, taps, V, w_f, Side.FROM)
    g_t = _side_gradient(m, ba, taps, V, w_t, Side.TO)
    return 2.0 * (g_f + g_t).real


__all__ = [
    "FlowConstraintDerivatives",
    "FlowConstraintEval",
    "Side",
    "branch_currents",
    "current_gradients",
    "current_row_blocks",
    "d2Ibr_dV2",
    "d2_currents",
    "dIbr_dV",
    "d_currents",
    "d_flow_constraints",
    "flow_constraints",
    "limit_gradient",
]
