"""Power balance mismatch G(X) = Sbus + Sd - Cg·Sg and its derivatives.

Second derivatives are contracted with a complex-capable multiplier λ
(no conjugation of λ): ``block(a, b) = ∂/∂b (G_aᵀ λ)``. Tap columns are
computed for every branch and sliced to the adjustable ones on output.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .admittance import (
    BranchAdmittances,
    SystemMatrices,
    TapState,
    dYbusGamma_dtau,
    dYbusGamma_dtheta,
    network,
    sparse_diag,
)
from .case_model import InternalModel
from .variables import DerivativeBundle, HessianBlocks, VariableVector


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Admittances and voltages evaluated at one operating point."""

    taps: TapState
    admittances: BranchAdmittances
    system: SystemMatrices
    V: np.ndarray

    @classmethod
    def evaluate(cls, x: VariableVector, m: InternalModel) -> "NetworkState":
        taps = x.taps(m)
        ba, sys = network(m, taps)
        return cls(taps, ba, sys, x.V)


def bus_injections(V: np.ndarray, sys: SystemMatrices) -> np.ndarray:
    """Complex bus power injections [V]·conj(Ybus·V)."""
    return V * np.conj(sys.Ybus @ V)


def mismatch(x: VariableVector, m: InternalModel) -> np.ndarray:
    state = NetworkState.evaluate(x, m)
    return bus_injections(state.V, state.system) + m.Sd - m.Cg @ (x.Pg + 1j * x.Qg)


def dSbus_dV(Ybus: sp.csr_matrix, V: np.ndarray) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Derivatives of bus injections with respect to voltage angle and magnitude."""
    Ibus = Ybus @ V
    diagV = sparse_diag(V)
    diagIbus = sparse_diag(Ibus)
    diagVnorm = sparse_diag(V / np.abs(V))
    dS_dVm = diagV @ (Ybus @ diagVnorm).conj() + diagIbus.conj() @ diagVnorm
    dS_dVa = 1j * diagV @ (diagIbus - Ybus @ diagV).conj()
    return sp.csr_matrix(dS_dVa), sp.csr_matrix(dS_dVm)


def dSbus_dtaps(
    m: InternalModel, state: NetworkState
) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Derivatives of bus injections with respect to every branch's τ and θ."""
    diagV = sparse_diag(state.V)
    dtau = diagV @ dYbusGamma_dtau(m, state.admittances, state.taps, state.V).conj()
    dtheta = diagV @ dYbusGamma_dtheta(m, state.admittances, state.V).conj()
    return sp.csr_matrix(dtau), sp.csr_matrix(dtheta)


def d_mismatch(x: VariableVector, m: InternalModel) -> DerivativeBundle:
    state = NetworkState.evaluate(x, m)
    dVa, dVm = dSbus_dV(state.system.Ybus, state.V)
    dtau, dtheta = dSbus_dtaps(m, state)
    Cg = sp.csr_matrix(m.Cg, dtype=complex)
    return DerivativeBundle(
        dVa=dVa,
        dVm=dVm,
        dPg=-Cg,
        dQg=-1j * Cg,
        dTau=dtau[:, m.adjustable],
        dTheta=dtheta[:, m.adjustable],
    )


def d2Sbus_dV2(
    Ybus: sp.csr_matrix, V: np.ndarray, lam: np.ndarray
) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Angle/magnitude second derivatives of λᵀ·Sbus: (Gaa, Gav, Gva, Gvv)."""
    Ibus = Ybus @ V
    diaglam = sparse_diag(lam)
    diagV = sparse_diag(V)

    A = sparse_diag(lam * V)
    B = Ybus @ diagV
    C = A @ B.conj()
    D = Ybus.conj().T @ diagV
    E = diagV.conj() @ (D @ diaglam - sparse_diag(D @ lam))
    F = C - A @ sparse_diag(np.conj(Ibus))
    G = sparse_diag(1.0 / np.abs(V))

    Gaa = E + F
    Gva = 1j * G @ (E - F)
    Gav = Gva.T
    Gvv = G @ (C + C.T) @ G
    return tuple(sp.csr_matrix(g) for g in (Gaa, Gav, Gva, Gvv))  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class _TapTerms:
    """Per-branch products shared by the tap blocks (full branch length)."""

    Vf: np.ndarray
    Vt: np.ndarray
    Af: np.ndarray  # Cf·([V]λ)
    At: np.ndarray  # Ct·([V]λ)
    inv_tau: np.ndarray
    Yff: np.ndarray  # conjugated admittances
    Yft: np.ndarray
    Ytf: np.ndarray


def _tap_terms(m: InternalModel, state: NetworkState, lam: np.ndarray) -> _TapTerms:
    Vl = state.V * lam
    ba = state.admittances
    return _TapTerms(
        Vf=m.Cf @ state.V,
        Vt=m.Ct @ state.V,
        Af=m.Cf @ Vl,
        At=m.Ct @ Vl,
        inv_tau=1.0 / state.taps.tau,
        Yff=np.conj(ba.Yff),
        Yft=np.conj(ba.Yft),
        Ytf=np.conj(ba.Ytf),
    )


def _theta_tau_mixed(m: InternalModel, state: NetworkState, lam: np.ndarray, k: _TapTerms):
    """G_Θτ, G_Θθ, G_Vτ, G_Vθ for every branch (nb × nl)."""
    CfT, CtT = m.Cf.T, m.Ct.T
    V = state.V
    Vf_c, Vt_c = np.conj(k.Vf), np.conj(k.Vt)
    VL = sparse_diag(V * lam)
    Vc = sparse_diag(np.conj(V))
    inv_tau = sparse_diag(k.inv_tau)
    inv_vm = sparse_diag(1.0 / np.abs(V))

    # τ: Yff* scales as τ⁻², Yft* and Ytf* as τ⁻¹.
    tau_left = (
        CfT @ sparse_diag(Vf_c * -2.0 * k.Yff)
        + CfT @ sparse_diag(Vt_c * -k.Yft)
        + CtT @ sparse_diag(Vf_c * -k.Ytf)
    )
    tau_right = (
        CfT @ sparse_diag(k.Af * -2.0 * k.Yff)
        + CtT @ sparse_diag(k.Af * -k.Yft)
        + CfT @ sparse_diag(k.At * -k.Ytf)
    )
    G_at = 1j * (VL @ tau_left - Vc @ tau_right) @ inv_tau
    G_vt = inv_vm @ (VL @ tau_left + Vc @ tau_right) @ inv_tau

    # θ: Yft* carries e^{-jθ}, Ytf* carries e^{+jθ}.
    theta_left = CfT @ sparse_diag(Vt_c * -1j * k.Yft) + CtT @ sparse_diag(Vf_c * 1j * k.Ytf)
    theta_right = CtT @ sparse_diag(k.Af * -1j * k.Yft) + CfT @ sparse_diag(k.At * 1j * k.Ytf)
    G_ah = 1j * (VL @ theta_left - Vc @ theta_right)
    G_vh = inv_vm @ (VL @ theta_left + Vc @ theta_right)
    return G_at, G_ah, G_vt, G_vh


def _tap_diagonals(k: _TapTerms) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagonals of G_ττ, G_τθ and G_θθ."""
    tt = k.inv_tau**2 * (
        6.0 * k.Yff * np.conj(k.Vf) * k.Af
        + 2.0 * k.Yft * np.conj(k.Vt) * k.Af
        + 2.0 * k.Ytf * np.conj(k.Vf) * k.At
    )
    th = k.inv_tau * (np.conj(k.Vt) * k.Af * 1j * k.Yft + np.conj(k.Vf) * k.At * -1j * k.Ytf)
    hh = -np.conj(k.Vt) * k.Af * k.Yft - np.conj(k.Vf) * k.At * k.Ytf
    return tt, th, hh


def d2_mismatch(x: VariableVector, m: InternalModel, lam: np.ndarray) -> HessianBlocks:
    lam = np.asarray(lam, dtype=complex)
    if lam.shape != (m.nb,):
        raise ValueError(f"multiplier must have length {m.nb}, got shape {lam.shape}")
    state = NetworkState.evaluate(x, m)
    Gaa, Gav, Gva, Gvv = d2Sbus_dV2(state.system.Ybus, state.V, lam)

    k = _tap_terms(m, state, lam)
    G_at, G_ah, G_vt, G_vh = (g[:, m.adjustable] for g in _theta_tau_mixed(m, state, lam, k))
    tt, th, hh = (d[m.adjustable] for d in _tap_diagonals(k))
    G_th = sparse_diag(th)

    blocks = {
        ("Va", "Va"): Gaa,
        ("Va", "Vm"): Gav,
        ("Vm", "Va"): Gva,
        ("Vm", "Vm"): Gvv,
        ("Va", "tau"): G_at,
        ("Va", "theta"): G_ah,
        ("Vm", "tau"): G_vt,
        ("Vm", "theta"): G_vh,
        ("tau", "Va"): G_at.T,
        ("theta", "Va"): G_ah.T,
        ("tau", "Vm"): G_vt.T,
        ("theta", "Vm"): G_vh.T,
        ("tau", "tau"): sparse_diag(tt),
        ("tau", "theta"): G_th,
        ("theta", "tau"): G_th.T,
        ("theta", "theta"): sparse_diag(hh),
    }
    return HessianBlocks(x.layout, {key: sp.csr_matrix(b) for key, b in blocks.items()})


def tap_row_blocks(x: VariableVector, m: InternalModel, lam: np.ndarray) -> dict[tuple[str, str], sp.csr_matrix]:
    """G_τΘ, G_τV, G_θΘ, G_θV and G_θτ derived directly as derivatives of the tap gradients.

    ``d2_mismatch`` builds these blocks by transposition; this independent
    form is used to confirm the transpose identities.
    """
    lam = np.asarray(lam, dtype=complex)
    state = NetworkState.evaluate(x, m)
    k = _tap_terms(m, state, lam)
    V = state.V
    Cf, Ct = m.Cf, m.Ct
    lamV = sparse_diag(lam) @ sparse_diag(V)
    jV = sparse_diag(1j * V)
    mjVc = sparse_diag(-1j * np.conj(V))
    Vc = sparse_diag(np.conj(V))
    inv_vm = sparse_diag(1.0 / np.abs(V))
    inv_tau = sparse_diag(k.inv_tau)
    Vf_c, Vt_c = np.conj(k.Vf), np.conj(k.Vt)

    tau_lin = (
        sparse_diag(-2.0 * k.Yff * Vf_c) @ Cf
        + sparse_diag(-k.Yft * Vt_c) @ Cf
        + sparse_diag(-k.Ytf * Vf_c) @ Ct
    )
    tau_conj = (
        sparse_diag(-2.0 * k.Yff * k.Af) @ Cf
        + sparse_diag(-k.Yft * k.Af) @ Ct
        + sparse_diag(-k.Ytf * k.At) @ Cf
    )
    G_ta = inv_tau @ (tau_lin @ sparse_diag(lam) @ jV + tau_conj @ mjVc)
    G_tv = inv_tau @ (tau_lin @ lamV @ inv_vm + tau_conj @ Vc @ inv_vm)

    theta_lin = sparse_diag(-1j * k.Yft * Vt_c) @ Cf + sparse_diag(1j * k.Ytf * Vf_c) @ Ct
    theta_conj = sparse_diag(-1j * k.Yft * k.Af) @ Ct + sparse_diag(1j * k.Ytf * k.At) @ Cf
    G_ha = theta_lin @ sparse_diag(lam) @ jV + theta_conj @ mjVc
    G_hv = theta_lin @ lamV @ inv_vm + theta_conj @ Vc @ inv_vm

    # every θ column scales as 1/τ of its own branch
    _, dtheta = dSbus_dtaps(m, state)
    theta_tau = -k.inv_tau * (dtheta.T @ lam)

    adj = m.adjustable
    return {
        ("tau", "Va"): sp.csr_matrix(G_ta)[adj, :],
        ("tau", "Vm"): sp.csr_matrix(G_tv)[adj, :],
        ("theta", "Va"): sp.csr_matrix(G_ha)[adj, :],
        ("theta", "Vm"): sp.csr_matrix(G_hv)[adj, :],
        ("theta", "tau"): sparse_diag(theta_tau[adj]),
    }


__all__ = [
    "NetworkState",
    "bus_injections",
    "d2Sbus_dV2",
    "d2_mismatch",
    "dSbus_dV",
    "dSbus_dtaps",
    "d_mismatch",
    "mismatch",
    "tap_row_blocks",
]
