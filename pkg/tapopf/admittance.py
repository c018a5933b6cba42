"""Branch admittances, bus/branch admittance matrices and their tap derivatives.

Each branch carries a complex tap ``tau·e^{jθ}`` at its from end:

    Yff = (ys + j·bc/2) / tau²      Yft = -ys·e^{jθ} / tau
    Ytf = -ys·e^{-jθ} / tau         Ytt =  ys + j·bc/2

Derivatives of ``Ybus`` are only ever formed contracted with a vector
``gamma``, giving nb × nl matrices with one column per branch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .case_model import InternalModel


def sparse_diag(values: np.ndarray) -> sp.csr_matrix:
    """Diagonal matrix [v]."""
    values = np.asarray(values)
    n = len(values)
    index = np.arange(n)
    return sp.csr_matrix((values, (index, index)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class TapState:
    """Tap magnitude and phase (radians) of every in-service branch."""

    tau: np.ndarray
    theta: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.tau) <= 0):
            raise ValueError("tap magnitudes must be strictly positive")

    @classmethod
    def nominal(cls, m: InternalModel) -> "TapState":
        """Taps written in the case file."""
        return cls(m.tau0.copy(), m.theta0.copy())

    @classmethod
    def from_adjustable(cls, m: InternalModel, tau: np.ndarray, theta: np.ndarray) -> "TapState":
        """Expand adjustable-branch settings to full length; other branches keep their fixed taps."""
        full_tau = m.tau0.astype(float)
        full_theta = m.theta0.astype(float)
        full_tau[m.adjustable] = tau
        full_theta[m.adjustable] = theta
        return cls(full_tau, full_theta)

    def with_branch(self, k: int, tau: float | None = None, theta: float | None = None) -> "TapState":
        new_tau = self.tau.copy()
        new_theta = self.theta.copy()
        if tau is not None:
            new_tau[k] = tau
        if theta is not None:
            new_theta[k] = theta
        return TapState(new_tau, new_theta)


@dataclass(frozen=True, eq=False)
class BranchAdmittances:
    Yff: np.ndarray
    Yft: np.ndarray
    Ytf: np.ndarray
    Ytt: np.ndarray


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    Ybus: sp.csr_matrix
    Yf: sp.csr_matrix
    Yt: sp.csr_matrix


def branch_admittances(m: InternalModel, t: TapState) -> BranchAdmittances:
    Ytt = m.ys + 0.5j * m.bc
    shift = np.exp(1j * t.theta)
    return BranchAdmittances(
        Yff=Ytt / t.tau**2,
        Yft=-m.ys * shift / t.tau,
        Ytf=-m.ys * np.conj(shift) / t.tau,
        Ytt=Ytt,
    )


def build_system(m: InternalModel, ba: BranchAdmittances) -> SystemMatrices:
    Yf = sparse_diag(ba.Yff) @ m.Cf + sparse_diag(ba.Yft) @ m.Ct
    Yt = sparse_diag(ba.Ytf) @ m.Cf + sparse_diag(ba.Ytt) @ m.Ct
    Ybus = sp.csr_matrix(m.Cf.T @ Yf + m.Ct.T @ Yt + sparse_diag(m.Ysh.astype(complex)))
    for matrix in (Ybus, Yf, Yt):
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
    return SystemMatrices(Ybus=Ybus, Yf=sp.csr_matrix(Yf), Yt=sp.csr_matrix(Yt))


def network(m: InternalModel, t: TapState) -> tuple[BranchAdmittances, SystemMatrices]:
    ba = branch_admittances(m, t)
    return ba, build_system(m, ba)


def dYbusGamma_dtau(
    m: InternalModel, ba: BranchAdmittances, t: TapState, gamma: np.ndarray
) -> sp.csr_matrix:
    """∂(Ybus·γ)/∂τ, one column per branch."""
    gf = m.Cf @ gamma
    gt = m.Ct @ gamma
    inv_tau = 1.0 / t.tau
    from_side = (gf * (-2.0 * ba.Yff) + gt * (-ba.Yft)) * inv_tau
    to_side = gf * (-ba.Ytf) * inv_tau
    return sp.csr_matrix(m.Cf.T @ sparse_diag(from_side) + m.Ct.T @ sparse_diag(to_side))


def dYbusGamma_dtheta(m: InternalModel, ba: BranchAdmittances, gamma: np.ndarray) -> sp.csr_matrix:
    """∂(Ybus·γ)/∂θ; Yff and Ytt do not depend on θ."""
    gf = m.Cf @ gamma
    gt = m.Ct @ gamma
    return sp.csr_matrix(
        m.Cf.T @ sparse_diag(gt * (1j * ba.Yft)) + m.Ct.T @ sparse_diag(gf * (-1j * ba.Ytf))
    )


__all__ = [
    "BranchAdmittances",
    "SystemMatrices",
    "TapState",
    "branch_admittances",
    "build_system",
    "dYbusGamma_dtau",
    "dYbusGamma_dtheta",
    "network",
    "sparse_diag",
]
