"""Stacked optimization vector X = [Va; Vm; Pg; Qg; tau; theta] and derivative containers."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .admittance import TapState, sparse_diag
from .case_model import InternalModel
from .global_variables import VARIABLE_GROUPS


@dataclass(frozen=True)
class VariableLayout:
    """Sizes and offsets of each variable group in the stacked real vector."""

    nb: int
    ng: int
    na: int

    @classmethod
    def for_model(cls, m: InternalModel) -> "VariableLayout":
        return cls(m.nb, m.ng, m.na)

    @property
    def sizes(self) -> dict[str, int]:
        return {
            "Va": self.nb,
            "Vm": self.nb,
            "Pg": self.ng,
            "Qg": self.ng,
            "tau": self.na,
            "theta": self.na,
        }

    @property
    def offsets(self) -> dict[str, int]:
        out, start = {}, 0
        for name, size in self.sizes.items():
            out[name] = start
            start += size
        return out

    @property
    def slices(self) -> dict[str, slice]:
        sizes = self.sizes
        return {name: slice(start, start + sizes[name]) for name, start in self.offsets.items()}

    @property
    def n(self) -> int:
        return 2 * (self.nb + self.ng + self.na)

    def split(self, x: np.ndarray) -> "VariableVector":
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"expected a stacked vector of length {self.n}, got shape {x.shape}")
        parts = {name: x[s].copy() for name, s in self.slices.items()}
        return VariableVector(layout=self, **parts)


@dataclass(frozen=True, eq=False)
class VariableVector:
    """Voltages, dispatch and adjustable tap settings of one operating point.

    ``tau`` and ``theta`` hold values for the adjustable branches only, in
    the order of ``InternalModel.adjustable``.
    """

    Va: np.ndarray
    Vm: np.ndarray
    Pg: np.ndarray
    Qg: np.ndarray
    tau: np.ndarray
    theta: np.ndarray
    layout: VariableLayout = field(repr=False, default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.layout is None:
            object.__setattr__(self, "layout", VariableLayout(len(self.Va), len(self.Pg), len(self.tau)))

    @classmethod
    def from_model(cls, m: InternalModel) -> "VariableVector":
        """Operating point written in the case file."""
        return cls(
            Va=m.Va0.copy(),
            Vm=m.Vm0.copy(),
            Pg=m.Pg0.copy(),
            Qg=m.Qg0.copy(),
            tau=m.tau0[m.adjustable].copy(),
            theta=m.theta0[m.adjustable].copy(),
            layout=VariableLayout.for_model(m),
        )

    @property
    def V(self) -> np.ndarray:
        return self.Vm * np.exp(1j * self.Va)

    def stack(self) -> np.ndarray:
        return np.concatenate([getattr(self, name) for name in VARIABLE_GROUPS]).astype(float)

    def taps(self, m: InternalModel) -> TapState:
        return TapState.from_adjustable(m, self.tau, self.theta)

    def with_values(self, **changes: np.ndarray) -> "VariableVector":
        return replace(self, **{k: np.asarray(v, dtype=float) for k, v in changes.items()})


def assemble(entries: Iterable[tuple[int, int, sp.spmatrix]], shape: tuple[int, int], dtype=complex) -> sp.csr_matrix:
    """Place sparse blocks at (row, col) offsets of a larger matrix."""
    rows, cols, data = [], [], []
    for row, col, block in entries:
        block = sp.coo_matrix(block)
        if block.nnz == 0:
            continue
        rows.append(block.row + row)
        cols.append(block.col + col)
        data.append(block.data)
    if not data:
        return sp.csr_matrix(shape, dtype=dtype)
    return sp.csr_matrix(
        (np.concatenate(data).astype(dtype), (np.concatenate(rows), np.concatenate(cols))),
        shape=shape,
    )


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    """First derivatives of a vector function, one block per variable group."""

    dVa: sp.csr_matrix
    dVm: sp.csr_matrix
    dPg: sp.csr_matrix
    dQg: sp.csr_matrix
    dTau: sp.csr_matrix
    dTheta: sp.csr_matrix

    def blocks(self) -> dict[str, sp.csr_matrix]:
        return {
            "Va": self.dVa,
            "Vm": self.dVm,
            "Pg": self.dPg,
            "Qg": self.dQg,
            "tau": self.dTau,
            "theta": self.dTheta,
        }

    @property
    def n_out(self) -> int:
        return self.dVa.shape[0]

    def stacked(self) -> sp.csr_matrix:
        blocks = self.blocks()
        n = sum(b.shape[1] for b in blocks.values())
        entries, col = [], 0
        for block in blocks.values():
            entries.append((0, col, block))
            col += block.shape[1]
        return assemble(entries, (self.n_out, n))

    def contract(self, w: np.ndarray) -> np.ndarray:
        """Stacked gradient ``Jᵀ·w`` computed block by block, without assembling J."""
        return np.concatenate([block.T @ w for block in self.blocks().values()])


@dataclass(frozen=True, eq=False)
class HessianBlocks:
    """6×6 grid of multiplier-contracted second derivatives.

    ``block(a, b)`` is the derivative with respect to group ``b`` of the
    group-``a`` part of the contracted gradient. Pairs missing from
    ``blocks`` are zero.
    """

    layout: VariableLayout
    blocks: Mapping[tuple[str, str], sp.spmatrix]

    def block(self, row: str, col: str) -> sp.csr_matrix:
        sizes = self.layout.sizes
        stored = self.blocks.get((row, col))
        if stored is None:
            return sp.csr_matrix((sizes[row], sizes[col]), dtype=complex)
        return sp.csr_matrix(stored, dtype=complex)

    def stacked(self) -> sp.csr_matrix:
        offsets = self.layout.offsets
        entries = [(offsets[a], offsets[b], m) for (a, b), m in self.blocks.items()]
        return assemble(entries, (self.layout.n, self.layout.n))


__all__ = [
    "DerivativeBundle",
    "HessianBlocks",
    "VariableLayout",
    "VariableVector",
    "assemble",
    "sparse_diag",
]
