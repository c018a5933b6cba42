"""
Central finite differences used as ground truth for the analytic derivatives.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .global_variables import FD_ATOL, FD_HESSIAN_STEP, FD_MIN_SCALE, FD_RTOL, FD_STEP

logger = logging.getLogger(__name__)


class NonFiniteValueError(FloatingPointError):
    """Raised when a finite-difference evaluation returns NaN or infinity."""


@dataclass(frozen=True)
class FDReport:
    block_name: str
    max_rel_err: float
    max_abs_err: float
    worst_index: tuple[int, int] | None
    passed: bool
    step: float
    rtol: float
    atol: float

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["worst_index"] = list(self.worst_index) if self.worst_index is not None else None
        return payload


def _evaluate(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, k: int) -> np.ndarray:
    value = np.atleast_1d(np.asarray(f(x)))
    if not np.all(np.isfinite(value)):
        raise NonFiniteValueError(f"non-finite function value when stepping coordinate {k}")
    return value


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Jacobian of ``f`` at ``x0`` by central differences, one column per coordinate."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    logger.debug("finite-difference jacobian over %d coordinates (step %g)", n, step)
    columns = []
    for k in range(n):
        x = x0.copy()
        x[k] = x0[k] + step
        plus = _evaluate(f, x, k)
        x[k] = x0[k] - step
        minus = _evaluate(f, x, k)
        columns.append((plus - minus) / (2.0 * step))
    if not columns:
        out_size = _evaluate(f, x0, -1).size
        return np.zeros((out_size, 0))
    return np.column_stack(columns)


def fd_hessian_contract(
    g: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, step: float = FD_HESSIAN_STEP
) -> np.ndarray:
    """Central differences of a multiplier-contracted gradient ``g``.

    Entry (i, k) approximates ∂g_i/∂x_k, matching the ``block(a, b)``
    convention of the analytic Hessians.
    """
    return fd_jacobian(g, x0, step)


def compare(
    analytic,
    numeric: np.ndarray,
    rtol: float = FD_RTOL,
    atol: float = FD_ATOL,
    name: str = "",
    step: float = float("nan"),
) -> FDReport:
    """Error of an analytic derivative relative to the largest numeric entry."""
    a = analytic.toarray() if sp.issparse(analytic) else np.asarray(analytic)
    n = np.asarray(numeric)
    if a.shape != n.shape:
        raise ValueError(f"{name}: shape mismatch, analytic {a.shape} vs numeric {n.shape}")
    if a.size == 0:
        return FDReport(name, 0.0, 0.0, None, True, step, rtol, atol)
    diff = np.abs(a - n)
    scale = max(float(np.max(np.abs(n))), FD_MIN_SCALE)
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    max_abs = float(diff[worst])
    if max(float(np.max(np.abs(a))), scale) <= atol:
        # both sides vanish to within atol
        max_rel = 0.0
    else:
        max_rel = max_abs / scale
    worst_index = (int(worst[0]), int(worst[1])) if diff.ndim == 2 else (int(worst[0]), 0)
    passed = max_rel <= rtol or max_abs <= atol
    if not passed:
        logger.info("%s: max relative error %.3e at %s exceeds %.1e", name, max_rel, worst_index, rtol)
    return FDReport(name, max_rel, max_abs, worst_index, passed, step, rtol, atol)


__all__ = ["FDReport", "NonFiniteValueError", "compare", "fd_hessian_contract", "fd_jacobian"]
