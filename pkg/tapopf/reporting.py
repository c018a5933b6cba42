"""Plain-text tables and JSON payloads printed by the CLI."""
from __future__ import annotations

import json
from typing import Any, Iterable

import numpy as np
import scipy.sparse as sp

from .case_model import InternalModel, ValidationReport
from .fd_oracle import FDReport
from .line_flow import flow_constraints
from .opf_solver import OpfProblem, SolveResult, binding_bounds

# Names of the limits reported in the binding column, per variable group and side.
LIMIT_NAMES = {
    ("Vm", "lower"): "Vmin",
    ("Vm", "upper"): "Vmax",
    ("Pg", "lower"): "Pmin",
    ("Pg", "upper"): "Pmax",
    ("Qg", "lower"): "Qmin",
    ("Qg", "upper"): "Qmax",
    ("tau", "lower"): "tauMin",
    ("tau", "upper"): "tauMax",
    ("theta", "lower"): "thetaMin",
    ("theta", "upper"): "thetaMax",
    ("If", "upper"): "Imax",
    ("It", "upper"): "Imax",
}


def dumps(payload: Any) -> str:
    """Deterministic JSON text for CLI output."""
    return json.dumps(payload, indent=2, sort_keys=True)


def _table(headers: list[str], rows: Iterable[list[str]]) -> str:
    rows = [list(map(str, row)) for row in rows]
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(headers)]
    line = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    body = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join([line, "-" * len(line), *body])


def validation_lines(report: ValidationReport) -> list[str]:
    return [str(issue) for issue in report]


def validation_payload(report: ValidationReport) -> dict:
    return {
        "ok": report.ok,
        "issues": [{"code": i.code, "message": i.message, "record": i.record} for i in report],
    }


def ybus_triplets(Ybus: sp.spmatrix) -> list[tuple[int, int, float, float]]:
    """Nonzero entries of Ybus as (row, col, re, im) in row-major order."""
    coo = sp.coo_matrix(Ybus)
    order = np.lexsort((coo.col, coo.row))
    return [
        (int(coo.row[k]), int(coo.col[k]), float(coo.data[k].real), float(coo.data[k].imag))
        for k in order
    ]


def format_ybus(Ybus: sp.spmatrix) -> str:
    return "\n".join(f"{i} {j} {re:.12g} {im:.12g}" for i, j, re, im in ybus_triplets(Ybus))


def ybus_payload(Ybus: sp.spmatrix) -> dict:
    return {
        "shape": list(Ybus.shape),
        "entries": [[i, j, float(f"{re:.12g}"), float(f"{im:.12g}")] for i, j, re, im in ybus_triplets(Ybus)],
    }


def _family(name: str) -> str:
    return name.split(":", 1)[0]


def format_fd_reports(reports: list[FDReport]) -> str:
    """Per-block error table, one section per derivative family."""
    sections = []
    families: dict[str, list[FDReport]] = {}
    for report in reports:
        families.setdefault(_family(report.block_name), []).append(report)
    for family, members in families.items():
        rows = [
            [
                r.block_name.split(":", 1)[-1],
                f"{r.max_rel_err:.3e}",
                f"{r.max_abs_err:.3e}",
                f"{r.rtol:.1e}",
                "ok" if r.passed else "FAIL",
            ]
            for r in members
        ]
        sections.append(f"[{family}]\n" + _table(["block", "max rel", "max abs", "rtol", "status"], rows))
    failed = sum(not r.passed for r in reports)
    sections.append(f"{len(reports)} blocks checked, {failed} failed")
    return "\n\n".join(sections)


def fd_payload(reports: list[FDReport], seed: int, trials: int) -> dict:
    return {
        "seed": seed,
        "trials": trials,
        "passed": all(r.passed for r in reports),
        "blocks": [r.to_dict() for r in reports],
    }


def _markers(p: OpfProblem | None, result: SolveResult) -> dict[tuple[str, int], list[str]]:
    if p is None:
        return {}
    out: dict[tuple[str, int], list[str]] = {}
    for group, index, side in binding_bounds(p, result.x):
        name = LIMIT_NAMES.get((group, side))
        if name is None:
            continue
        key = ("branch", index) if group in ("If", "It") else (group, index)
        out.setdefault(key, []).append(name)
    return out


def _branch_markers(m: InternalModel, markers, k: int) -> list[str]:
    names = list(markers.get(("branch", k), []))
    position = np.flatnonzero(m.adjustable == k)
    if len(position):
        a = int(position[0])
        names += markers.get(("tau", a), []) + markers.get(("theta", a), [])
    return sorted(set(names))


def solution_payload(m: InternalModel, result: SolveResult, p: OpfProblem | None = None) -> dict:
    """Solution in external units: MW, MVAr, degrees, $/MWh for balance prices."""
    x = result.x
    base = m.base_mva
    markers = _markers(p, result)
    taps = x.taps(m)
    ev = flow_constraints(x, m)
    lam = result.lam
    has_prices = len(lam) == 2 * m.nb
    buses = []
    for i in range(m.nb):
        entry = {
            "id": int(m.bus_ids[i]),
            "Vm": float(x.Vm[i]),
            "Va": float(np.rad2deg(x.Va[i])),
            "binding": sorted(markers.get(("Vm", i), [])),
        }
        if has_prices:
            entry["lamP"] = float(lam[i] / base)
            entry["lamQ"] = float(lam[m.nb + i] / base)
        buses.append(entry)
    gens = [
        {
            "bus": int(m.bus_ids[m.gen_bus[g]]),
            "Pg": float(x.Pg[g] * base),
            "Qg": float(x.Qg[g] * base),
            "binding": sorted(markers.get(("Pg", g), []) + markers.get(("Qg", g), [])),
        }
        for g in range(m.ng)
    ]
    branches = [
        {
            "index": k,
            "fbus": int(m.bus_ids[m.f[k]]),
            "tbus": int(m.bus_ids[m.t[k]]),
            "tau": float(taps.tau[k]),
            "theta": float(np.rad2deg(taps.theta[k])),
            "If": float(abs(ev.If[k])),
            "It": float(abs(ev.It[k])),
            "adjustable": bool(k in m.adjustable),
            "binding": _branch_markers(m, markers, k),
        }
        for k in range(m.nl)
    ]
    return {
        "status": result.status.value,
        "iterations": result.iterations,
        "objective": float(result.objective),
        "feasibility": float(result.feasibility),
        "optimality": float(result.optimality),
        "complementarity": float(result.complementarity),
        "bus": buses,
        "gen": gens,
        "branch": branches,
    }


def format_solution(payload: dict) -> str:
    summary = (
        f"status {payload['status']}  iterations {payload['iterations']}  "
        f"objective {payload['objective']:.6f}  max mismatch {payload['feasibility']:.3e}"
    )
    bus_rows = [
        [b["id"], f"{b['Vm']:.6f}", f"{b['Va']:.4f}"]
        + ([f"{b['lamP']:.4f}", f"{b['lamQ']:.4f}"] if "lamP" in b else [])
        + [",".join(b["binding"])]
        for b in payload["bus"]
    ]
    bus_headers = ["bus", "Vm", "Va(deg)"]
    if payload["bus"] and "lamP" in payload["bus"][0]:
        bus_headers += ["lamP", "lamQ"]
    bus_headers.append("binding")
    gen_rows = [[g["bus"], f"{g['Pg']:.4f}", f"{g['Qg']:.4f}", ",".join(g["binding"])] for g in payload["gen"]]
    branch_rows = [
        [
            br["index"],
            br["fbus"],
            br["tbus"],
            f"{br['tau']:.6f}",
            f"{br['theta']:.4f}",
            f"{br['If']:.4f}",
            f"{br['It']:.4f}",
            "*" if br["adjustable"] else "",
            ",".join(br["binding"]),
        ]
        for br in payload["branch"]
    ]
    return "\n\n".join(
        [
            summary,
            _table(bus_headers, bus_rows),
            _table(["bus", "Pg(MW)", "Qg(MVAr)", "binding"], gen_rows),
            _table(["k", "from", "to", "tau", "theta(deg)", "|If|", "|It|", "adj", "binding"], branch_rows),
        ]
    )


__all__ = [
    "LIMIT_NAMES",
    "dumps",
    "fd_payload",
    "format_fd_reports",
    "format_solution",
    "format_ybus",
    "solution_payload",
    "validation_lines",
    "validation_payload",
    "ybus_payload",
    "ybus_triplets",
]
