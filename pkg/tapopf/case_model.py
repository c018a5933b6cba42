"""Grid case parsing, validation and per-unit normalization."""
from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

DEFAULT_BASE_MVA = 100.0
_REQUIRED = object()


class CaseError(ValueError):
    """Raised when a case is structurally unusable."""


class CaseSyntaxError(CaseError):
    """Raised when case text cannot be tokenized; carries the position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" if column is None else f"line {line}, column {column}"
            message = f"{where}: {message}"
        super().__init__(message)


class IsolatedBusError(CaseError):
    """Raised when a bus has no in-service branch after status filtering."""


class CaseFormat(str, enum.Enum):
    JSON = "json"
    MPC_TABLE = "mpc"


class BusType(enum.IntEnum):
    PQ = 1
    PV = 2
    REF = 3


def _to_bus_type(value: Any) -> BusType:
    if isinstance(value, str):
        try:
            return BusType[value.strip().upper()]
        except KeyError:
            pass
        try:
            value = float(value)
        except ValueError:
            raise CaseError(f"unknown bus type {value!r}") from None
    try:
        return BusType(int(_to_int(value)))
    except ValueError:
        raise CaseError(f"unknown bus type {value!r}") from None


def _to_int(value: Any) -> int:
    if isinstance(value, bool):
        return int(value)
    number = float(value)
    if not number.is_integer():
        raise CaseError(f"expected an integer, got {value!r}")
    return int(number)


def _to_flag(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    return float(value) != 0.0


@dataclass(frozen=True)
class BusRecord:
    bus_id: int
    bus_type: BusType
    Pd: float
    Qd: float
    Gs: float = 0.0
    Bs: float = 0.0
    Vm: float = 1.0
    Va: float = 0.0
    Vmin: float = 0.9
    Vmax: float = 1.1


@dataclass(frozen=True)
class BranchRecord:
    """Branch with an off-nominal complex tap at the from end.

    ``tau`` = 0 is the MATPOWER spelling of a nominal tap and is kept as
    written; ``to_internal`` replaces it by 1. ``theta`` and its bounds are
    in degrees.
    """

    fbus: int
    tbus: int
    r: float
    x: float
    b: float = 0.0
    tau: float = 0.0
    theta: float = 0.0
    tau_min: float = 1.0
    tau_max: float = 1.0
    theta_min: float = 0.0
    theta_max: float = 0.0
    adjustable: bool = False
    imax: float = 0.0
    status: bool = True

    @property
    def effective_tau(self) -> float:
        return self.tau if self.tau != 0.0 else 1.0


@dataclass(frozen=True)
class GenRecord:
    bus: int
    Pg: float
    Qg: float
    Pmin: float
    Pmax: float
    Qmin: float
    Qmax: float


@dataclass(frozen=True)
class CostRecord:
    """Quadratic cost c2·P² + c1·P + c0 with P in MW."""

    c2: float = 0.0
    c1: float = 0.0
    c0: float = 0.0


@dataclass(frozen=True)
class Case:
    baseMVA: float
    buses: tuple[BusRecord, ...]
    branches: tuple[BranchRecord, ...]
    gens: tuple[GenRecord, ...]
    gencosts: tuple[CostRecord, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)


# (file key, record attribute, converter, default) in file column order.
_Column = tuple[str, str, Callable[[Any], Any], Any]

BUS_COLUMNS: tuple[_Column, ...] = (
    ("id", "bus_id", _to_int, _REQUIRED),
    ("type", "bus_type", _to_bus_type, _REQUIRED),
    ("Pd", "Pd", float, _REQUIRED),
    ("Qd", "Qd", float, _REQUIRED),
    ("Gs", "Gs", float, 0.0),
    ("Bs", "Bs", float, 0.0),
    ("Vm", "Vm", float, 1.0),
    ("Va", "Va", float, 0.0),
    ("Vmin", "Vmin", float, _REQUIRED),
    ("Vmax", "Vmax", float, _REQUIRED),
)
BRANCH_COLUMNS: tuple[_Column, ...] = (
    ("fbus", "fbus", _to_int, _REQUIRED),
    ("tbus", "tbus", _to_int, _REQUIRED),
    ("r", "r", float, _REQUIRED),
    ("x", "x", float, _REQUIRED),
    ("b", "b", float, 0.0),
    ("tau", "tau", float, 0.0),
    ("theta", "theta", float, 0.0),
    ("tauMin", "tau_min", float, None),
    ("tauMax", "tau_max", float, None),
    ("thetaMin", "theta_min", float, None),
    ("thetaMax", "theta_max", float, None),
    ("adjustable", "adjustable", _to_flag, False),
    ("Imax", "imax", float, 0.0),
    ("status", "status", _to_flag, True),
)
GEN_COLUMNS: tuple[_Column, ...] = (
    ("bus", "bus", _to_int, _REQUIRED),
    ("Pg", "Pg", float, _REQUIRED),
    ("Qg", "Qg", float, _REQUIRED),
    ("Pmin", "Pmin", float, _REQUIRED),
    ("Pmax", "Pmax", float, _REQUIRED),
    ("Qmin", "Qmin", float, _REQUIRED),
    ("Qmax", "Qmax", float, _REQUIRED),
)
COST_COLUMNS: tuple[_Column, ...] = (
    ("c2", "c2", float, 0.0),
    ("c1", "c1", float, 0.0),
    ("c0", "c0", float, 0.0),
)


def _build_record(
    columns: Sequence[_Column],
    values: Mapping[str, Any],
    label: str,
) -> dict[str, Any]:
    kwargs: dict[str, Any] = {}
    for key, attr, convert, default in columns:
        if key in values and values[key] is not None:
            try:
                kwargs[attr] = convert(values[key])
            except (TypeError, ValueError) as exc:
                raise CaseError(f"{label}: invalid value for '{key}': {exc}") from None
        elif default is _REQUIRED:
            raise CaseError(f"{label}: missing required column '{key}'")
        elif default is not None:
            kwargs[attr] = default
    return kwargs


def _make_branch(values: Mapping[str, Any], label: str) -> BranchRecord:
    kwargs = _build_record(BRANCH_COLUMNS, values, label)
    # Absent bounds pin the tap at its written value.
    nominal = kwargs["tau"] if kwargs["tau"] != 0.0 else 1.0
    kwargs.setdefault("tau_min", nominal)
    kwargs.setdefault("tau_max", nominal)
    kwargs.setdefault("theta_min", kwargs["theta"])
    kwargs.setdefault("theta_max", kwargs["theta"])
    return BranchRecord(**kwargs)


def _check_unique_buses(buses: Iterable[BusRecord]) -> None:
    seen: set[int] = set()
    for bus in buses:
        if bus.bus_id in seen:
            raise CaseError(f"duplicate bus ID {bus.bus_id}")
        seen.add(bus.bus_id)


def _parse_json(text: str) -> Case:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(payload, Mapping):
        raise CaseSyntaxError("top level must be an object", 1, 1)

    warnings: list[str] = []

    def rows(section: str, columns: Sequence[_Column], required: bool = True) -> list[Mapping[str, Any]]:
        if section not in payload:
            if required:
                raise CaseError(f"missing required section '{section}'")
            return []
        items = payload[section]
        if not isinstance(items, list) or not all(isinstance(i, Mapping) for i in items):
            raise CaseError(f"section '{section}' must be an array of objects")
        known = {column[0] for column in columns}
        for index, item in enumerate(items):
            for key in item:
                if key not in known:
                    warnings.append(f"{section} {index}: ignoring unknown column '{key}'")
        return items

    for key in payload:
        if key not in ("baseMVA", "bus", "branch", "gen"):
            warnings.append(f"ignoring unknown section '{key}'")

    try:
        base = float(payload.get("baseMVA", DEFAULT_BASE_MVA))
    except (TypeError, ValueError):
        raise CaseError("baseMVA must be a number") from None

    buses = tuple(
        BusRecord(**_build_record(BUS_COLUMNS, item, f"bus {i}"))
        for i, item in enumerate(rows("bus", BUS_COLUMNS))
    )
    _check_unique_buses(buses)
    branches = tuple(
        _make_branch(item, f"branch {i}")
        for i, item in enumerate(rows("branch", BRANCH_COLUMNS, required=False))
    )
    gen_items = rows("gen", GEN_COLUMNS + COST_COLUMNS, required=False)
    gens = tuple(
        GenRecord(**_build_record(GEN_COLUMNS, item, f"gen {i}"))
        for i, item in enumerate(gen_items)
    )
    costs = tuple(
        CostRecord(**_build_record(COST_COLUMNS, item, f"gen {i}"))
        for i, item in enumerate(gen_items)
    )
    return Case(base, buses, branches, gens, costs, tuple(warnings))


_SECTIONS = {"BASEMVA": (), "BUS": BUS_COLUMNS, "BRANCH": BRANCH_COLUMNS, "GEN": GEN_COLUMNS, "COST": COST_COLUMNS}


def _parse_table(text: str) -> Case:
    section: str | None = None
    table: dict[str, list[tuple[int, list[str]]]] = {name: [] for name in _SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        tokens = line.split()
        if not tokens:
            continue
        head = tokens[0].upper()
        if head in _SECTIONS and not _is_number(tokens[0]):
            section = head
            tokens = tokens[1:]
            if not tokens:
                continue
        if section is None:
            raise CaseSyntaxError("data row before any section header", lineno, raw.index(tokens[0]) + 1)
        for token in tokens:
            if not _is_number(token):
                raise CaseSyntaxError(f"expected a number, got {token!r}", lineno, raw.index(token) + 1)
        table[section].append((lineno, tokens))

    warnings: list[str] = []

    def records(name: str, columns: Sequence[_Column]) -> list[tuple[int, dict[str, str]]]:
        out = []
        for lineno, tokens in table[name]:
            if len(tokens) > len(columns):
                warnings.append(
                    f"line {lineno}: ignoring {len(tokens) - len(columns)} unknown trailing column(s)"
                )
            out.append((lineno, {column[0]: token for column, token in zip(columns, tokens)}))
        return out

    base = DEFAULT_BASE_MVA
    if table["BASEMVA"]:
        lineno, tokens = table["BASEMVA"][0]
        base = float(tokens[0])
        if len(table["BASEMVA"]) > 1 or len(tokens) > 1:
            warnings.append(f"line {lineno}: only the first baseMVA value is used")

    def label(name: str, lineno: int) -> str:
        return f"line {lineno} ({name.lower()})"

    buses = tuple(
        BusRecord(**_build_record(BUS_COLUMNS, values, label("BUS", n)))
        for n, values in records("BUS", BUS_COLUMNS)
    )
    if not buses:
        raise CaseError("missing required section 'BUS'")
    _check_unique_buses(buses)
    branches = tuple(_make_branch(values, label("BRANCH", n)) for n, values in records("BRANCH", BRANCH_COLUMNS))

    gen_rows = records("GEN", GEN_COLUMNS + COST_COLUMNS)
    gens = tuple(
        GenRecord(**_build_record(GEN_COLUMNS, values, label("GEN", n))) for n, values in gen_rows
    )
    if table["COST"]:
        costs = tuple(
            CostRecord(**_build_record(COST_COLUMNS, values, label("COST", n)))
            for n, values in records("COST", COST_COLUMNS)
        )
    else:
        costs = tuple(
            CostRecord(**_build_record(COST_COLUMNS, values, label("GEN", n))) for n, values in gen_rows
        )
    return Case(base, buses, branches, gens, costs, tuple(warnings))


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_case(text: str, format: CaseFormat | str = CaseFormat.JSON) -> Case:
    """Parse case text in the declared format.

    Unknown columns are skipped and listed in ``Case.warnings``.
    """
    fmt = CaseFormat(format)
    case = _parse_json(text) if fmt is CaseFormat.JSON else _parse_table(text)
    for message in case.warnings:
        logger.warning(message)
    return case


def _record_values(record: Any, columns: Sequence[_Column]) -> list[Any]:
    values = []
    for _, attr, _, _ in columns:
        value = getattr(record, attr)
        if isinstance(value, BusType):
            value = value.name
        elif isinstance(value, bool):
            value = int(value)
        values.append(value)
    return values


def serialize_case(case: Case, format: CaseFormat | str = CaseFormat.JSON) -> str:
    """Write ``case`` so that ``parse_case`` reads back an equal ``Case``."""
    fmt = CaseFormat(format)
    if fmt is CaseFormat.JSON:
        def objects(records, columns):
            return [dict(zip((c[0] for c in columns), _record_values(r, columns))) for r in records]

        gens = [
            {**g, **c}
            for g, c in zip(objects(case.gens, GEN_COLUMNS), objects(case.gencosts, COST_COLUMNS))
        ]
        payload = {
            "baseMVA": case.baseMVA,
            "bus": objects(case.buses, BUS_COLUMNS),
            "branch": objects(case.branches, BRANCH_COLUMNS),
            "gen": gens,
        }
        return json.dumps(payload, indent=2) + "\n"

    lines = ["BASEMVA", repr(float(case.baseMVA))]
    for name, records, columns in (
        ("BUS", case.buses, BUS_COLUMNS),
        ("BRANCH", case.branches, BRANCH_COLUMNS),
        ("GEN", case.gens, GEN_COLUMNS),
        ("COST", case.gencosts, COST_COLUMNS),
    ):
        lines.append(name)
        lines.append("# " + " ".join(c[0] for c in columns))
        for record in records:
            values = [int(BusType[v]) if isinstance(v, str) else v for v in _record_values(record, columns)]
            lines.append(" ".join(repr(v) if isinstance(v, float) else str(v) for v in values))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    record: str = ""

    def __str__(self) -> str:
        prefix = f"{self.record}: " if self.record else ""
        return f"{prefix}{self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.issues

    def __len__(self) -> int:
        return len(self.issues)

    def __iter__(self):
        return iter(self.issues)

    def codes(self) -> list[str]:
        return [issue.code for issue in self.issues]


def validate_case(c: Case) -> ValidationReport:
    """Return every violated case invariant; an empty report means solvable-shaped."""
    issues: list[ValidationIssue] = []

    def add(code: str, message: str, record: str = "") -> None:
        issues.append(ValidationIssue(code, message, record))

    if not (c.baseMVA > 0):
        add("nonpositive base", f"baseMVA must be positive, got {c.baseMVA}")

    ids: set[int] = set()
    for bus in c.buses:
        if bus.bus_id in ids:
            add("duplicate bus", f"bus ID {bus.bus_id} appears more than once", f"bus {bus.bus_id}")
        ids.add(bus.bus_id)
        if not (0 < bus.Vmin <= bus.Vmax):
            add("voltage limits", f"need 0 < Vmin <= Vmax, got [{bus.Vmin}, {bus.Vmax}]", f"bus {bus.bus_id}")

    refs = [bus.bus_id for bus in c.buses if bus.bus_type is BusType.REF]
    if not refs:
        add("no slack", "no bus has type REF")
    elif len(refs) > 1:
        add("multiple slack", "buses " + ", ".join(str(i) for i in refs) + " all have type REF")

    for k, br in enumerate(c.branches):
        where = f"branch {k}"
        for end in (br.fbus, br.tbus):
            if end not in ids:
                add("unknown bus", f"bus ID {end} does not exist", where)
        if br.fbus == br.tbus:
            add("self loop", f"from and to bus are both {br.fbus}", where)
        if not (br.r * br.r + br.x * br.x > 0):
            add("zero impedance", "series impedance r + jx must be nonzero", where)
        if br.tau < 0:
            add("nonpositive tap", f"tap ratio must not be negative, got {br.tau}", where)
        if br.imax < 0:
            add("negative current limit", f"Imax must be >= 0, got {br.imax}", where)
        if br.adjustable:
            if not (br.tau_min > 0):
                add("nonpositive tap lower bound", f"tauMin must be positive, got {br.tau_min}", where)
            if not (br.tau_min <= br.effective_tau <= br.tau_max):
                add(
                    "tap out of bounds",
                    f"tap {br.effective_tau} outside [{br.tau_min}, {br.tau_max}]",
                    where,
                )
            if not (br.theta_min <= br.theta <= br.theta_max):
                add(
                    "phase out of bounds",
                    f"phase shift {br.theta} outside [{br.theta_min}, {br.theta_max}]",
                    where,
                )

    for k, gen in enumerate(c.gens):
        where = f"gen {k}"
        if gen.bus not in ids:
            add("unknown bus", f"bus ID {gen.bus} does not exist", where)
        if not (gen.Pmin <= gen.Pmax and gen.Qmin <= gen.Qmax):
            add("generation limits", "need Pmin <= Pmax and Qmin <= Qmax", where)

    if len(c.gencosts) != len(c.gens):
        add("cost count", f"{len(c.gencosts)} cost rows for {len(c.gens)} generators")
    for k, cost in enumerate(c.gencosts):
        if not all(math.isfinite(v) for v in (cost.c2, cost.c1, cost.c0)):
            add("nonfinite cost", "cost coefficients must be finite", f"cost {k}")

    if len(refs) == 1 and not any(gen.bus == refs[0] for gen in c.gens):
        add("slack without generator", f"REF bus {refs[0]} has no generator", f"bus {refs[0]}")

    return ValidationReport(tuple(issues))


@dataclass(frozen=True, eq=False)
class InternalModel:
    """Per-unit network with contiguous 0-based indices.

    Angles are radians, powers are divided by ``base_mva``. Tap and phase
    bounds are stored for the adjustable branches only, in the order of
    ``adjustable``.
    """

    base_mva: float
    bus_ids: np.ndarray
    bus_types: np.ndarray
    ref: int
    f: np.ndarray
    t: np.ndarray
    gen_bus: np.ndarray
    Cf: sp.csr_matrix
    Ct: sp.csr_matrix
    Cg: sp.csr_matrix
    ys: np.ndarray
    bc: np.ndarray
    Ysh: np.ndarray
    Sd: np.ndarray
    tau0: np.ndarray
    theta0: np.ndarray
    imax: np.ndarray
    adjustable: np.ndarray
    tau_min: np.ndarray
    tau_max: np.ndarray
    theta_min: np.ndarray
    theta_max: np.ndarray
    Vm0: np.ndarray
    Va0: np.ndarray
    Vmin: np.ndarray
    Vmax: np.ndarray
    Pg0: np.ndarray
    Qg0: np.ndarray
    Pmin: np.ndarray
    Pmax: np.ndarray
    Qmin: np.ndarray
    Qmax: np.ndarray
    cost: np.ndarray
    branch_index: np.ndarray

    @property
    def nb(self) -> int:
        return len(self.bus_ids)

    @property
    def nl(self) -> int:
        return len(self.f)

    @property
    def ng(self) -> int:
        return len(self.gen_bus)

    @property
    def na(self) -> int:
        return len(self.adjustable)

    @property
    def constrained(self) -> np.ndarray:
        """Branches with a current limit (Imax > 0)."""
        return np.flatnonzero(self.imax > 0)

    @property
    def pv(self) -> np.ndarray:
        return np.flatnonzero(self.bus_types == BusType.PV)

    @property
    def pq(self) -> np.ndarray:
        return np.flatnonzero(self.bus_types == BusType.PQ)


def connection_matrix(index: np.ndarray, n: int) -> sp.csr_matrix:
    """Rows select ``index[k]`` out of ``n`` columns."""
    rows = np.arange(len(index))
    return sp.csr_matrix((np.ones(len(index)), (rows, index)), shape=(len(index), n))


def to_internal(c: Case) -> InternalModel:
    base = float(c.baseMVA)
    nb = len(c.buses)
    position = {bus.bus_id: i for i, bus in enumerate(c.buses)}
    refs = [i for i, bus in enumerate(c.buses) if bus.bus_type is BusType.REF]
    if len(refs) != 1:
        raise CaseError("case must have exactly one REF bus; run validate_case first")

    live = [k for k, br in enumerate(c.branches) if br.status]
    branches = [c.branches[k] for k in live]
    f = np.array([position[br.fbus] for br in branches], dtype=int)
    t = np.array([position[br.tbus] for br in branches], dtype=int)
    if nb > 1:
        touched = np.zeros(nb, dtype=bool)
        touched[f] = True
        touched[t] = True
        isolated = [c.buses[i].bus_id for i in np.flatnonzero(~touched)]
        if isolated:
            raise IsolatedBusError(
                "isolated bus(es) after status filtering: " + ", ".join(str(i) for i in isolated)
            )

    r = np.array([br.r for br in branches], dtype=float)
    x = np.array([br.x for br in branches], dtype=float)
    adjustable = np.array([k for k, br in enumerate(branches) if br.adjustable], dtype=int)
    adj = [branches[k] for k in adjustable]

    gen_bus = np.array([position[g.bus] for g in c.gens], dtype=int)
    ng = len(gen_bus)
    Cg = sp.csr_matrix((np.ones(ng), (gen_bus, np.arange(ng))), shape=(nb, ng))

    def bus_array(name: str) -> np.ndarray:
        return np.array([getattr(bus, name) for bus in c.buses], dtype=float)

    def gen_array(name: str) -> np.ndarray:
        return np.array([getattr(g, name) for g in c.gens], dtype=float) / base

    return InternalModel(
        base_mva=base,
        bus_ids=np.array([bus.bus_id for bus in c.buses], dtype=int),
        bus_types=np.array([int(bus.bus_type) for bus in c.buses], dtype=int),
        ref=refs[0],
        f=f,
        t=t,
        gen_bus=gen_bus,
        Cf=connection_matrix(f, nb),
        Ct=connection_matrix(t, nb),
        Cg=Cg,
        ys=1.0 / (r + 1j * x) if len(branches) else np.zeros(0, dtype=complex),
        bc=np.array([br.b for br in branches], dtype=float),
        Ysh=(bus_array("Gs") + 1j * bus_array("Bs")) / base,
        Sd=(bus_array("Pd") + 1j * bus_array("Qd")) / base,
        tau0=np.array([br.effective_tau for br in branches], dtype=float),
        theta0=np.deg2rad(np.array([br.theta for br in branches], dtype=float)),
        imax=np.array([br.imax for br in branches], dtype=float),
        adjustable=adjustable,
        tau_min=np.array([br.tau_min for br in adj], dtype=float),
        tau_max=np.array([br.tau_max for br in adj], dtype=float),
        theta_min=np.deg2rad(np.array([br.theta_min for br in adj], dtype=float)),
        theta_max=np.deg2rad(np.array([br.theta_max for br in adj], dtype=float)),
        Vm0=bus_array("Vm"),
        Va0=np.deg2rad(bus_array("Va")),
        Vmin=bus_array("Vmin"),
        Vmax=bus_array("Vmax"),
        Pg0=gen_array("Pg"),
        Qg0=gen_array("Qg"),
        Pmin=gen_array("Pmin"),
        Pmax=gen_array("Pmax"),
        Qmin=gen_array("Qmin"),
        Qmax=gen_array("Qmax"),
        cost=np.array([[cost.c2, cost.c1, cost.c0] for cost in c.gencosts], dtype=float).reshape(-1, 3),
        branch_index=np.array(live, dtype=int),
    )


def from_internal(m: InternalModel) -> Case:
    """Rebuild a case from a normalized model (in-service branches only)."""
    base = m.base_mva
    z = 1.0 / m.ys if m.nl else np.zeros(0, dtype=complex)
    Gs = m.Ysh.real * base
    Bs = m.Ysh.imag * base
    buses = tuple(
        BusRecord(
            bus_id=int(m.bus_ids[i]),
            bus_type=BusType(int(m.bus_types[i])),
            Pd=float(m.Sd[i].real * base),
            Qd=float(m.Sd[i].imag * base),
            Gs=float(Gs[i]),
            Bs=float(Bs[i]),
            Vm=float(m.Vm0[i]),
            Va=float(np.rad2deg(m.Va0[i])),
            Vmin=float(m.Vmin[i]),
            Vmax=float(m.Vmax[i]),
        )
        for i in range(m.nb)
    )
    position = {int(k): a for a, k in enumerate(m.adjustable)}
    branches = []
    for k in range(m.nl):
        theta = float(np.rad2deg(m.theta0[k]))
        record = BranchRecord(
            fbus=int(m.bus_ids[m.f[k]]),
            tbus=int(m.bus_ids[m.t[k]]),
            r=float(z[k].real),
            x=float(z[k].imag),
            b=float(m.bc[k]),
            tau=float(m.tau0[k]),
            theta=theta,
            tau_min=float(m.tau0[k]),
            tau_max=float(m.tau0[k]),
            theta_min=theta,
            theta_max=theta,
            imax=float(m.imax[k]),
        )
        if k in position:
            a = position[k]
            record = replace(
                record,
                adjustable=True,
                tau_min=float(m.tau_min[a]),
                tau_max=float(m.tau_max[a]),
                theta_min=float(np.rad2deg(m.theta_min[a])),
                theta_max=float(np.rad2deg(m.theta_max[a])),
            )
        branches.append(record)
    gens = tuple(
        GenRecord(
            bus=int(m.bus_ids[m.gen_bus[g]]),
            Pg=float(m.Pg0[g] * base),
            Qg=float(m.Qg0[g] * base),
            Pmin=float(m.Pmin[g] * base),
            Pmax=float(m.Pmax[g] * base),
            Qmin=float(m.Qmin[g] * base),
            Qmax=float(m.Qmax[g] * base),
        )
        for g in range(m.ng)
    )
    costs = tuple(CostRecord(*map(float, row)) for row in m.cost)
    return Case(base, buses, tuple(branches), gens, costs)


def load_case(path, format: CaseFormat | str | None = None) -> Case:
    """Read a case file; the format defaults to the file extension."""
    path = Path(path)
    if format is None:
        format = CaseFormat.JSON if path.suffix.lower() == ".json" else CaseFormat.MPC_TABLE
    return parse_case(path.read_text(encoding="utf-8"), format)


__all__ = [
    "BRANCH_COLUMNS",
    "BUS_COLUMNS",
    "BranchRecord",
    "BusRecord",
    "BusType",
    "Case",
    "CaseError",
    "CaseFormat",
    "CaseSyntaxError",
    "CostRecord",
    "GenRecord",
    "InternalModel",
    "IsolatedBusError",
    "ValidationIssue",
    "ValidationReport",
    "connection_matrix",
    "from_internal",
    "load_case",
    "parse_case",
    "serialize_case",
    "to_internal",
    "validate_case",
]
