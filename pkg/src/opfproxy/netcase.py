"""Network case descriptions and the constant matrices of the DC-linearized OPF.

Case file format
----------------
UTF-8 text. Blank lines and everything after ``#`` are ignored. An optional
preamble before the first section sets the power base::

    base_mva = 100

followed by three sections, one comma-separated record per line, fields in
exactly this order::

    [buses]
    id, nominal_load, is_slack          # load in pu, is_slack in {0, 1}
    [branches]
    from_bus, to_bus, reactance, flow_limit
    [generators]
    bus, p_min, p_max, cost_quadratic, cost_linear, cost_constant

All power quantities are per unit on ``base_mva``. Generator cost is
``cost_quadratic * p**2 + cost_linear * p + cost_constant``. Branch flow is
positive in the from_bus -> to_bus direction and limited to
``[-flow_limit, flow_limit]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Branch",
    "Bus",
    "CaseFormatError",
    "CaseValidationError",
    "DcModel",
    "Generator",
    "NetworkCase",
    "NetworkError",
    "build_dc_model",
    "bundled_case_path",
    "format_case",
    "load_case",
    "nominal_load_vector",
    "parse_case",
]

SECTIONS = ("buses", "branches", "generators")
_FIELD_NAMES = {
    "buses": ("id", "nominal_load", "is_slack"),
    "branches": ("from_bus", "to_bus", "reactance", "flow_limit"),
    "generators": ("bus", "p_min", "p_max", "cost_quadratic", "cost_linear", "cost_constant"),
}


class CaseFormatError(ValueError):
    """Syntax error in a case file, with its location."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class CaseValidationError(ValueError):
    """Semantically invalid case (dangling reference, duplicate id, bad value)."""


class NetworkError(ValueError):
    """The network cannot be linearized (disconnected or singular)."""


@dataclass(frozen=True)
class Bus:
    id: int
    nominal_load: float
    is_slack: bool


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    reactance: float
    flow_limit: float


@dataclass(frozen=True)
class Generator:
    bus: int
    p_min: float
    p_max: float
    cost_quadratic: float
    cost_linear: float
    cost_constant: float


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    name: str = "case"

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "generators", tuple(self.generators))
        _validate(self)

    @property
    def n_b(self) -> int:
        return len(self.buses)

    @property
    def bus_ids(self) -> list[int]:
        return sorted(b.id for b in self.buses)

    @property
    def slack_bus(self) -> int:
        return next(b.id for b in self.buses if b.is_slack)


def _validate(case: NetworkCase) -> None:
    if not (math.isfinite(case.base_mva) and case.base_mva > 0):
        raise CaseValidationError(f"base_mva must be positive, got {case.base_mva}")
    if not case.buses:
        raise CaseValidationError("case has no buses")
    ids = [b.id for b in case.buses]
    seen: set[int] = set()
    for bus_id in ids:
        if bus_id in seen:
            raise CaseValidationError(f"duplicate bus id {bus_id}")
        seen.add(bus_id)
    n_slack = sum(b.is_slack for b in case.buses)
    if n_slack != 1:
        raise CaseValidationError(f"exactly one slack bus required, found {n_slack}")
    for b in case.buses:
        if not (math.isfinite(b.nominal_load) and b.nominal_load >= 0):
            raise CaseValidationError(f"bus {b.id}: nominal_load must be >= 0, got {b.nominal_load}")
    for k, br in enumerate(case.branches):
        for end in (br.from_bus, br.to_bus):
            if end not in seen:
                raise CaseValidationError(f"branch {k}: references nonexistent bus {end}")
        if br.from_bus == br.to_bus:
            raise CaseValidationError(f"branch {k}: from_bus equals to_bus ({br.from_bus})")
        if not (math.isfinite(br.reactance) and br.reactance > 0):
            raise CaseValidationError(f"branch {k}: reactance must be > 0, got {br.reactance}")
        if not (br.flow_limit > 0):
            raise CaseValidationError(f"branch {k}: flow_limit must be > 0, got {br.flow_limit}")
    for k, g in enumerate(case.generators):
        if g.bus not in seen:
            raise CaseValidationError(f"generator {k}: references nonexistent bus {g.bus}")
        if not (0 <= g.p_min <= g.p_max):
            raise CaseValidationError(
                f"generator {k}: need 0 <= p_min <= p_max, got [{g.p_min}, {g.p_max}]"
            )
        if not g.cost_quadratic >= 0:
            raise CaseValidationError(f"generator {k}: cost_quadratic must be >= 0")


def _parse_number(token: str, lineno: int, field: str, integer: bool = False):
    token = token.strip()
    try:
        if integer:
            return int(token)
        value = float(token)
    except ValueError:
        kind = "an integer" if integer else "a number"
        raise CaseFormatError(f"expected {kind}, got {token!r}", lineno, field) from None
    if math.isnan(value):
        raise CaseFormatError("NaN is not allowed", lineno, field)
    return value


def parse_case(text: str, name: str = "case") -> NetworkCase:
    """Parse case-file text into a validated :class:`NetworkCase`."""
    base_mva = 100.0
    section: str | None = None
    rows: dict[str, list] = {s: [] for s in SECTIONS}
    seen_sections: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise CaseFormatError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                raise CaseFormatError(f"unknown section [{section}]", lineno)
            if section in seen_sections:
                raise CaseFormatError(f"duplicate section [{section}]", lineno)
            seen_sections.add(section)
            continue
        if section is None:
            key, sep, value = line.partition("=")
            if not sep or key.strip() != "base_mva":
                raise CaseFormatError(f"unexpected content before first section: {line!r}", lineno)
            base_mva = _parse_number(value, lineno, "base_mva")
            continue

        fields = _FIELD_NAMES[section]
        tokens = line.split(",")
        if len(tokens) != len(fields):
            raise CaseFormatError(
                f"[{section}] record needs {len(fields)} fields ({', '.join(fields)}), got {len(tokens)}",
                lineno,
            )
        if section == "buses":
            slack = _parse_number(tokens[2], lineno, "is_slack", integer=True)
            if slack not in (0, 1):
                raise CaseFormatError(f"is_slack must be 0 or 1, got {slack}", lineno, "is_slack")
            rows[section].append(
                Bus(
                    _parse_number(tokens[0], lineno, "id", integer=True),
                    _parse_number(tokens[1], lineno, "nominal_load"),
                    bool(slack),
                )
            )
        elif section == "branches":
            rows[section].append(
                Branch(
                    _parse_number(tokens[0], lineno, "from_bus", integer=True),
                    _parse_number(tokens[1], lineno, "to_bus", integer=True),
                    _parse_number(tokens[2], lineno, "reactance"),
                    _parse_number(tokens[3], lineno, "flow_limit"),
                )
            )
        else:
            rows[section].append(
                Generator(
                    _parse_number(tokens[0], lineno, "bus", integer=True),
                    *(_parse_number(t, lineno, f) for t, f in zip(tokens[1:], fields[1:])),
                )
            )

    missing = [s for s in SECTIONS if s not in seen_sections]
    if missing:
        raise CaseFormatError(f"missing section(s): {', '.join('[' + s + ']' for s in missing)}")
    return NetworkCase(base_mva, rows["buses"], rows["branches"], rows["generators"], name=name)


def format_case(case: NetworkCase) -> str:
    """Serialize a case to the text format; ``parse_case`` inverts it exactly."""
    lines = [f"# {case.name}", f"base_mva = {case.base_mva!r}", "", "[buses]"]
    lines += [f"{b.id}, {b.nominal_load!r}, {int(b.is_slack)}" for b in case.buses]
    lines += ["", "[branches]"]
    lines += [f"{b.from_bus}, {b.to_bus}, {b.reactance!r}, {b.flow_limit!r}" for b in case.branches]
    lines += ["", "[generators]"]
    lines += [
        f"{g.bus}, {g.p_min!r}, {g.p_max!r}, {g.cost_quadratic!r}, {g.cost_linear!r}, {g.cost_constant!r}"
        for g in case.generators
    ]
    return "\n".join(lines) + "\n"


def load_case(path: str | Path) -> NetworkCase:
    path = Path(path)
    return parse_case(path.read_text(encoding="utf-8"), name=path.stem)


def bundled_case_path(name: str) -> Path:
    """Path of a case shipped with the package, e.g. ``"case5"``."""
    filename = name if name.endswith(".net") else f"{name}.net"
    path = Path(str(resources.files("opfproxy") / "data" / filename))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled case named {name!r}")
    return path


def nominal_load_vector(case: NetworkCase) -> np.ndarray:
    """Nominal per-bus demand in bus-id order (zeros for load-free buses)."""
    by_id = {b.id: b.nominal_load for b in case.buses}
    return np.array([by_id[i] for i in case.bus_ids], dtype=float)


@dataclass(frozen=True)
class DcModel:
    """Constant data of the DC-OPF for one network.

    Buses are indexed in ascending id order. ``injection_shift_matrix[k, i]``
    is the flow on branch ``k`` caused by a unit injection at bus ``i``
    withdrawn at the slack bus; the slack column is zero.
    """

    n_b: int
    bus_ids: tuple[int, ...]
    slack_index: int
    injection_shift_matrix: np.ndarray  # (n_branch, n_b)
    gen_incidence: np.ndarray  # (n_b, n_gen)
    flow_limit: np.ndarray  # (n_branch,)
    p_min: np.ndarray
    p_max: np.ndarray
    cost_quadratic: np.ndarray
    cost_linear: np.ndarray
    cost_constant: np.ndarray
    name: str = "case"

    @property
    def n_gen(self) -> int:
        return self.gen_incidence.shape[1]

    @property
    def n_branch(self) -> int:
        return self.injection_shift_matrix.shape[0]

    def branch_flows(self, injection: np.ndarray) -> np.ndarray:
        """DC flows for a balanced nodal injection vector (pu)."""
        return self.injection_shift_matrix @ np.asarray(injection, dtype=float)


def build_dc_model(case: NetworkCase) -> DcModel:
    """Linearize the network: injection shift factors from the reduced susceptance matrix."""
    ids = case.bus_ids
    pos = {bus_id: i for i, bus_id in enumerate(ids)}
    n_b = len(ids)
    n_br = len(case.branches)
    slack = pos[case.slack_bus]

    incidence = np.zeros((n_br, n_b))
    susceptance = np.empty(n_br)
    for k, br in enumerate(case.branches):
        incidence[k, pos[br.from_bus]] = 1.0
        incidence[k, pos[br.to_bus]] = -1.0
        susceptance[k] = 1.0 / br.reactance

    adjacency = (np.abs(incidence.T) @ np.abs(incidence)) > 0
    n_comp, labels = connected_components(adjacency, directed=False)
    if n_comp > 1:
        cut_off = [ids[i] for i in range(n_b) if labels[i] != labels[slack]]
        raise NetworkError(f"network is disconnected; buses {cut_off} unreachable from slack")

    keep = np.arange(n_b) != slack
    b_bus = incidence.T @ (susceptance[:, None] * incidence)
    b_red = b_bus[np.ix_(keep, keep)]
    shift = np.zeros((n_br, n_b))
    if n_b > 1:
        try:
            b_red_inv = np.linalg.solve(b_red, np.eye(n_b - 1))
        except np.linalg.LinAlgError as exc:
            raise NetworkError("reduced susceptance matrix is singular") from exc
        shift[:, keep] = (susceptance[:, None] * incidence[:, keep]) @ b_red_inv

    gen_incidence = np.zeros((n_b, len(case.generators)))
    for j, g in enumerate(case.generators):
        gen_incidence[pos[g.bus], j] = 1.0

    def gen_field(attr: str) -> np.ndarray:
        return np.array([getattr(g, attr) for g in case.generators], dtype=float)

    return DcModel(
        n_b=n_b,
        bus_ids=tuple(ids),
        slack_index=slack,
        injection_shift_matrix=shift,
        gen_incidence=gen_incidence,
        flow_limit=np.array([br.flow_limit for br in case.branches], dtype=float),
        p_min=gen_field("p_min"),
        p_max=gen_field("p_max"),
        cost_quadratic=gen_field("cost_quadratic"),
        cost_linear=gen_field("cost_linear"),
        cost_constant=gen_field("cost_constant"),
        name=case.name,
    )
