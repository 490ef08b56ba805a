"""Nodal network data model, file format, and topology queries."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable

import yaml

EARTH_RADIUS_KM = 6371.0
FORMAT_VERSION = 1

LINE = "line"
TRANSFORMER = "transformer"
GENERATION = "generation"
STORAGE = "storage"
INTEGER = "integer"
CONTINUOUS = "continuous"


class NetworkFormatError(ValueError):
    """Raised when a network file cannot be parsed."""


class NetworkValidationError(ValueError):
    """Raised when a loaded network violates its invariants."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("; ".join(report.errors))


@dataclass(frozen=True)
class GeoCoord:
    latitude: float
    longitude: float

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")


@dataclass(frozen=True)
class Bus:
    id: str
    location: GeoCoord
    is_substation: bool = False
    base_kv: float = 230.0


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    rating: float
    kind: str = LINE
    reinforce_cost: float = 0.0
    reinforcible: bool = False

    @property
    def is_line(self) -> bool:
        return self.kind == LINE


@dataclass(frozen=True)
class Generator:
    id: str
    bus: str
    tech: str
    capacity: float
    variable_cost: float = 0.0
    is_renewable: bool = False
    availability_key: str = ""  # empty: always fully available
    is_hydro_budgeted: bool = False


@dataclass(frozen=True)
class Storage:
    id: str
    bus: str
    power_capacity: float
    energy_capacity: float
    round_trip_efficiency: float = 1.0


@dataclass(frozen=True)
class Load:
    id: str
    bus: str
    profile_key: str
    peak: float


@dataclass(frozen=True)
class Candidate:
    """A site where new generation or storage may be built.

    ``max_build`` is the land-use limit in MW. Integer candidates are built
    in whole units of ``unit_size`` MW; storage candidates get
    ``duration_hours`` of energy per MW of power.
    """

    id: str
    bus: str
    kind: str
    tech: str
    capex: float
    max_build: float
    unit_size: float = 1.0
    integrality: str = CONTINUOUS
    variable_cost: float = 0.0
    is_renewable: bool = False
    availability_key: str = ""
    duration_hours: float = 4.0
    round_trip_efficiency: float = 1.0

    @property
    def max_units(self) -> int:
        return int(math.floor(self.max_build / self.unit_size + 1e-9))


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...] = ()
    branches: tuple[Branch, ...] = ()
    generators: tuple[Generator, ...] = ()
    storage: tuple[Storage, ...] = ()
    loads: tuple[Load, ...] = ()
    candidates: tuple[Candidate, ...] = ()
    name: str = "network"
    _bus_index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        for f in ("buses", "branches", "generators", "storage", "loads", "candidates"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        object.__setattr__(self, "_bus_index", {b.id: b for b in self.buses})

    def bus(self, bus_id: str) -> Bus:
        try:
            return self._bus_index[bus_id]
        except KeyError:
            raise KeyError(f"unknown bus {bus_id!r}") from None

    def has_bus(self, bus_id: str) -> bool:
        return bus_id in self._bus_index

    @property
    def lines(self) -> tuple[Branch, ...]:
        return tuple(b for b in self.branches if b.kind == LINE)

    @property
    def transformers(self) -> tuple[Branch, ...]:
        return tuple(b for b in self.branches if b.kind == TRANSFORMER)

    def branch(self, branch_id: str) -> Branch:
        for b in self.branches:
            if b.id == branch_id:
                return b
        raise KeyError(f"unknown branch {branch_id!r}")

    def candidate(self, cand_id: str) -> Candidate:
        for c in self.candidates:
            if c.id == cand_id:
                return c
        raise KeyError(f"unknown candidate {cand_id!r}")

    def replace(self, **changes) -> "Network":
        kw = {f.name: getattr(self, f.name) for f in fields(self) if f.init}
        kw.update(changes)
        return Network(**kw)


def haversine_distance(a: GeoCoord, b: GeoCoord) -> float:
    """Great-circle distance in km between two coordinates."""
    lat1, lon1 = math.radians(a.latitude), math.radians(a.longitude)
    lat2, lon2 = math.radians(b.latitude), math.radians(b.longitude)
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def bus_distance(net: Network, i: str, j: str) -> float:
    return haversine_distance(net.bus(i).location, net.bus(j).location)


def degrees(net: Network) -> dict[str, int]:
    """Branch degree of every bus, transformers included."""
    deg = {b.id: 0 for b in net.buses}
    for br in net.branches:
        deg[br.from_bus] += 1
        deg[br.to_bus] += 1
    return deg


def bus_degree(net: Network, i: str) -> int:
    net.bus(i)
    return sum((br.from_bus == i) + (br.to_bus == i) for br in net.branches)


def radial_lines(net: Network) -> set[str]:
    deg = degrees(net)
    return {br.id for br in net.lines if deg[br.from_bus] == 1 or deg[br.to_bus] == 1}


def connected_components(bus_ids: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[set[str]]:
    adj = defaultdict(set)
    nodes = list(bus_ids)
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen, comps = set(), []
    for s in nodes:
        if s in seen:
            continue
        comp, stack = set(), [s]
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        comps.append(comp)
    return comps


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_network(net: Network) -> ValidationReport:
    rep = ValidationReport()
    for kind, items in (("bus", net.buses), ("branch", net.branches), ("generator", net.generators),
                        ("storage", net.storage), ("load", net.loads), ("candidate", net.candidates)):
        for ident, n in Counter(it.id for it in items).items():
            if n > 1:
                rep.errors.append(f"duplicate {kind} id {ident!r}")
        for it in items:
            if any(c.isspace() for c in str(it.id)) or not str(it.id):
                rep.errors.append(f"{kind} id {it.id!r} is empty or contains whitespace")

    for br in net.branches:
        for end in (br.from_bus, br.to_bus):
            if not net.has_bus(end):
                rep.errors.append(f"branch {br.id!r} references missing bus {end!r}")
        if br.from_bus == br.to_bus:
            rep.errors.append(f"branch {br.id!r} is a self-loop at bus {br.from_bus!r}")
        if br.kind not in (LINE, TRANSFORMER):
            rep.errors.append(f"branch {br.id!r} has unknown kind {br.kind!r}")
        if not br.x > 0:
            rep.errors.append(f"branch {br.id!r} has nonpositive reactance x={br.x}")
        if br.r < 0:
            rep.errors.append(f"branch {br.id!r} has negative resistance r={br.r}")
        if not br.rating > 0:
            rep.errors.append(f"branch {br.id!r} has nonpositive rating {br.rating}")
        if br.reinforce_cost < 0:
            rep.errors.append(f"branch {br.id!r} has negative reinforce_cost")

    for kind, items in (("generator", net.generators), ("storage", net.storage),
                        ("load", net.loads), ("candidate", net.candidates)):
        for it in items:
            if not net.has_bus(it.bus):
                rep.errors.append(f"{kind} {it.id!r} references missing bus {it.bus!r}")
    for b in net.buses:
        if not b.base_kv > 0:
            rep.errors.append(f"bus {b.id!r} has nonpositive base_kv")
    for g in net.generators:
        if g.capacity < 0 or g.variable_cost < 0:
            rep.errors.append(f"generator {g.id!r} has negative capacity or cost")
    for s in net.storage:
        if s.power_capacity < 0 or s.energy_capacity < 0:
            rep.errors.append(f"storage {s.id!r} has negative capacity")
        if not 0 < s.round_trip_efficiency <= 1:
            rep.errors.append(f"storage {s.id!r} efficiency outside (0, 1]")
    for ld in net.loads:
        if ld.peak < 0:
            rep.errors.append(f"load {ld.id!r} has negative peak")
    for c in net.candidates:
        if c.kind not in (GENERATION, STORAGE):
            rep.errors.append(f"candidate {c.id!r} has unknown kind {c.kind!r}")
        if c.integrality not in (INTEGER, CONTINUOUS):
            rep.errors.append(f"candidate {c.id!r} has unknown integrality {c.integrality!r}")
        if not c.unit_size > 0:
            rep.errors.append(f"candidate {c.id!r} has nonpositive unit_size")
        if c.max_build < 0:
            rep.errors.append(f"candidate {c.id!r} has negative max_build")
        if c.kind == STORAGE and not 0 < c.round_trip_efficiency <= 1:
            rep.errors.append(f"candidate {c.id!r} efficiency outside (0, 1]")

    if net.buses and not rep.errors:
        comps = connected_components([b.id for b in net.buses],
                                     [(br.from_bus, br.to_bus) for br in net.branches])
        if len(comps) > 1:
            rep.warnings.append(f"network has {len(comps)} disconnected components")
    return rep


# --- file format -----------------------------------------------------------

_SECTIONS = {
    "buses": Bus,
    "branches": Branch,
    "generators": Generator,
    "storage": Storage,
    "loads": Load,
    "candidates": Candidate,
}


_SINGULAR = {"buses": "bus", "branches": "branch", "generators": "generator", "storage": "storage",
             "loads": "load", "candidates": "candidate"}


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    mapping = loader.construct_mapping(node, deep=True)
    mapping["__line__"] = node.start_mark.line + 1
    return mapping


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _record(section: str, cls, raw: dict):
    if not isinstance(raw, dict):
        raise NetworkFormatError(f"{section}: expected a mapping, got {raw!r}")
    line = raw.pop("__line__", "?")
    ident = raw.get("id", "<no id>")
    where = f"{_SINGULAR[section]} {ident!r} (line {line})"
    known = {f.name: f for f in fields(cls) if f.init}
    unknown = set(raw) - set(known)
    if unknown:
        raise NetworkFormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    kw = {}
    for name, f in known.items():
        if name not in raw:
            if f.default is MISSING and f.default_factory is MISSING:
                raise NetworkFormatError(f"{where}: missing required field {name!r}")
            continue
        val = raw[name]
        if name == "location":
            if not isinstance(val, dict):
                raise NetworkFormatError(f"{where}: location must be a mapping")
            val.pop("__line__", None)
            try:
                val = GeoCoord(float(val["latitude"]), float(val["longitude"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise NetworkFormatError(f"{where}: bad location: {exc}") from None
        elif f.type in ("float",):
            try:
                val = float(val)
            except (TypeError, ValueError):
                raise NetworkFormatError(f"{where}: field {name!r} is not a number: {val!r}") from None
        elif f.type == "bool":
            if not isinstance(val, bool):
                raise NetworkFormatError(f"{where}: field {name!r} must be true/false")
        elif f.type == "str":
            val = str(val)
        kw[name] = val
    return cls(**kw)


def network_from_dict(doc: dict) -> Network:
    if not isinstance(doc, dict):
        raise NetworkFormatError("network document must be a mapping")
    doc = dict(doc)
    doc.pop("__line__", None)
    if doc.get("format") != FORMAT_VERSION:
        raise NetworkFormatError(f"missing or unsupported 'format' header (expected {FORMAT_VERSION})")
    parts = {}
    for section, cls in _SECTIONS.items():
        raw = doc.get(section) or []
        if not isinstance(raw, list):
            raise NetworkFormatError(f"section {section!r} must be a list")
        parts[section] = [_record(section, cls, dict(r) if isinstance(r, dict) else r) for r in raw]
    return Network(name=str(doc.get("name", "network")), **parts)


def network_to_dict(net: Network) -> dict:
    doc = {"format": FORMAT_VERSION, "name": net.name}
    for section in _SECTIONS:
        doc[section] = [asdict(it) for it in getattr(net, section)]
    return doc


def load_network(path) -> Network:
    """Read, parse and validate a network file."""
    text = Path(path).read_text()
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        raise NetworkFormatError(f"{path}: {exc}") from None
    net = network_from_dict(doc)
    report = validate_network(net)
    if report.errors:
        raise NetworkValidationError(report)
    return net


def save_network(net: Network, path) -> None:
    Path(path).write_text(yaml.safe_dump(network_to_dict(net), sort_keys=False))
