"""Distance-threshold network reduction.

Radial lines whose endpoints lie within ``distance_km`` of each other are
collapsed first (the degree-1 bus disappears into its neighbour). In full
mode the remaining short lines are then merged pairwise: the two buses
become one, parallel lines between them collapse into a single equivalent
line, and lines hanging off the absorbed bus are re-attached in series with
that equivalent. Transformers are never collapsed, only re-endpointed.

Every reduction returns a :class:`MergeMap` so that investments decided on
the reduced network can be traced back to original elements.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence, Union

import yaml

from .grid import (
    LINE,
    TRANSFORMER,
    Branch,
    Bus,
    Network,
    bus_degree,
    haversine_distance,
)

RADIAL = "radial"
FULL = "full"

# A composition tree: an original line id, or {"series": [...]} / {"parallel": [...]}.
Composition = Union[str, dict]


@dataclass(frozen=True)
class ReductionConfig:
    distance_km: float
    mode: str = FULL
    tighten: bool = False

    def __post_init__(self):
        if math.isnan(self.distance_km) or self.distance_km < 0:
            raise ValueError(f"distance_km must be >= 0, got {self.distance_km}")
        if self.mode not in (RADIAL, FULL):
            raise ValueError(f"mode must be 'radial' or 'full', got {self.mode!r}")


def flatten(comp: Composition) -> list[str]:
    if isinstance(comp, str):
        return [comp]
    (op, parts), = comp.items()
    out = []
    for p in parts:
        out.extend(flatten(p))
    return out


def compose_impedance(comp: Composition, lookup) -> tuple[float, float]:
    """Recompute (r, x) of a composition tree from original branch parameters."""
    if isinstance(comp, str):
        br = lookup(comp)
        return br.r, br.x
    (op, parts), = comp.items()
    zs = [complex(*compose_impedance(p, lookup)) for p in parts]
    if op == "series":
        z = sum(zs)
    elif op == "parallel":
        z = 1 / sum(1 / zk for zk in zs)
    else:
        raise ValueError(f"unknown composition operator {op!r}")
    return z.real, z.imag


@dataclass
class MergeMap:
    """Provenance of a reduction.

    ``line_composition`` covers every branch of the reduced network; an
    untouched branch maps to its own id. An original line absorbed as the
    collapsed pair line of a merge can appear in several compositions when
    it was re-attached in series to several outer lines.
    """

    bus_map: dict[str, str] = field(default_factory=dict)
    line_composition: dict[str, Composition] = field(default_factory=dict)
    removed_lines: list[str] = field(default_factory=list)
    relocation: dict[str, str] = field(default_factory=dict)

    def components(self, reduced_branch_id: str) -> list[str]:
        return flatten(self.line_composition[reduced_branch_id])

    def absorbed(self, reduced_bus_id: str) -> list[str]:
        return [o for o, r in self.bus_map.items() if r == reduced_bus_id]

    def to_dict(self) -> dict:
        return {
            "format": 1,
            "bus_map": dict(self.bus_map),
            "line_composition": dict(self.line_composition),
            "removed_lines": list(self.removed_lines),
            "relocation": dict(self.relocation),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MergeMap":
        if doc.get("format") != 1:
            raise ValueError("merge map: missing or unsupported 'format' header")
        return cls(
            bus_map={str(k): str(v) for k, v in doc["bus_map"].items()},
            line_composition={str(k): v for k, v in doc["line_composition"].items()},
            removed_lines=[str(x) for x in doc.get("removed_lines", [])],
            relocation={str(k): str(v) for k, v in doc.get("relocation", {}).items()},
        )

    def save(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @classmethod
    def load(cls, path) -> "MergeMap":
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))


def _check_chain(chain):
    if not chain:
        raise ValueError("empty branch chain")


def series_equivalent(chain: Sequence, rating: str = "min") -> tuple[float, float, float]:
    """Series impedance of a chain of branches.

    ``rating="min"`` takes the bottleneck rating of the chain; ``"outer"``
    keeps the rating of the last branch, which is how a line re-attached to a
    merged bus inherits its own rating.
    """
    _check_chain(chain)
    r = sum(b.r for b in chain)
    x = sum(b.x for b in chain)
    if rating == "min":
        p = min(b.rating for b in chain)
    elif rating == "outer":
        p = chain[-1].rating
    else:
        raise ValueError(f"unknown rating rule {rating!r}")
    return r, x, p


def parallel_equivalent(group: Sequence) -> tuple[float, float, float]:
    """Parallel impedance via summed complex admittances; ratings add."""
    _check_chain(group)
    y = 0j
    for b in group:
        z = complex(b.r, b.x)
        if z == 0:
            raise ValueError(f"branch {getattr(b, 'id', '?')} has zero impedance")
        y += 1 / z
    z = 1 / y
    return z.real, z.imag, sum(b.rating for b in group)


def _choose_primary(i, j, sub, merged, deg):
    if sub[i] != sub[j]:
        return (i, j) if sub[i] else (j, i)
    if (i in merged) != (j in merged):
        return (i, j) if i in merged else (j, i)
    if deg[i] != deg[j]:
        return (i, j) if deg[i] > deg[j] else (j, i)
    return i, j


def select_primary_bus(i: str, j: str, merged_set, net: Network) -> tuple[str, str]:
    """Pick the surviving bus of a merge; ``i`` is the from-bus of the line."""
    sub = {i: net.bus(i).is_substation, j: net.bus(j).is_substation}
    deg = {i: bus_degree(net, i), j: bus_degree(net, j)}
    return _choose_primary(i, j, sub, set(merged_set), deg)


_MAX_ID = 48


def _merged_id(text: str) -> str:
    if len(text) <= _MAX_ID:
        return text
    return "m_" + hashlib.sha1(text.encode()).hexdigest()[:12]


@dataclass
class _Line:
    id: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    rating: float
    kind: str
    reinforce_cost: float
    reinforcible: bool
    comp: Composition

    def other(self, bus):
        return self.to_bus if self.from_bus == bus else self.from_bus

    def to_branch(self) -> Branch:
        return Branch(id=self.id, from_bus=self.from_bus, to_bus=self.to_bus, r=self.r, x=self.x,
                      rating=self.rating, kind=self.kind, reinforce_cost=self.reinforce_cost,
                      reinforcible=self.reinforcible)


class _Reducer:
    def __init__(self, net: Network, distance_km: float):
        self.net = net
        self.D = distance_km
        self.buses: dict[str, Bus] = {b.id: b for b in net.buses}
        self.branches: dict[str, _Line] = {
            br.id: _Line(br.id, br.from_bus, br.to_bus, br.r, br.x, br.rating, br.kind,
                         br.reinforce_cost, br.reinforcible, br.id)
            for br in net.branches
        }
        self.merged: set[str] = set()
        self.bus_map = {b.id: b.id for b in net.buses}
        self.removed: list[str] = []
        self._dist: dict[str, float] = {}

    def dist(self, ln: _Line) -> float:
        d = self._dist.get(ln.id)
        if d is None:
            d = haversine_distance(self.buses[ln.from_bus].location, self.buses[ln.to_bus].location)
            self._dist[ln.id] = d
        return d

    def degrees(self):
        deg = {b: 0 for b in self.buses}
        for ln in self.branches.values():
            deg[ln.from_bus] += 1
            deg[ln.to_bus] += 1
        return deg

    def lines(self):
        return [ln for ln in self.branches.values() if ln.kind == LINE]

    def absorb(self, p: str, s: str):
        """Fold bus ``s`` into ``p``: relabel, keep p's location."""
        bp, bs = self.buses[p], self.buses[s]
        if bs.is_substation and not bp.is_substation:
            self.buses[p] = Bus(bp.id, bp.location, True, bp.base_kv)
        del self.buses[s]
        for o, r in self.bus_map.items():
            if r == s:
                self.bus_map[o] = p
        self.merged.add(p)

    def reattach(self, ln: _Line, s: str, p: str):
        if ln.from_bus == s:
            ln.from_bus = p
        if ln.to_bus == s:
            ln.to_bus = p
        self._dist.pop(ln.id, None)

    def part_one(self):
        while True:
            deg = self.degrees()
            eligible = [ln for ln in self.lines()
                        if (deg[ln.from_bus] == 1 or deg[ln.to_bus] == 1) and self.dist(ln) <= self.D]
            if not eligible:
                return
            ln = min(eligible, key=lambda l: (self.dist(l), l.id))
            p = ln.from_bus if deg[ln.from_bus] > 1 else ln.to_bus
            s = ln.other(p)
            del self.branches[ln.id]
            self.removed.extend(flatten(ln.comp))
            self.absorb(p, s)

    def _transformer_pairs(self):
        return {frozenset((t.from_bus, t.to_bus)) for t in self.branches.values() if t.kind == TRANSFORMER}

    def part_two(self):
        while True:
            tpairs = self._transformer_pairs()
            eligible = [ln for ln in self.lines()
                        if self.dist(ln) <= self.D
                        and frozenset((ln.from_bus, ln.to_bus)) not in tpairs]
            if not eligible:
                return
            trigger = min(eligible, key=lambda l: (self.dist(l), l.id))
            i, j = trigger.from_bus, trigger.to_bus
            sub = {b: self.buses[b].is_substation for b in (i, j)}
            p, s = _choose_primary(i, j, sub, self.merged, self.degrees())

            pair = {p, s}
            group = [ln for ln in self.lines() if {ln.from_bus, ln.to_bus} == pair]
            for ln in group:
                del self.branches[ln.id]
            if len(group) == 1:
                star = group[0]
                star_r, star_x, star_comp = star.r, star.x, star.comp
            else:
                group.sort(key=lambda l: l.id)
                star_r, star_x, _ = parallel_equivalent(group)
                star_comp = {"parallel": [l.comp for l in group]}

            outer = sorted((ln for ln in self.lines() if s in (ln.from_bus, ln.to_bus)),
                           key=lambda l: l.id)
            if not outer:
                self.removed.extend(flatten(star_comp))
            star_label = "|".join(l.id for l in group)
            for ln in outer:
                new_id = _merged_id(f"{star_label}+{ln.id}")
                del self.branches[ln.id]
                self._dist.pop(ln.id, None)
                # rating and reinforcement terms follow the re-attached outer line
                merged_ln = _Line(new_id, ln.from_bus, ln.to_bus, star_r + ln.r, star_x + ln.x,
                                  ln.rating, LINE, ln.reinforce_cost, ln.reinforcible,
                                  {"series": [star_comp, ln.comp]})
                self.reattach(merged_ln, s, p)
                self.branches[new_id] = merged_ln
            for t in self.branches.values():
                if t.kind == TRANSFORMER and s in (t.from_bus, t.to_bus):
                    self.reattach(t, s, p)
            self.absorb(p, s)

    def result(self) -> tuple[Network, MergeMap]:
        net = self.net
        bm = self.bus_map

        def moved(items):
            return tuple(replace(it, bus=bm[it.bus]) for it in items)

        relocation = {}
        for items in (net.generators, net.storage, net.loads, net.candidates):
            for it in items:
                relocation[it.id] = bm[it.bus]
        reduced = Network(
            buses=tuple(self.buses[b.id] for b in net.buses if b.id in self.buses),
            branches=tuple(ln.to_branch() for ln in self.branches.values()),
            generators=moved(net.generators),
            storage=moved(net.storage),
            loads=moved(net.loads),
            candidates=moved(net.candidates),
            name=net.name,
        )
        mm = MergeMap(
            bus_map=dict(bm),
            line_composition={ln.id: ln.comp for ln in self.branches.values()},
            removed_lines=list(self.removed),
            relocation=relocation,
        )
        return reduced, mm


def reduce_network(net: Network, cfg: ReductionConfig) -> tuple[Network, MergeMap]:
    """Reduce ``net`` under ``cfg``; the input is left untouched.

    Lines are processed in ascending (distance, id) order with a rescan after
    every merge, so results are reproducible. Lines sharing their endpoint
    pair with a transformer are not merged.
    """
    if not isinstance(cfg, ReductionConfig):
        raise TypeError("cfg must be a ReductionConfig")
    red = _Reducer(net, cfg.distance_km)
    red.part_one()
    if cfg.mode == FULL:
        red.part_two()
    return red.result()


def _incident_line_rating(net: Network) -> dict[str, float]:
    total = {b.id: 0.0 for b in net.buses}
    for ln in net.lines:
        total[ln.from_bus] += ln.rating
        total[ln.to_bus] += ln.rating
    return total


def tighten_candidates(reduced: Network, original: Network, mm: MergeMap, factor: float = 2.0) -> Network:
    """Cap each candidate's max_build at ``factor`` times the summed rating of
    the original lines touching its original bus."""
    orig_bus = {c.id: c.bus for c in original.candidates}
    incident = _incident_line_rating(original)
    out = []
    for c in reduced.candidates:
        if c.id not in orig_bus or mm.relocation.get(c.id) != c.bus:
            raise ValueError(f"merge map inconsistent for candidate {c.id!r}")
        cap = factor * incident[orig_bus[c.id]]
        out.append(replace(c, max_build=min(c.max_build, cap)))
    return reduced.replace(candidates=tuple(out))


def reduce_and_tighten(net: Network, cfg: ReductionConfig) -> tuple[Network, MergeMap]:
    reduced, mm = reduce_network(net, cfg)
    if cfg.tighten:
        reduced = tighten_candidates(reduced, net, mm)
    return reduced, mm


def _summary(net: Network) -> dict:
    lines = net.lines
    return {
        "buses": len(net.buses),
        "branches": len(net.branches),
        "lines": len(lines),
        "transformers": len(net.transformers),
        "generators": len(net.generators),
        "storage": len(net.storage),
        "loads": len(net.loads),
        "candidates": len(net.candidates),
        "min_r": min((l.r for l in lines), default=None),
        "min_x": min((l.x for l in lines), default=None),
    }


def reduction_stats(original: Network, reduced: Network) -> dict:
    return {"original": _summary(original), "reduced": _summary(reduced)}
