"""Solve on a reduced network, project the result back, re-solve on the original.

Step (1) optimises the reduced CEP. Its investments are carried to the
original network by one of three generation/storage maps and one of two
transmission rules, and Step (2) re-optimises whatever the mapping leaves
free.

  Map A  fix every original site to a proportional share of its group
  Map B  fix only each group's total, sites re-optimised
  Map C  fix only each technology's network-wide total
"""

from __future__ import annotations

import math
import statistics
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .cep import CepConfig, Portfolio, resolve_config, solve_cep
from .grid import INTEGER, Network
from .milp import GE, LE, MilpInstance, Solution, TIME_LIMIT
from .reduction import MergeMap, ReductionConfig, reduce_and_tighten
from .scenarios import ScenarioDay

MAP_A, MAP_B, MAP_C = "A", "B", "C"
COMPONENTS, REINFORCE_ALL = "components", "all"
GROUP_SLACK = 1e-6  # MW of round-off allowed on fixed totals


class MappingError(ValueError):
    pass


@dataclass(frozen=True)
class MappingStrategy:
    gen_storage: str = MAP_B
    transmission: str = COMPONENTS

    def __post_init__(self):
        if self.gen_storage not in (MAP_A, MAP_B, MAP_C):
            raise ValueError(f"unknown generation/storage map {self.gen_storage!r}")
        if self.transmission not in (COMPONENTS, REINFORCE_ALL):
            raise ValueError(f"unknown transmission mode {self.transmission!r}")

    @property
    def label(self) -> str:
        return f"Map{self.gen_storage}/{self.transmission}"


@dataclass
class GroupTotal:
    """Equality on the summed MW of ``members``, kept within ``slack``."""

    name: str
    members: tuple
    total: float
    slack: float = GROUP_SLACK


@dataclass
class InvestmentMapping:
    fixed: dict = field(default_factory=dict)  # candidate id -> MW
    totals: list = field(default_factory=list)  # GroupTotal


# --- apportionment -------------------------------------------------------------

def water_fill(total: float, weights: Sequence[float], caps: Sequence[float], tol: float = 1e-9) -> list[float]:
    """Split ``total`` in proportion to ``weights`` without exceeding ``caps``.

    Sites that hit their cap are pinned there and the overflow is shared
    among the rest by the same proportions.
    """
    n = len(weights)
    if total > sum(caps) + tol * max(1.0, total):
        raise MappingError(f"total {total} exceeds group capacity {sum(caps)}")
    out = [0.0] * n
    open_ = [i for i in range(n) if caps[i] > 0]
    left = total
    while left > tol and open_:
        w = sum(weights[i] for i in open_)
        share = {i: left * (weights[i] / w if w > 0 else 1.0 / len(open_)) for i in open_}
        full = [i for i in open_ if out[i] + share[i] >= caps[i] - tol]
        if not full:
            for i in open_:
                out[i] += share[i]
            break
        for i in full:
            left -= caps[i] - out[i]
            out[i] = caps[i]
        open_ = [i for i in open_ if i not in full]
    return out


def largest_remainder(units: int, weights: Sequence[float], caps: Sequence[int]) -> list[int]:
    """Whole-unit apportionment of ``units`` by ``weights``, respecting ``caps``."""
    if units > sum(caps):
        raise MappingError(f"{units} units exceed group capacity {sum(caps)}")
    quota = water_fill(float(units), weights, [float(c) for c in caps])
    out = [min(int(math.floor(q + 1e-9)), c) for q, c in zip(quota, caps)]
    order = sorted(range(len(out)), key=lambda i: (-(quota[i] - out[i]), i))
    short = units - sum(out)
    for i in order:
        if short == 0:
            break
        if out[i] < caps[i]:
            out[i] += 1
            short -= 1
    return out


# --- mapping -------------------------------------------------------------------

def candidate_groups(mm: MergeMap, original: Network) -> dict:
    """(tech, reduced bus, integrality, unit size) -> original candidate ids."""
    groups = defaultdict(list)
    for c in original.candidates:
        if c.id not in mm.relocation:
            raise MappingError(f"candidate {c.id!r} has no relocation entry")
        key = (c.tech, mm.relocation[c.id], c.integrality, c.unit_size if c.integrality == INTEGER else None)
        groups[key].append(c.id)
    return dict(groups)


def map_investments(x_red: Portfolio, mm: MergeMap, strategy: MappingStrategy,
                    original: Network) -> InvestmentMapping:
    builds = x_red.builds()
    orig_ids = {c.id for c in original.candidates}
    for cid in builds:
        if cid not in orig_ids:
            raise MappingError(f"reduced candidate {cid!r} does not trace to the original network")
    out = InvestmentMapping()
    groups = candidate_groups(mm, original)

    if strategy.gen_storage == MAP_C:
        by_tech = defaultdict(list)
        for c in original.candidates:
            by_tech[c.tech].append(c.id)
        for tech, members in sorted(by_tech.items()):
            total = math.fsum(builds.get(i, 0.0) for i in members)
            out.totals.append(GroupTotal(f"tech:{tech}", tuple(members), total))
        return out

    for (tech, bus, integrality, unit), members in sorted(groups.items(), key=lambda kv: str(kv[0])):
        total = math.fsum(builds.get(i, 0.0) for i in members)
        if strategy.gen_storage == MAP_B:
            out.totals.append(GroupTotal(f"group:{tech}@{bus}", tuple(members), total))
            continue
        cands = [original.candidate(i) for i in members]
        weights = [c.max_build for c in cands]
        if integrality == INTEGER:
            units = int(round(total / unit))
            split = largest_remainder(units, weights, [c.max_units for c in cands])
            for c, k in zip(cands, split):
                out.fixed[c.id] = k * unit
        else:
            for c, mw in zip(cands, water_fill(total, weights, [c.max_build for c in cands])):
                out.fixed[c.id] = mw
    return out


def map_transmission(x_red: Portfolio, mm: MergeMap, mode: str, original: Network) -> dict:
    """Original reinforcible branch id -> fixed 0/1. Branches left out stay free."""
    reinforcible = {br.id for br in original.branches if br.reinforcible}
    if mode == REINFORCE_ALL:
        return {bid: 1 for bid in sorted(reinforcible)}
    if mode != COMPONENTS:
        raise ValueError(f"unknown transmission mode {mode!r}")
    fixed: dict = {}
    for red_id in mm.line_composition:
        y = 1 if x_red.line_reinforced.get(red_id, 0) else 0
        for comp in mm.components(red_id):
            if comp in reinforcible:
                # an absorbed pair line can sit in several compositions; any build wins
                fixed[comp] = max(fixed.get(comp, 0), y)
    for bid in mm.removed_lines:
        fixed.pop(bid, None)
    return fixed


def apply_mapping(m: MilpInstance, net: Network, inv: InvestmentMapping, tx: dict) -> None:
    build_mw = m.meta["build_mw"]
    for cid, mw in inv.fixed.items():
        j, unit = build_mw[cid]
        v = mw / unit
        if net.candidate(cid).integrality == INTEGER:
            v = float(round(v))
        m.variables[j].lb = m.variables[j].ub = v
    for g in inv.totals:
        terms = [(build_mw[c][0], build_mw[c][1]) for c in g.members]
        m.add_constraint(f"fixtotal_lo[{g.name}]", terms, GE, g.total - g.slack)
        m.add_constraint(f"fixtotal_hi[{g.name}]", terms, LE, g.total + g.slack)
    for bid, y in tx.items():
        j = m.meta["reinforce"][bid]
        m.variables[j].lb = m.variables[j].ub = float(y)


# --- pipeline ------------------------------------------------------------------

@dataclass
class TwoStepResult:
    strategy: MappingStrategy
    reduced: Network
    merge_map: MergeMap
    step1: Solution
    x_reduced: Portfolio
    investments: InvestmentMapping
    transmission: dict
    step2: Solution
    x_prime: Portfolio
    timings: dict

    @property
    def f_xprime(self) -> float:
        return self.step2.objective


def run_two_step(original: Network, red_cfg: ReductionConfig, days: Sequence[ScenarioDay],
                 cep_cfg: CepConfig, strategy: MappingStrategy, solve: Callable,
                 reduced: Network | None = None, merge_map: MergeMap | None = None) -> TwoStepResult:
    """Step (1) on the reduced network, map, Step (2) on ``original``.

    A precomputed ``reduced``/``merge_map`` pair skips the reduction.
    """
    cep_cfg = resolve_config(cep_cfg, original)
    t0 = time.perf_counter()
    if (reduced is None) != (merge_map is None):
        raise ValueError("pass both reduced and merge_map, or neither")
    if reduced is None:
        reduced, merge_map = reduce_and_tighten(original, red_cfg)
    t1 = time.perf_counter()
    _, sol1, x_red = solve_cep(reduced, days, cep_cfg, solve, cep_cfg.mip_gap_step1, cep_cfg.time_limit_step1)
    t2 = time.perf_counter()
    result = step_two(original, merge_map, x_red, days, cep_cfg, strategy, solve)
    t3 = time.perf_counter()
    result.reduced, result.step1 = reduced, sol1
    result.timings = {"reduce": t1 - t0, "step1": t2 - t1, "step2": t3 - t2,
                      "step1_solver": sol1.wall_time, "step2_solver": result.step2.wall_time}
    return result


def step_two(original: Network, mm: MergeMap, x_red: Portfolio, days, cep_cfg: CepConfig,
             strategy: MappingStrategy, solve: Callable) -> TwoStepResult:
    """Map a Step (1) portfolio and re-solve; lets several strategies share one Step (1)."""
    cep_cfg = resolve_config(cep_cfg, original)
    inv = map_investments(x_red, mm, strategy, original)
    tx = map_transmission(x_red, mm, strategy.transmission, original)
    _, sol2, x_prime = solve_cep(original, days, cep_cfg, solve, cep_cfg.mip_gap_step2,
                                 cep_cfg.time_limit_step2,
                                 prepare=lambda m: apply_mapping(m, original, inv, tx))
    return TwoStepResult(strategy, None, mm, None, x_red, inv, tx, sol2, x_prime, {})


def timing_summary(solutions: Sequence[Solution]) -> dict:
    """Median/mean wall time and how many runs stopped on the time limit."""
    times = [s.wall_time for s in solutions]
    return {
        "count": len(times),
        "median_s": statistics.median(times) if times else 0.0,
        "mean_s": statistics.fmean(times) if times else 0.0,
        "hit_time_limit": sum(s.status == TIME_LIMIT for s in solutions),
    }
