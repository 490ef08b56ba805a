"""Error of the mapped reduced solution, reliability, and investment deltas."""

from __future__ import annotations

import math
import statistics
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

from .cep import Portfolio, ScenarioOutcome
from .grid import Network
from .scenarios import HOURS

SHED_THRESHOLD_MW = 1e-6

# technologies reported together in delta tables
DEFAULT_TECH_GROUPS = {
    "solar-pv": "solar", "solar-thermal": "solar", "solar": "solar",
    "NG-CC": "NG", "NG-CT": "NG", "NG-ST": "NG", "NG": "NG",
}


def ermm(f_xprime: float, f_xstar: float) -> float:
    """Percent by which the mapped solution's cost exceeds the optimum."""
    if not f_xstar > 0:
        raise ValueError(f"baseline cost must be positive, got {f_xstar}")
    return (f_xprime - f_xstar) / f_xstar * 100.0


def ermm_stochastic(f_xprime: Mapping[str, tuple[float, float]],
                    f_xstar: Mapping[str, tuple[float, float]]) -> float:
    """ERMM of expected costs. Both arguments map scenario id -> (p, f_omega)."""
    if set(f_xprime) != set(f_xstar):
        raise ValueError("scenario sets differ")
    for k in f_xprime:
        if abs(f_xprime[k][0] - f_xstar[k][0]) > 1e-12:
            raise ValueError(f"scenario {k!r}: probabilities differ")
    if abs(math.fsum(p for p, _ in f_xstar.values()) - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    mean_prime = math.fsum(p * f for p, f in f_xprime.values())
    mean_star = math.fsum(p * f for p, f in f_xstar.values())
    return ermm(mean_prime, mean_star)


@dataclass
class ErmmReport:
    values: dict  # case id -> percent
    tolerance: float = 0.0  # combined MIP gap, percent

    @property
    def average(self) -> float:
        return statistics.fmean(self.values.values()) if self.values else 0.0

    @property
    def median(self) -> float:
        return statistics.median(self.values.values()) if self.values else 0.0

    @property
    def max(self) -> float:
        return max(self.values.values(), default=0.0)

    @property
    def cases(self) -> list:
        return list(self.values)

    def notes(self) -> list[str]:
        """Negative errors are legal under MIP gaps; they are flagged, never clamped."""
        out = []
        for k, v in self.values.items():
            if v >= -1e-9:  # round-off, not a real improvement
                continue
            where = "within" if v >= -self.tolerance - 1e-9 else "outside"
            out.append(f"{k}: ERMM {v:.4f}% is negative, {where} the combined MIP tolerance "
                       f"({self.tolerance:.4f}%)")
        return out

    def summary(self) -> dict:
        return {"cases": len(self.values), "average": self.average, "median": self.median,
                "max": self.max}


@dataclass
class ReliabilityReport:
    eue_mwh: float
    lolh_hours: int
    lolh_total: int
    achieved_rps: float  # percent

    @property
    def lolh(self) -> str:
        return f"{self.lolh_hours}h / {self.lolh_total}h"


def reliability_metrics(outcomes: Sequence[ScenarioOutcome], annual_scaling: float = 365.0,
                        threshold: float = SHED_THRESHOLD_MW) -> ReliabilityReport:
    """EUE, loss-of-load hours and achieved RPS from per-day operating detail."""
    if not outcomes:
        raise ValueError("no operational detail")
    eue, lolh = 0.0, 0
    ren, served = 0.0, 0.0
    for o in outcomes:
        if o.shed is None:
            raise ValueError(f"day {o.day}: missing shed detail")
        per_hour = defaultdict(float)
        for (_, h), mw in o.shed.items():
            per_hour[h] += mw
        total_shed = math.fsum(per_hour.values())
        eue += o.probability * total_shed * annual_scaling
        lolh += sum(1 for v in per_hour.values() if v > threshold)
        ren += o.probability * o.renewable
        served += o.probability * (o.load - total_shed)
    rps = 100.0 * ren / served if served > 0 else 0.0
    return ReliabilityReport(eue, lolh, len(outcomes) * HOURS, rps)


def investment_delta(base: Portfolio, other: Portfolio, net: Network,
                     groups: Mapping[str, str] | None = None) -> dict:
    """Per technology group: MW built in ``other`` minus MW built in ``base``.

    Storage is counted by power capacity. A "total" entry sums all groups.
    """
    groups = DEFAULT_TECH_GROUPS if groups is None else groups
    tech = {c.id: c.tech for c in net.candidates}
    sums = [defaultdict(list), defaultdict(list)]
    for side, x in zip(sums, (base, other)):
        for cid, mw in x.builds().items():
            if cid not in tech:
                raise ValueError(f"candidate {cid!r} is not in {net.name}")
            side[groups.get(tech[cid], tech[cid])].append(mw)
    keys = {groups.get(c.tech, c.tech) for c in net.candidates}
    # each side summed on its own, so identical portfolios give exact zeros
    delta = {k: math.fsum(sums[1][k]) - math.fsum(sums[0][k]) for k in keys}
    out = dict(sorted(delta.items()))
    out["total"] = math.fsum(out.values())
    return out

