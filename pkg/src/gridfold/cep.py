"""Capacity-expansion MILPs over a transport (pipe-and-bubble) network.

One shared set of investment columns (candidate builds and line
reinforcement binaries) plus a copy of the 24-hour operating problem per
representative day. A single day with weight 1 is the deterministic model;
several days weighted by probability form the extensive form of the
two-stage stochastic model.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import median
from typing import Callable, Sequence

import yaml

from .grid import GENERATION, INTEGER, STORAGE, Network
from .milp import BINARY, EQ, GE, INTEGER as INT_VAR, LE, MilpInstance, Solution, Symbol
from .scenarios import HOURS, ScenarioDay, check_probabilities


@dataclass(frozen=True)
class CepConfig:
    rps_target: float = 0.6
    rps_penalty: float = 500.0
    shed_penalty: float = 10_000.0
    losses_enabled: bool = False
    loss_coefficient: float | None = None  # None: 2% loss on the median line, clamped
    reinforcement_multiplier: float = 2.0
    mip_gap_step1: float = 0.01
    mip_gap_step2: float = 0.001
    time_limit_step1: float = 4 * 3600.0
    time_limit_step2: float = 3600.0
    annual_scaling: float = 365.0

    def __post_init__(self):
        if not 0.0 <= self.rps_target <= 1.0:
            raise ValueError("rps_target must be in [0, 1]")
        if self.reinforcement_multiplier <= 1.0:
            raise ValueError("reinforcement_multiplier must exceed 1")
        if self.loss_coefficient is not None and self.loss_coefficient < 0:
            raise ValueError("loss_coefficient must be >= 0")


MAX_DEFAULT_LOSS = 0.5  # no line may lose more than this share under the default


def default_loss_coefficient(net: Network, loss_at_rating: float = 0.02) -> float:
    """kappa giving the median line a ``loss_at_rating`` loss share.

    Clamped so the most resistive line keeps at least half its flow; on
    networks mixing very short and very long lines the median rule alone
    would make long lines lose everything.
    """
    rs = [ln.r for ln in net.lines if ln.r > 0]
    if not rs:
        return 0.0
    return min(loss_at_rating / median(rs), MAX_DEFAULT_LOSS / max(rs))


def resolve_config(cfg: CepConfig, net: Network) -> CepConfig:
    """Pin the loss coefficient to ``net`` so reduced and original models share it."""
    if cfg.losses_enabled and cfg.loss_coefficient is None:
        return replace(cfg, loss_coefficient=default_loss_coefficient(net))
    return cfg


@dataclass
class Portfolio:
    gen_build: dict = field(default_factory=dict)
    storage_build: dict = field(default_factory=dict)
    line_reinforced: dict = field(default_factory=dict)
    network: str = ""

    def builds(self) -> dict:
        return {**self.gen_build, **self.storage_build}


class PortfolioError(ValueError):
    pass


def _name(kind, *parts):
    return f"{kind}[{','.join(str(p) for p in parts)}]"


def build_var(cand) -> str:
    return _name("n" if cand.integrality == INTEGER else "build", cand.id)


def reinforce_var(branch_id) -> str:
    return _name("reinf", branch_id)


class _Builder:
    def __init__(self, net: Network, cfg: CepConfig, name: str):
        self.net = net
        self.cfg = cfg
        self.m = MilpInstance(name)
        self.build_mw: dict[str, tuple[int, float]] = {}
        self.reinf: dict[str, int] = {}
        worst = max([g.variable_cost for g in net.generators]
                    + [c.variable_cost for c in net.candidates] + [0.0])
        if cfg.shed_penalty <= worst or cfg.rps_penalty < 0:
            raise ValueError("shed penalty must exceed every variable cost")
        self.kappa = cfg.loss_coefficient or 0.0
        if cfg.losses_enabled and cfg.loss_coefficient is None:
            self.kappa = default_loss_coefficient(net)

    def investments(self):
        m = self.m
        for c in self.net.candidates:
            if not self.net.has_bus(c.bus):
                raise ValueError(f"candidate {c.id!r} at unknown bus {c.bus!r}")
            if c.integrality == INTEGER:
                j = m.add_var(build_var(c), 0, c.max_units, obj=c.capex * c.unit_size, vtype=INT_VAR,
                              symbol=Symbol(c.id, "build_units"))
                self.build_mw[c.id] = (j, c.unit_size)
            else:
                j = m.add_var(build_var(c), 0, c.max_build, obj=c.capex, symbol=Symbol(c.id, "build"))
                self.build_mw[c.id] = (j, 1.0)
        for br in self.net.branches:
            if br.reinforcible:
                self.reinf[br.id] = m.add_var(reinforce_var(br.id), 0, 1, obj=br.reinforce_cost,
                                              vtype=BINARY, symbol=Symbol(br.id, "reinforce"))

    def scenario(self, day: ScenarioDay, weight: float):
        m, net, cfg, s = self.m, self.net, self.cfg, day.id
        w = weight * cfg.annual_scaling
        bus_ids = [b.id for b in net.buses]
        renewable = []
        shed_cols = []
        total_load = 0.0
        hydro_cols = {g.id: [] for g in net.generators if g.is_hydro_budgeted}

        for h in range(HOURS):
            inj = {b: [] for b in bus_ids}
            demand = dict.fromkeys(bus_ids, 0.0)
            for ld in net.loads:
                demand[ld.bus] += ld.peak * day.load_factor(ld.profile_key, h)

            for g in net.generators:
                ub = g.capacity * day.avail(g.availability_key, h)
                j = m.add_var(_name("p", g.id, h, s), 0, ub, obj=w * g.variable_cost,
                              symbol=Symbol(g.id, "dispatch", h, s))
                inj[g.bus].append((j, 1.0))
                if g.is_renewable:
                    renewable.append(j)
                if g.is_hydro_budgeted:
                    hydro_cols[g.id].append(j)

            for c in net.candidates:
                jb, mw = self.build_mw[c.id]
                if c.kind == GENERATION:
                    a = day.avail(c.availability_key, h)
                    j = m.add_var(_name("q", c.id, h, s), 0, math.inf if a > 0 else 0.0,
                                  obj=w * c.variable_cost, symbol=Symbol(c.id, "dispatch", h, s))
                    if a > 0:
                        m.add_constraint(_name("cap", c.id, h, s), [(j, 1.0), (jb, -a * mw)], LE, 0.0)
                    inj[c.bus].append((j, 1.0))
                    if c.is_renewable:
                        renewable.append(j)

            for br in net.branches:
                eff = 1.0 - self.kappa * br.r if cfg.losses_enabled else 1.0
                if eff <= 0:
                    raise ValueError(f"loss coefficient too large for branch {br.id!r}")
                cols = []
                for direction in ("fwd", "rev"):
                    jr = self.reinf.get(br.id)
                    ub = math.inf if jr is not None else br.rating
                    j = m.add_var(_name(direction, br.id, h, s), 0, ub,
                                  symbol=Symbol(br.id, "flow_" + direction, h, s))
                    if jr is not None:
                        m.add_constraint(_name("rating_" + direction, br.id, h, s),
                                         [(j, 1.0), (jr, -br.rating * (cfg.reinforcement_multiplier - 1))],
                                         LE, br.rating)
                    cols.append(j)
                fwd, rev = cols
                inj[br.from_bus] += [(fwd, -1.0), (rev, eff)]
                inj[br.to_bus] += [(fwd, eff), (rev, -1.0)]

            for b in bus_ids:
                j = m.add_var(_name("shed", b, h, s), 0, demand[b], obj=w * cfg.shed_penalty,
                              symbol=Symbol(b, "shed", h, s))
                shed_cols.append(j)
                inj[b].append((j, 1.0))
                total_load += demand[b]

            self._storage_hour(day, h, inj)
            for b in bus_ids:
                m.add_constraint(_name("bal", b, h, s), inj[b], EQ, demand[b])

        self._storage_cycle(day)
        for gid, cols in hydro_cols.items():
            if gid not in day.hydro_budget:
                raise KeyError(f"day {day.id}: no hydro budget for generator {gid!r}")
            m.add_constraint(_name("hydro", gid, s), [(j, 1.0) for j in cols], LE, day.hydro_budget[gid])

        v = m.add_var(_name("rpsv", s), 0, math.inf, obj=w * cfg.rps_penalty,
                      symbol=Symbol("system", "rps_violation", None, s))
        tgt = cfg.rps_target
        m.add_constraint(_name("rps", s), [(j, 1.0) for j in renewable] + [(v, 1.0)]
                         + [(j, tgt) for j in shed_cols], GE, tgt * total_load)

    def _storage_hour(self, day, h, inj):
        m, s = self.m, day.id
        units = [(st.id, st.bus, st.power_capacity, st.energy_capacity, st.round_trip_efficiency, None)
                 for st in self.net.storage]
        units += [(c.id, c.bus, math.inf, math.inf, c.round_trip_efficiency, c)
                  for c in self.net.candidates if c.kind == STORAGE]
        for sid, bus, pmax, emax, _, cand in units:
            ch = m.add_var(_name("ch", sid, h, s), 0, pmax, symbol=Symbol(sid, "charge", h, s))
            dis = m.add_var(_name("dis", sid, h, s), 0, pmax, symbol=Symbol(sid, "discharge", h, s))
            soc = m.add_var(_name("soc", sid, h, s), 0, emax, symbol=Symbol(sid, "soc", h, s))
            if cand is not None:
                jb, mw = self.build_mw[cand.id]
                m.add_constraint(_name("chcap", sid, h, s), [(ch, 1.0), (jb, -mw)], LE, 0.0)
                m.add_constraint(_name("discap", sid, h, s), [(dis, 1.0), (jb, -mw)], LE, 0.0)
                m.add_constraint(_name("soccap", sid, h, s),
                                 [(soc, 1.0), (jb, -mw * cand.duration_hours)], LE, 0.0)
            inj[bus] += [(dis, 1.0), (ch, -1.0)]

    def _storage_cycle(self, day):
        m, s = self.m, day.id
        units = [(st.id, st.round_trip_efficiency) for st in self.net.storage]
        units += [(c.id, c.round_trip_efficiency) for c in self.net.candidates if c.kind == STORAGE]
        for sid, eta in units:
            root = math.sqrt(eta)
            for h in range(HOURS):
                prev = (h - 1) % HOURS  # cyclic: the day ends where it started
                m.add_constraint(_name("socbal", sid, h, s), [
                    (m.index(_name("soc", sid, h, s)), 1.0),
                    (m.index(_name("soc", sid, prev, s)), -1.0),
                    (m.index(_name("ch", sid, h, s)), -root),
                    (m.index(_name("dis", sid, h, s)), 1.0 / root),
                ], EQ, 0.0)

    def finish(self, days):
        self.m.meta.update(build_mw=dict(self.build_mw), reinforce=dict(self.reinf),
                           scenarios=[d.id for d in days], network=self.net.name,
                           loss_coefficient=self.kappa)
        return self.m


def build_stochastic_cep(net: Network, days: Sequence[ScenarioDay], cfg: CepConfig) -> MilpInstance:
    """Extensive form: shared investments, one operating copy per day."""
    days = list(days)
    check_probabilities(days)
    if len({d.id for d in days}) != len(days):
        raise ValueError("scenario ids must be unique")
    b = _Builder(net, cfg, "cep")
    b.investments()
    for day in days:
        b.scenario(day, day.probability)
    return b.finish(days)


def build_deterministic_cep(net: Network, day: ScenarioDay, cfg: CepConfig) -> MilpInstance:
    return build_stochastic_cep(net, [day.with_probability(1.0)], cfg)


# --- portfolios ----------------------------------------------------------------

def portfolio_from_solution(m: MilpInstance, sol: Solution, net: Network) -> Portfolio:
    x = Portfolio(network=net.name)
    for c in net.candidates:
        j, mw = m.meta["build_mw"][c.id]
        val = sol.values.get(m.variables[j].name, 0.0)
        if c.integrality == INTEGER:
            val = round(val)
        val = max(0.0, val * mw)
        (x.gen_build if c.kind == GENERATION else x.storage_build)[c.id] = val
    for bid, j in m.meta["reinforce"].items():
        x.line_reinforced[bid] = int(round(sol.values.get(m.variables[j].name, 0.0)))
    return x


def check_portfolio(net: Network, x: Portfolio, tol: float = 1e-6) -> None:
    cands = {c.id: c for c in net.candidates}
    for cid, mw in x.builds().items():
        c = cands.get(cid)
        if c is None:
            raise PortfolioError(f"portfolio names unknown candidate {cid!r}")
        if (cid in x.gen_build) != (c.kind == GENERATION):
            raise PortfolioError(f"candidate {cid!r} listed under the wrong kind")
        if mw < -tol or mw > c.max_build + tol:
            raise PortfolioError(f"candidate {cid!r}: build {mw} outside [0, {c.max_build}]")
        if c.integrality == INTEGER and abs(mw / c.unit_size - round(mw / c.unit_size)) > 1e-6:
            raise PortfolioError(f"candidate {cid!r}: {mw} MW is not a multiple of {c.unit_size}")
    reinforcible = {br.id for br in net.branches if br.reinforcible}
    for bid, y in x.line_reinforced.items():
        if y not in (0, 1):
            raise PortfolioError(f"branch {bid!r}: reinforcement must be 0 or 1")
        if y and bid not in reinforcible:
            raise PortfolioError(f"branch {bid!r} is not reinforcible")


def capex(net: Network, x: Portfolio) -> float:
    cost = sum(c.capex * x.builds().get(c.id, 0.0) for c in net.candidates)
    return cost + sum(br.reinforce_cost * x.line_reinforced.get(br.id, 0) for br in net.branches)


def fix_portfolio(m: MilpInstance, net: Network, x: Portfolio) -> None:
    builds = x.builds()
    for c in net.candidates:
        j, mw = m.meta["build_mw"][c.id]
        v = builds.get(c.id, 0.0) / mw
        v = float(round(v)) if c.integrality == INTEGER else min(max(v, 0.0), c.max_build)
        m.variables[j].lb = m.variables[j].ub = v
    for bid, j in m.meta["reinforce"].items():
        m.variables[j].lb = m.variables[j].ub = float(x.line_reinforced.get(bid, 0))


@dataclass
class ScenarioOutcome:
    """Operating result of one day under a fixed portfolio.

    ``opcost`` is the day's operating cost times the annual scaling;
    ``cost`` adds the portfolio's capex, i.e. f_omega(x).
    """

    day: str
    probability: float
    opcost: float
    cost: float
    shed: dict  # (bus, hour) -> MW
    renewable: float  # MWh
    load: float  # MWh
    status: str = "optimal"


@dataclass
class Evaluation:
    total: float
    capex: float
    scenarios: list


def operational_detail(m: MilpInstance, sol: Solution, net: Network, day: ScenarioDay) -> dict:
    shed, renewable = {}, 0.0
    ren_ids = {g.id for g in net.generators if g.is_renewable} | {
        c.id for c in net.candidates if c.kind == GENERATION and c.is_renewable}
    for name, sym in m.symbols.items():
        if sym.scenario != day.id:
            continue
        if sym.role == "shed":
            shed[(sym.element, sym.hour)] = sol.values.get(name, 0.0)
        elif sym.role == "dispatch" and sym.element in ren_ids:
            renewable += sol.values.get(name, 0.0)
    load = sum(ld.peak * day.load_factor(ld.profile_key, h) for ld in net.loads for h in range(HOURS))
    return {"shed": shed, "renewable": renewable, "load": load}


def evaluate_portfolio(net: Network, x: Portfolio, days: Sequence[ScenarioDay], cfg: CepConfig,
                       solve: Callable, jobs: int = 1) -> Evaluation:
    """f(x): capex plus probability-weighted operating cost with x held fixed.

    ``solve`` is a backend ``(instance, gap, time_limit) -> Solution``.
    """
    check_portfolio(net, x)
    check_probabilities(days)
    cx = capex(net, x)

    def run(day):
        m = build_deterministic_cep(net, day, cfg)
        fix_portfolio(m, net, x)
        sol = solve(m, 0.0, cfg.time_limit_step2)
        if not sol.has_values:
            raise RuntimeError(f"day {day.id}: operating problem returned {sol.status}")
        op = sol.objective - cx
        det = operational_detail(m, sol, net, day)
        return ScenarioOutcome(day.id, day.probability, op, cx + op, det["shed"], det["renewable"],
                               det["load"], sol.status)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            outcomes = list(pool.map(run, days))
    else:
        outcomes = [run(d) for d in days]
    total = cx + math.fsum(o.probability * o.opcost for o in outcomes)
    return Evaluation(total, cx, outcomes)


def solve_cep(net: Network, days: Sequence[ScenarioDay], cfg: CepConfig, solve: Callable,
              gap: float | None = None, time_limit: float | None = None,
              prepare: Callable | None = None):
    """Build, optionally adjust via ``prepare(m)``, and solve; returns (m, Solution, Portfolio)."""
    m = build_stochastic_cep(net, days, cfg)
    if prepare is not None:
        prepare(m)
    sol = solve(m, cfg.mip_gap_step2 if gap is None else gap,
                cfg.time_limit_step2 if time_limit is None else time_limit)
    if not sol.has_values:
        # shed and RPS slack make every model feasible, so this is a solver fault
        raise RuntimeError(f"{net.name}: solver returned {sol.status} {sol.warnings}")
    return m, sol, portfolio_from_solution(m, sol, net)


def portfolio_to_dict(x: Portfolio) -> dict:
    return {"format": 1, "network": x.network, "gen_build": dict(x.gen_build),
            "storage_build": dict(x.storage_build), "line_reinforced": dict(x.line_reinforced)}


def portfolio_from_dict(doc: dict) -> Portfolio:
    if doc.get("format") != 1:
        raise PortfolioError("portfolio: missing or unsupported 'format' header")
    return Portfolio(gen_build={str(k): float(v) for k, v in (doc.get("gen_build") or {}).items()},
                     storage_build={str(k): float(v) for k, v in (doc.get("storage_build") or {}).items()},
                     line_reinforced={str(k): int(v) for k, v in (doc.get("line_reinforced") or {}).items()},
                     network=str(doc.get("network", "")))


def save_portfolio(x: Portfolio, path) -> None:
    Path(path).write_text(yaml.safe_dump(portfolio_to_dict(x), sort_keys=False))


def load_portfolio(path) -> Portfolio:
    return portfolio_from_dict(yaml.safe_load(Path(path).read_text()))
