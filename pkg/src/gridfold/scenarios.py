"""Representative-day scenario data and a seeded synthetic instance generator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import (
    GENERATION,
    INTEGER,
    LINE,
    STORAGE,
    TRANSFORMER,
    Branch,
    Bus,
    Candidate,
    GeoCoord,
    Generator,
    Load,
    Network,
    Storage,
    haversine_distance,
)

HOURS = 24
_AVAIL, _LOAD, _HYDRO = "avail/", "load/", "hydro/"
DAILY = "daily"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioDay:
    """One representative day.

    ``availability`` and ``load`` map a key to 24 hourly values;
    ``hydro_budget`` maps a hydro generator id to its daily energy in MWh.
    """

    id: str
    probability: float
    availability: dict = field(default_factory=dict)
    load: dict = field(default_factory=dict)
    hydro_budget: dict = field(default_factory=dict)

    def avail(self, key: str, hour: int) -> float:
        if not key:
            return 1.0
        try:
            return self.availability[key][hour]
        except KeyError:
            raise KeyError(f"day {self.id}: unknown availability key {key!r}") from None

    def load_factor(self, key: str, hour: int) -> float:
        try:
            return self.load[key][hour]
        except KeyError:
            raise KeyError(f"day {self.id}: unknown load profile key {key!r}") from None

    def with_probability(self, p: float) -> "ScenarioDay":
        return ScenarioDay(self.id, p, self.availability, self.load, self.hydro_budget)


def check_probabilities(days, tol: float = 1e-9) -> None:
    if not days:
        raise ScenarioError("empty scenario set")
    total = math.fsum(d.probability for d in days)
    if abs(total - 1.0) > tol:
        raise ScenarioError(f"probabilities sum to {total:.12g}, not 1")


# --- files -------------------------------------------------------------------

def save_scenarios(days, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rows = ["day\tprobability"] + [f"{day.id}\t{day.probability!r}" for day in days]
    (d / "manifest").write_text("\n".join(rows) + "\n")
    for day in days:
        out = ["hour\tkey\tvalue"]
        for prefix, table in ((_AVAIL, day.availability), (_LOAD, day.load)):
            for key, vals in table.items():
                out.extend(f"{h}\t{prefix}{key}\t{float(v)!r}" for h, v in enumerate(vals))
        out.extend(f"{DAILY}\t{_HYDRO}{g}\t{float(v)!r}" for g, v in day.hydro_budget.items())
        (d / f"day_{day.id}.tsv").write_text("\n".join(out) + "\n")
    return d


def _read_day(path: Path, day_id: str, p: float) -> ScenarioDay:
    hourly: dict[str, dict[str, list]] = {_AVAIL: {}, _LOAD: {}}
    hydro = {}
    lines = path.read_text().splitlines()
    if not lines or lines[0].split("\t") != ["hour", "key", "value"]:
        raise ScenarioError(f"{path}: header must be 'hour<TAB>key<TAB>value'")
    for n, raw in enumerate(lines[1:], 2):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise ScenarioError(f"{path}:{n}: expected 3 tab-separated fields")
        hour, key, text = parts
        try:
            val = float(text)
        except ValueError:
            raise ScenarioError(f"{path}:{n}: bad number {text!r}") from None
        if key.startswith(_HYDRO):
            hydro[key[len(_HYDRO):]] = val
            continue
        prefix = next((p_ for p_ in (_AVAIL, _LOAD) if key.startswith(p_)), None)
        if prefix is None:
            raise ScenarioError(f"{path}:{n}: key {key!r} lacks avail/, load/ or hydro/ prefix")
        try:
            h = int(hour)
        except ValueError:
            raise ScenarioError(f"{path}:{n}: bad hour {hour!r}") from None
        if not 0 <= h < HOURS:
            raise ScenarioError(f"{path}:{n}: hour {h} outside 0..23")
        slot = hourly[prefix].setdefault(key[len(prefix):], [None] * HOURS)
        slot[h] = val

    tables = {}
    for prefix, table in hourly.items():
        out = {}
        for key, vals in table.items():
            missing = [h for h, v in enumerate(vals) if v is None]
            if missing:
                raise ScenarioError(f"day {day_id}: key {prefix}{key} missing hour(s) {missing}")
            if prefix == _AVAIL and any(not 0.0 <= v <= 1.0 for v in vals):
                raise ScenarioError(f"day {day_id}: availability {key} outside [0, 1]")
            if prefix == _LOAD and any(v < 0 for v in vals):
                raise ScenarioError(f"day {day_id}: negative load multiplier for {key}")
            out[key] = tuple(vals)
        tables[prefix] = out
    return ScenarioDay(day_id, p, tables[_AVAIL], tables[_LOAD], hydro)


def load_scenarios(directory) -> list[ScenarioDay]:
    d = Path(directory)
    manifest = d / "manifest"
    if not manifest.exists():
        raise ScenarioError(f"{d}: no manifest")
    entries = []
    for n, raw in enumerate(manifest.read_text().splitlines()[1:], 2):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise ScenarioError(f"{manifest}:{n}: expected '<day><TAB><probability>'")
        try:
            p = float(parts[1])
        except ValueError:
            raise ScenarioError(f"{manifest}:{n}: bad probability {parts[1]!r}") from None
        if not 0 < p <= 1:
            raise ScenarioError(f"{manifest}:{n}: probability {p} outside (0, 1]")
        entries.append((parts[0], p))
    total = math.fsum(p for _, p in entries)
    if not entries:
        raise ScenarioError(f"{manifest}: no days listed")
    if abs(total - 1.0) > 1e-6:
        raise ScenarioError(f"probabilities sum to {total:.6g}, expected 1")
    return [_read_day(d / f"day_{day_id}.tsv", day_id, p / total) for day_id, p in entries]


# --- synthetic instances -----------------------------------------------------

@dataclass(frozen=True)
class SynthKnobs:
    n_clusters: int | None = None
    cluster_radius_km: float = 2.0
    cluster_spacing_km: float = 40.0
    hv_fraction: float = 0.3  # share of clusters with a transformer-fed HV bus
    max_reinforcible: int | None = None
    n_integer_candidates: int = 1
    storage: bool = True
    hydro: bool = True
    candidates_per_cluster: int = 2
    existing_share: float = 0.8
    uniform_days: bool = True
    intra_rating_mw: tuple = (10.0, 60.0)  # low enough that lines inside a cluster can congest


def _offset(center: GeoCoord, dx_km: float, dy_km: float) -> GeoCoord:
    lat = center.latitude + dy_km / 111.195
    lon = center.longitude + dx_km / (111.195 * math.cos(math.radians(center.latitude)))
    return GeoCoord(lat, lon)


def _line(rng, lid, a, b, km, rating, reinforcible):
    x = 0.0004 + 0.0003 * km * rng.uniform(0.8, 1.2)
    return Branch(lid, a, b, r=x * rng.uniform(0.1, 0.25), x=x, rating=rating, kind=LINE,
                  reinforce_cost=round(200.0 * rating * (1 + km / 50), 2), reinforcible=reinforcible)


def synth_network(seed: int, n_buses: int, knobs: SynthKnobs = SynthKnobs()) -> tuple[Network, dict]:
    """Geo-clustered network; also returns cluster metadata used by the day generator."""
    if n_buses < 2:
        raise ValueError("n_buses must be >= 2")
    if knobs.cluster_radius_km * 4 > knobs.cluster_spacing_km:
        raise ValueError("clusters must be well separated (spacing >= 4 x radius)")
    rng = np.random.default_rng(seed)
    k = knobs.n_clusters or max(1, n_buses // 4)
    k = min(k, n_buses // 2) or 1
    n_hv = min(int(round(knobs.hv_fraction * k)), max(0, n_buses - 2 * k))
    hv_clusters = set(rng.choice(k, size=n_hv, replace=False).tolist()) if n_hv else set()

    origin = GeoCoord(37.0, -120.0)
    centers: list[GeoCoord] = []
    side = knobs.cluster_spacing_km * (1.5 * math.sqrt(k) + 1)
    while len(centers) < k:
        c = _offset(origin, rng.uniform(0, side), rng.uniform(0, side))
        if all(haversine_distance(c, o) >= knobs.cluster_spacing_km for o in centers):
            centers.append(c)

    sizes = [2 if n_buses >= 2 * k else 1] * k
    for _ in range(n_buses - n_hv - sum(sizes)):
        sizes[int(rng.integers(k))] += 1

    buses, branches, cluster_of, members = [], [], {}, []
    for ci in range(k):
        ids = []
        for bi in range(sizes[ci]):
            bid = f"b{len(buses) + 1}"
            rad = knobs.cluster_radius_km / 2 * math.sqrt(rng.uniform()) if bi else 0.0
            ang = rng.uniform(0, 2 * math.pi)
            loc = _offset(centers[ci], rad * math.cos(ang), rad * math.sin(ang))
            buses.append(Bus(bid, loc, is_substation=(bi == 0), base_kv=115.0))
            cluster_of[bid] = ci
            ids.append(bid)
        members.append(ids)

    def km(a, b):
        return haversine_distance(buses[int(a[1:]) - 1].location, buses[int(b[1:]) - 1].location)

    nl = 0

    def new_line(a, b, rating, reinforcible=False):
        nonlocal nl
        nl += 1
        branches.append(_line(rng, f"L{nl}", a, b, km(a, b), rating, reinforcible))

    for ids in members:
        for bi in range(1, len(ids)):
            new_line(ids[int(rng.integers(bi))], ids[bi], float(rng.uniform(*knobs.intra_rating_mw)))
        if len(ids) >= 3 and rng.uniform() < 0.5:
            a, b = rng.choice(len(ids), size=2, replace=False)
            new_line(ids[a], ids[b], float(rng.uniform(*knobs.intra_rating_mw)))

    # cluster gateways: a transformer-fed HV bus where present, else the substation
    gateway = {}
    for ci in range(k):
        if ci in hv_clusters:
            bid = f"b{len(buses) + 1}"
            buses.append(Bus(bid, centers[ci], is_substation=True, base_kv=345.0))
            cluster_of[bid] = ci
            branches.append(Branch(f"T{ci + 1}", members[ci][0], bid, r=0.0002, x=0.008,
                                   rating=400.0, kind=TRANSFORMER))
            gateway[ci] = bid
        else:
            gateway[ci] = members[ci][0]

    inter = []
    if k > 1:
        order = list(range(k))
        linked = {order[0]}
        for ci in order[1:]:
            nearest = min(linked, key=lambda o: haversine_distance(centers[ci], centers[o]))
            inter.append((nearest, ci))
            linked.add(ci)
        for _ in range(max(0, k // 3)):
            a, b = sorted(rng.choice(k, size=2, replace=False).tolist())
            if (a, b) not in inter and (b, a) not in inter:
                inter.append((a, b))
    for a, b in inter:
        new_line(gateway[a], gateway[b], float(rng.uniform(20, 60)), reinforcible=True)

    reinf = [br for br in branches if br.reinforcible]
    if knobs.max_reinforcible is not None and len(reinf) > knobs.max_reinforcible:
        keep = {br.id for br in reinf[: knobs.max_reinforcible]}
        branches = [br if br.reinforcible is False or br.id in keep
                    else Branch(br.id, br.from_bus, br.to_bus, br.r, br.x, br.rating, br.kind,
                                br.reinforce_cost, False)
                    for br in branches]

    load_buses = [b.id for b in buses if b.base_kv < 300]
    loads = []
    for bid in load_buses:
        if rng.uniform() < 0.75 or not loads:
            loads.append(Load(f"d{len(loads) + 1}", bid, f"load_c{cluster_of[bid]}",
                              round(float(rng.uniform(5, 30)), 3)))
    peak = sum(ld.peak for ld in loads)

    gens = []
    target = knobs.existing_share * peak
    if knobs.hydro:
        bid = load_buses[int(rng.integers(len(load_buses)))]
        cap = round(0.15 * target, 3)
        gens.append(Generator(f"g{len(gens) + 1}", bid, "hydro", cap, variable_cost=2.0,
                              is_renewable=True, is_hydro_budgeted=True))
        target -= cap
    ci_sol = int(rng.integers(k))
    sol_bus = members[ci_sol][int(rng.integers(len(members[ci_sol])))]
    cap = round(0.2 * knobs.existing_share * peak, 3)
    gens.append(Generator(f"g{len(gens) + 1}", sol_bus, "solar", cap, 0.0, True, f"solar_c{ci_sol}"))
    target -= cap
    n_ng = max(1, min(3, k))
    for i in range(n_ng):
        bid = load_buses[int(rng.integers(len(load_buses)))]
        gens.append(Generator(f"g{len(gens) + 1}", bid, "NG", round(target / n_ng, 3),
                              variable_cost=round(float(rng.uniform(40, 80)), 2)))

    storage = []
    if knobs.storage:
        bid = load_buses[int(rng.integers(len(load_buses)))]
        storage.append(Storage("s1", bid, power_capacity=round(0.05 * peak, 3),
                               energy_capacity=round(0.2 * peak, 3), round_trip_efficiency=0.85))

    cands = []
    techs = ["solar", "wind", "storage"] if knobs.storage else ["solar", "wind"]

    def add_candidate(tech, ci):
        bid = members[ci][int(rng.integers(len(members[ci])))]
        cid = f"c{len(cands) + 1}"
        mb = round(float(rng.uniform(10, 40)), 3)
        if tech == "storage":
            cands.append(Candidate(cid, bid, STORAGE, "battery", capex=25000.0, max_build=mb,
                                   duration_hours=4.0, round_trip_efficiency=0.85))
        else:
            cands.append(Candidate(cid, bid, GENERATION, tech,
                                   capex=45000.0 if tech == "solar" else 70000.0, max_build=mb,
                                   is_renewable=True, availability_key=f"{tech}_c{ci}"))

    for ci in range(k):
        for j in range(knobs.candidates_per_cluster):
            add_candidate(techs[(ci + j) % len(techs)], ci)
    # small networks may not reach every technology by round robin
    built = {"storage" if c.kind == STORAGE else c.tech for c in cands}
    for i, tech in enumerate(techs):
        if tech not in built:
            add_candidate(tech, i % k)
    for i in range(knobs.n_integer_candidates):
        ci = int(rng.integers(k))
        bid = members[ci][int(rng.integers(len(members[ci])))]
        cands.append(Candidate(f"c{len(cands) + 1}", bid, GENERATION, "NG-CT", capex=40000.0,
                               max_build=30.0, unit_size=15.0, integrality=INTEGER,
                               variable_cost=90.0))

    net = Network(tuple(buses), tuple(branches), tuple(gens), tuple(storage), tuple(loads),
                  tuple(cands), name=f"synth-{seed}-{n_buses}")
    meta = {"clusters": k, "cluster_of": cluster_of, "centers": centers,
            "hv_buses": [gateway[c] for c in sorted(hv_clusters)]}
    return net, meta


def synth_days(seed: int, net: Network, n_clusters: int, n_days: int, uniform: bool = True) -> list[ScenarioDay]:
    rng = np.random.default_rng([seed, 7919])
    if uniform:
        probs = np.full(n_days, 1.0 / n_days)
    else:
        probs = rng.dirichlet(np.ones(n_days))
    hours = np.arange(HOURS)
    solar_shape = np.clip(np.sin(np.pi * (hours - 6) / 12), 0, None)
    load_shape = 0.65 + 0.25 * np.sin(np.pi * (hours - 9) / 12).clip(0) + 0.1 * (hours >= 17) * (hours <= 21)
    days = []
    for d in range(n_days):
        avail, load = {}, {}
        for ci in range(n_clusters):
            cloud = rng.uniform(0.5, 1.0)
            avail[f"solar_c{ci}"] = tuple(float(v) for v in np.round(solar_shape * cloud, 6))
            wind = np.clip(rng.uniform(0.2, 0.7) + 0.15 * rng.standard_normal(HOURS).cumsum() / 4, 0, 1)
            avail[f"wind_c{ci}"] = tuple(float(v) for v in np.round(wind, 6))
            noise = 1 + 0.05 * rng.standard_normal(HOURS)
            load[f"load_c{ci}"] = tuple(float(v) for v in np.round(np.clip(load_shape * noise, 0, None), 6))
        hydro = {g.id: round(float(g.capacity * HOURS * rng.uniform(0.3, 0.6)), 3)
                 for g in net.generators if g.is_hydro_budgeted}
        p = float(probs[d]) if d < n_days - 1 else float(1.0 - math.fsum(probs[:-1]))
        days.append(ScenarioDay(f"d{d + 1}", p, avail, load, hydro))
    return days


def synth_instance(seed: int, n_buses: int, n_days: int = 1,
                   knobs: SynthKnobs = SynthKnobs()) -> tuple[Network, list[ScenarioDay]]:
    """Deterministic desk-scale instance: a network plus ``n_days`` scenario days."""
    if n_days < 1:
        raise ValueError("n_days must be >= 1")
    net, meta = synth_network(seed, n_buses, knobs)
    return net, synth_days(seed, net, meta["clusters"], n_days, knobs.uniform_days)
