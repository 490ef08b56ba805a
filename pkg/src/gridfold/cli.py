"""Command-line front end.

    gridfold synth --seed 7 --buses 12 --days 3 --out-dir inst/
    gridfold reduce --network inst/network.yaml --distance-km 5 --out red.yaml --merge-map mm.yaml
    gridfold baseline --network inst/network.yaml --scenarios inst/scenarios --out-dir base/
    gridfold two-step --network inst/network.yaml --scenarios inst/scenarios --distance-km 5 \\
        --map B --transmission components --report run/
    gridfold evaluate --network inst/network.yaml --scenarios inst/scenarios --portfolio base/d1/portfolio.yaml
    gridfold report run/ other-run/ --csv

Flags given on the command line override values from ``--config``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import yaml

from . import __version__
from .cep import (CepConfig, Portfolio, evaluate_portfolio, load_portfolio, resolve_config,
                  save_portfolio, solve_cep)
from .grid import NetworkFormatError, NetworkValidationError, load_network, save_network
from .metrics import ErmmReport, ermm, ermm_stochastic, investment_delta, reliability_metrics
from .milp import FEASIBLE_GAP, OPTIMAL
from .reduction import ReductionConfig, reduce_network, reduction_stats, tighten_candidates
from .scenarios import SynthKnobs, ScenarioError, load_scenarios, save_scenarios, synth_instance
from .solver import ENV_VAR, SolverError, external_backend, oracle_backend
from .two_step import MappingStrategy, run_two_step, timing_summary

log = logging.getLogger("gridfold")

GOOD = (OPTIMAL, FEASIBLE_GAP)

# flag dest -> (config section, key)
_CONFIG_KEYS = {
    "network": (None, "network"),
    "scenarios": (None, "scenarios"),
    "seed": (None, "seed"),
    "jobs": (None, "jobs"),
    "solver_cmd": (None, "solver_cmd"),
    "oracle": (None, "oracle"),
    "distance_km": ("reduction", "distance_km"),
    "mode": ("reduction", "mode"),
    "tighten": ("reduction", "tighten"),
    "map": ("mapping", "gen_storage"),
    "transmission": ("mapping", "transmission"),
}


class UsageError(Exception):
    pass


def _load_config(path) -> dict:
    if not path:
        return {}
    doc = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a mapping")
    return doc


def _merge_config(args, cfg: dict) -> None:
    for dest, (section, key) in _CONFIG_KEYS.items():
        if getattr(args, dest, None) is not None:
            continue
        src = cfg.get(section, {}) if section else cfg
        if key in src:
            setattr(args, dest, src[key])


def _cep_config(cfg: dict) -> CepConfig:
    raw = cfg.get("cep", {}) or {}
    names = {f.name for f in dataclasses.fields(CepConfig)}
    unknown = set(raw) - names
    if unknown:
        raise UsageError(f"unknown cep settings: {sorted(unknown)}")
    return CepConfig(**raw)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _backend(args):
    if args.oracle:
        return oracle_backend()
    cmd = args.solver_cmd or os.environ.get(ENV_VAR)
    return external_backend(cmd)


def _jobs(args) -> int:
    if args.jobs:
        return max(1, int(args.jobs))
    return max(1, (os.cpu_count() or 2) - 1)


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _gap_ok(sol, gap) -> bool:
    return sol.status in GOOD and (sol.mip_gap is None or sol.mip_gap <= gap + 1e-12)


# --- reduce ----------------------------------------------------------------------

def cmd_reduce(args, cfg) -> int:
    _require(args, "network", "distance_km", "out", "merge_map")
    net = load_network(args.network)
    reduced, mm = reduce_network(net, ReductionConfig(float(args.distance_km), args.mode or "full"))
    if args.tighten:
        original = load_network(args.original) if args.original else net
        reduced = tighten_candidates(reduced, original, mm)
    save_network(reduced, args.out)
    mm.save(args.merge_map)
    stats = reduction_stats(net, reduced)
    print(_stats_table(stats))
    if args.stats:
        _dump_json(stats, Path(args.stats))
    return 0


def _stats_table(stats) -> str:
    o, r = stats["original"], stats["reduced"]
    rows = [f"{'':14}{'original':>12}{'reduced':>12}"]
    for k in o:
        fmt = (lambda v: "-" if v is None else f"{v:.3g}") if k.startswith("min_") else str
        rows.append(f"{k:14}{fmt(o[k]):>12}{fmt(r[k]):>12}")
    return "\n".join(rows)


# --- baseline / evaluate ------------------------------------------------------------

def _baseline_one(net, days, cep, solve):
    _, sol, x = solve_cep(net, days, cep, solve, cep.mip_gap_step2, cep.time_limit_step2)
    return sol, x


def cmd_baseline(args, cfg) -> int:
    _require(args, "network", "scenarios", "out_dir")
    net = load_network(args.network)
    days = load_scenarios(args.scenarios)
    cep = resolve_config(_cep_config(cfg), net)
    solve = _backend(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cases = [("stochastic", days)] if args.stochastic else [(d.id, [d.with_probability(1.0)]) for d in days]

    def run(case):
        name, ds = case
        try:
            sol, x = _baseline_one(net, ds, cep, solve)
        except (RuntimeError, SolverError) as exc:
            return name, None, None, str(exc)
        return name, sol, x, None

    with ThreadPoolExecutor(_jobs(args)) as pool:
        results = list(pool.map(run, cases))
    failed = 0
    summary = {}
    for name, sol, x, err in results:
        if err:
            log.error("%s: %s", name, err)
            summary[name] = {"status": "failed", "error": err}
            failed += 1
            continue
        d = out / name
        d.mkdir(exist_ok=True)
        save_portfolio(x, d / "portfolio.yaml")
        summary[name] = {"status": sol.status, "objective": sol.objective, "mip_gap": sol.mip_gap}
        failed += not _gap_ok(sol, cep.mip_gap_step2)
        print(f"{name:12} {sol.status:14} f(x*) = {sol.objective:,.2f}")
    _dump_json(summary, out / "baseline.json")
    return 1 if failed else 0


def cmd_evaluate(args, cfg) -> int:
    _require(args, "network", "scenarios", "portfolio")
    net = load_network(args.network)
    days = load_scenarios(args.scenarios)
    cep = resolve_config(_cep_config(cfg), net)
    x = load_portfolio(args.portfolio)
    ev = evaluate_portfolio(net, x, days, cep, _backend(args), jobs=_jobs(args))
    rel = reliability_metrics(ev.scenarios, cep.annual_scaling)
    print(f"f(x) = {ev.total:,.2f}  (capex {ev.capex:,.2f})")
    for o in ev.scenarios:
        print(f"  {o.day:10} p={o.probability:.4f}  f_w = {o.cost:,.2f}")
    print(f"EUE {rel.eue_mwh:.3f} MWh  LOLH {rel.lolh}  achieved RPS {rel.achieved_rps:.1f}%")
    if args.out:
        _dump_json({"total": ev.total, "capex": ev.capex,
                    "scenarios": {o.day: {"p": o.probability, "cost": o.cost} for o in ev.scenarios},
                    "reliability": dataclasses.asdict(rel)}, Path(args.out))
    return 0


# --- two-step -----------------------------------------------------------------------

def _pipeline(net, days, red_cfg, cep, strategy, solve, baseline: Portfolio | None):
    """Baseline, two-step and evaluation for one case; returns a record dict."""
    if baseline is None:
        sol_star, x_star = _baseline_one(net, days, cep, solve)
        f_star, star_status = sol_star.objective, sol_star.status
    else:
        x_star, f_star, star_status = baseline, None, "given"
    res = run_two_step(net, red_cfg, days, cep, strategy, solve)
    ev_prime = evaluate_portfolio(net, res.x_prime, days, cep, solve)
    ev_star = evaluate_portfolio(net, x_star, days, cep, solve)
    if f_star is None:
        f_star = ev_star.total
    per_day_prime = {o.day: (o.probability, o.cost) for o in ev_prime.scenarios}
    per_day_star = {o.day: (o.probability, o.cost) for o in ev_star.scenarios}
    rel = reliability_metrics(ev_prime.scenarios, cep.annual_scaling)
    return {
        "f_xstar": f_star,
        "f_xprime": res.f_xprime,
        "ermm": ermm(res.f_xprime, f_star),
        "ermm_evaluated": ermm_stochastic(per_day_prime, per_day_star),
        "status": {"baseline": star_status, "step1": res.step1.status, "step2": res.step2.status},
        "ok": star_status in GOOD + ("given",) and res.step1.status in GOOD and res.step2.status in GOOD,
        "reduced_buses": len(res.reduced.buses),
        "reliability": dataclasses.asdict(rel),
        "investment_delta": investment_delta(x_star, res.x_prime, net),
        "_timing": {"step1": res.step1.wall_time, "step2": res.step2.wall_time, **res.timings},
        "_solutions": (res.step1, res.step2),
    }


def cmd_two_step(args, cfg) -> int:
    _require(args, "network", "scenarios", "distance_km", "report")
    net = load_network(args.network)
    days = load_scenarios(args.scenarios)
    cep = resolve_config(_cep_config(cfg), net)
    red_cfg = ReductionConfig(float(args.distance_km), args.mode or "full", bool(args.tighten))
    strategy = MappingStrategy(args.map or "B", args.transmission or "components")
    solve = _backend(args)
    baseline = load_portfolio(args.baseline) if args.baseline else None
    if args.stochastic:
        cases = [("stochastic", days)]
    else:
        cases = [(d.id, [d.with_probability(1.0)]) for d in days]

    def run(case):
        name, ds = case
        try:
            return name, _pipeline(net, ds, red_cfg, cep, strategy, solve, baseline)
        except (RuntimeError, SolverError, ValueError) as exc:
            log.error("%s failed: %s", name, exc)
            return name, {"ok": False, "error": str(exc)}

    with ThreadPoolExecutor(_jobs(args)) as pool:
        results = dict(pool.map(run, cases))

    out = Path(args.report)
    out.mkdir(parents=True, exist_ok=True)
    good = {k: v for k, v in results.items() if "error" not in v}
    combined_gap = 100.0 * (cep.mip_gap_step1 + cep.mip_gap_step2)
    if args.oracle:
        combined_gap = 0.0
    report = ErmmReport({k: v["ermm"] for k, v in good.items()}, tolerance=combined_gap)
    step1 = [v["_solutions"][0] for v in good.values()]
    step2 = [v["_solutions"][1] for v in good.values()]
    doc = {
        "format": 1,
        "network": net.name,
        "strategy": strategy.label,
        "reduction": dataclasses.asdict(red_cfg),
        "mode": "stochastic" if args.stochastic else "deterministic",
        "ermm": report.summary(),
        "notes": report.notes(),
        "cases": {k: {kk: vv for kk, vv in v.items() if not kk.startswith("_")} for k, v in results.items()},
    }
    _dump_json(doc, out / "report.json")
    # wall times vary run to run; they live apart from the reproducible report
    _dump_json({"step1": timing_summary(step1), "step2": timing_summary(step2),
                "cases": {k: v["_timing"] for k, v in good.items()}}, out / "timings.json")
    (out / "report.txt").write_text(render_report(doc))
    if args.csv:
        write_ermm_csv(doc, out / "ermm.csv")
    print(render_report(doc), end="")
    ok = len(good) == len(results) and all(v["ok"] for v in good.values())
    return 0 if ok else 1


def render_report(doc: dict) -> str:
    s = doc["ermm"]
    lines = [f"{doc['network']}  {doc['strategy']}  D={doc['reduction']['distance_km']} km  "
             f"({doc['mode']})",
             f"{'case':12}{'f(x*)':>18}{'f(x_prime)':>18}{'ERMM %':>10}  status"]
    for k, v in doc["cases"].items():
        if "error" in v:
            lines.append(f"{k:12}{'':>18}{'':>18}{'':>10}  failed: {v['error']}")
            continue
        lines.append(f"{k:12}{v['f_xstar']:>18,.2f}{v['f_xprime']:>18,.2f}{v['ermm']:>10.4f}  "
                     f"{v['status']['step2']}")
    lines.append(f"average {s['average']:.4f}%  median {s['median']:.4f}%  max {s['max']:.4f}%  "
                 f"over {s['cases']} case(s)")
    lines += doc.get("notes", [])
    return "\n".join(lines) + "\n"


CSV_HEADER = ["network", "strategy", "distance_km", "case", "f_xstar", "f_xprime", "ermm"]


def ermm_rows(doc: dict):
    for k, v in doc["cases"].items():
        if "error" not in v:
            yield [doc["network"], doc["strategy"], doc["reduction"]["distance_km"], k,
                   repr(v["f_xstar"]), repr(v["f_xprime"]), repr(v["ermm"])]


def write_ermm_csv(doc: dict, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        w.writerows(ermm_rows(doc))


def cmd_report(args, cfg) -> int:
    docs = []
    for d in args.runs:
        p = Path(d)
        p = p / "report.json" if p.is_dir() else p
        docs.append(json.loads(p.read_text()))
    hdr = f"{'network':24}{'strategy':18}{'D km':>8}{'cases':>7}{'avg %':>10}{'median %':>10}{'max %':>10}"
    print(hdr)
    for doc in docs:
        s = doc["ermm"]
        print(f"{doc['network']:24}{doc['strategy']:18}{doc['reduction']['distance_km']:>8g}"
              f"{s['cases']:>7}{s['average']:>10.4f}{s['median']:>10.4f}{s['max']:>10.4f}")
    if args.csv:
        w = csv.writer(sys.stdout)
        w.writerow(CSV_HEADER)
        for doc in docs:
            w.writerows(ermm_rows(doc))
    return 0


# --- synth --------------------------------------------------------------------------

def cmd_synth(args, cfg) -> int:
    _require(args, "out_dir")
    knobs_raw = cfg.get("synth", {}) or {}
    knobs = SynthKnobs(**knobs_raw)
    net, days = synth_instance(int(args.seed or 0), args.buses, args.days, knobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_network(net, out / "network.yaml")
    save_scenarios(days, out / "scenarios")
    print(f"{net.name}: {len(net.buses)} buses, {len(net.branches)} branches, "
          f"{len(net.candidates)} candidates, {len(days)} day(s) -> {out}")
    return 0


# --- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="parallel pipelines (default: cores - 1)")
    common.add_argument("--solver-cmd", help=f"solver template with {{mps}} {{sol}} {{gap}} {{timelimit}}; "
                                             f"falls back to ${ENV_VAR}, then HiGHS")
    common.add_argument("--oracle", action="store_true", default=None,
                        help="use the internal brute-force backend")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="gridfold", description="Network reduction and two-step capacity expansion.")
    ap.add_argument("--version", action="version", version=f"gridfold {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def net_opts(p, scen=True):
        p.add_argument("--network")
        if scen:
            p.add_argument("--scenarios", help="scenario directory")

    def red_opts(p):
        p.add_argument("--distance-km", type=float)
        p.add_argument("--mode", choices=["radial", "full"])
        p.add_argument("--tighten", action="store_true", default=None)

    p = sub.add_parser("reduce", parents=[common], help="reduce a network")
    net_opts(p, scen=False)
    red_opts(p)
    p.add_argument("--original", help="original network for tightening (default: --network)")
    p.add_argument("--out")
    p.add_argument("--merge-map")
    p.add_argument("--stats", help="write reduction statistics as JSON")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("baseline", parents=[common], help="solve the CEP on the full network")
    net_opts(p)
    p.add_argument("--out-dir")
    p.add_argument("--stochastic", action="store_true", help="one extensive form over all days")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("two-step", parents=[common], help="reduce, solve, map back, re-solve")
    net_opts(p)
    red_opts(p)
    p.add_argument("--map", choices=["A", "B", "C"])
    p.add_argument("--transmission", choices=["components", "all"])
    p.add_argument("--stochastic", action="store_true")
    p.add_argument("--baseline", help="portfolio file to compare against instead of solving x*")
    p.add_argument("--report", help="output directory")
    p.add_argument("--csv", action="store_true", help="also write per-case ERMM rows")
    p.set_defaults(func=cmd_two_step)

    p = sub.add_parser("evaluate", parents=[common], help="cost and reliability of a fixed portfolio")
    net_opts(p)
    p.add_argument("--portfolio")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", parents=[common], help="write a seeded synthetic instance")
    p.add_argument("--buses", type=int, default=12)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", parents=[common], help="summarise two-step report directories")
    p.add_argument("runs", nargs="+")
    p.add_argument("--csv", action="store_true", help="emit per-case ERMM rows on stdout")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _load_config(args.config)
        _merge_config(args, cfg)
        return args.func(args, cfg)
    except (UsageError, NetworkFormatError, NetworkValidationError, ScenarioError,
            FileNotFoundError, SolverError, ValueError, KeyError) as exc:
        print(f"gridfold {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
