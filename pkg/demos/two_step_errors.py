"""
How much does a coarse network cost you?
========================================

Solve a small synthetic planning problem on the full network, then on a
reduced one, map the reduced plan back with each of the three mapping
rules and compare costs. Pass --oracle to use the exact (slow) solver
instead of HiGHS.
"""

import argparse

from gridfold.cep import CepConfig, evaluate_portfolio, solve_cep
from gridfold.metrics import ermm, investment_delta, reliability_metrics
from gridfold.reduction import ReductionConfig, reduce_and_tighten
from gridfold.scenarios import SynthKnobs, synth_instance
from gridfold.solver import external_backend, oracle_backend
from gridfold.two_step import COMPONENTS, MAP_A, MAP_B, MAP_C, MappingStrategy, step_two

parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
parser.add_argument("--seed", type=int, default=0)
parser.add_argument("--buses", type=int, default=6)
parser.add_argument("--distance-km", type=float, default=5.0)
parser.add_argument("--oracle", action="store_true")
args = parser.parse_args()

solve = oracle_backend() if args.oracle else external_backend()
cfg = CepConfig(mip_gap_step1=0.0, mip_gap_step2=0.0)
net, days = synth_instance(args.seed, args.buses, 1, SynthKnobs(max_reinforcible=1, candidates_per_cluster=3))
print(f"{net.name}: {len(net.buses)} buses, {len(net.branches)} branches, {len(net.candidates)} candidates")

# the reference: plan directly on every bus
_, best, x_star = solve_cep(net, days, cfg, solve)
print(f"f(x*) = {best.objective:,.0f}")

# one Step (1) on the reduced network, shared by all three maps
reduced, mm = reduce_and_tighten(net, ReductionConfig(args.distance_km))
_, _, x_red = solve_cep(reduced, days, cfg, solve)
print(f"reduced to {len(reduced.buses)} buses at D = {args.distance_km} km\n")

for g in (MAP_A, MAP_B, MAP_C):
    res = step_two(net, mm, x_red, days, cfg, MappingStrategy(g, COMPONENTS), solve)
    print(f"Map {g}: f(x') = {res.f_xprime:,.0f}  ERMM = {ermm(res.f_xprime, best.objective):7.3f}%")

# where did Map A put its money compared with the full-network plan?
res = step_two(net, mm, x_red, days, cfg, MappingStrategy(MAP_A, COMPONENTS), solve)
delta = investment_delta(x_star, res.x_prime, net)
print("\nMW built under Map A minus optimum:", {k: round(v, 1) for k, v in delta.items()})

for label, x in (("optimum", x_star), ("Map A", res.x_prime)):
    ev = evaluate_portfolio(net, x, days, cfg, solve)
    rel = reliability_metrics(ev.scenarios, cfg.annual_scaling)
    print(f"{label:8s} EUE {rel.eue_mwh:10.1f} MWh  LOLH {rel.lolh}  RPS {rel.achieved_rps:5.1f}%")
