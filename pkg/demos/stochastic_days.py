"""
Several representative days at once
===================================

Plans one portfolio for three weighted days (the extensive form), compares
it with planning each day on its own, and reports the expected-cost error
of a reduced-network plan.
"""

from gridfold.cep import CepConfig, evaluate_portfolio, solve_cep
from gridfold.metrics import ermm_stochastic
from gridfold.reduction import ReductionConfig
from gridfold.scenarios import SynthKnobs, synth_instance
from gridfold.solver import external_backend
from gridfold.two_step import MAP_B, MappingStrategy, run_two_step

solve = external_backend()
cfg = CepConfig(mip_gap_step1=0.0, mip_gap_step2=0.0)
net, days = synth_instance(4, 8, 3, SynthKnobs(max_reinforcible=2))
for d in days:
    print(f"day {d.id}: weight {d.probability:.3f}")

# one plan that has to work on every day
_, sol, x_star = solve_cep(net, days, cfg, solve)
print(f"\nstochastic plan: expected cost {sol.objective:,.0f}, builds {len(x_star.builds())} sites")

# each day alone would have chosen differently; price those plans on all days
for d in days:
    _, _, x_d = solve_cep(net, [d.with_probability(1.0)], cfg, solve)
    ev = evaluate_portfolio(net, x_d, days, cfg, solve)
    print(f"  plan for {d.id} alone costs {ev.total:,.0f} across all days")

# the same comparison through a reduced network
res = run_two_step(net, ReductionConfig(5.0), days, cfg, MappingStrategy(MAP_B), solve)
mapped = evaluate_portfolio(net, res.x_prime, days, cfg, solve)
best = evaluate_portfolio(net, x_star, days, cfg, solve)
err = ermm_stochastic({o.day: (o.probability, o.cost) for o in mapped.scenarios},
                      {o.day: (o.probability, o.cost) for o in best.scenarios})
print(f"\nreduced network: {len(res.reduced.buses)} buses, expected-cost ERMM {err:.3f}%")
