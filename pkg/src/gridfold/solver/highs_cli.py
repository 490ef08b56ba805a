"""Adapter: solve an MPS file with HiGHS and write the plain solution format.

    python -m gridfold.solver.highs_cli model.mps model.sol --gap 0.01 --time-limit 60
"""

import argparse
import sys

import highspy


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mps")
    ap.add_argument("sol")
    ap.add_argument("--gap", type=float, default=1e-4)
    ap.add_argument("--time-limit", type=float, default=3600.0)
    args = ap.parse_args(argv)

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", args.gap)
    h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("random_seed", 0)
    if h.readModel(args.mps) == highspy.HighsStatus.kError:
        print(f"cannot read {args.mps}", file=sys.stderr)
        return 1
    h.run()
    ms = h.getModelStatus()
    S = highspy.HighsModelStatus
    if ms in (S.kInfeasible, S.kUnboundedOrInfeasible):
        return 2
    info = h.getInfo()
    has_sol = info.primal_solution_status == 2  # feasible
    if ms == S.kModelEmpty:
        has_sol, code = True, 0
    elif ms == S.kOptimal:
        code = 0
    elif ms == S.kTimeLimit:
        code = 3
    elif has_sol:
        code = 4
    else:
        print(f"HiGHS stopped with {h.modelStatusToString(ms)}", file=sys.stderr)
        return 1
    if not has_sol:
        return code

    lp = h.getLp()
    values = h.getSolution().col_value
    with open(args.sol, "w") as fh:
        fh.write(f"# status {h.modelStatusToString(ms).replace(' ', '_')}\n")
        if h.getLp().integrality_ and info.mip_node_count >= 0:
            fh.write(f"# bound {info.mip_dual_bound!r}\n")
        fh.write(f"=obj= {info.objective_function_value!r}\n")
        for name, v in zip(lp.col_names_, values):
            fh.write(f"{name} {v!r}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
