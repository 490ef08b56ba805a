import math

import highspy
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from gridfold.milp import (BINARY, ERROR, GE, INFEASIBLE, INTEGER, LE, OPTIMAL, MilpInstance,
                           Solution, relative_gap)
from gridfold.solver import (ENV_VAR, LatticeTooLarge, MpsError, SolutionParseError, SolverError,
                             default_solver_cmd, external_backend, lattice_size, mps_text,
                             oracle_backend, parse_solution, solve_bruteforce, solve_external,
                             solve_lp, write_mps, write_solution)

from oracles import knapsack_best

VALUES, WEIGHTS, CAP = (6, 10, 12), (1, 2, 3), 5


def trivial_lp():
    m = MilpInstance("trivial")
    j = m.add_var("x", 0.0, 10.0, obj=1.0)
    m.add_constraint("atleast", [(j, 1.0)], GE, 3.0)
    return m


def infeasible_lp():
    m = MilpInstance("infeasible")
    j = m.add_var("x", obj=1.0)
    m.add_constraint("lo", [(j, 1.0)], GE, 1.0)
    m.add_constraint("hi", [(j, 1.0)], LE, 0.0)
    return m


def knapsack(values=VALUES, weights=WEIGHTS, cap=CAP):
    m = MilpInstance("knapsack")
    cols = [m.add_var(f"take{k}", obj=-v, vtype=BINARY) for k, v in enumerate(values)]
    m.add_constraint("weight", list(zip(cols, weights)), LE, cap)
    return m


def read_with_highs(path):
    """Objective and column values of an MPS file, as an independent reader sees it."""
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    return h.getInfo().objective_function_value, dict(zip(h.getLp().col_names_, h.getSolution().col_value))


# --- MPS -------------------------------------------------------------------------

def test_empty_instance_mps():
    lines = mps_text(MilpInstance("empty")).splitlines()
    assert lines[0].split() == ["NAME", "empty"]
    assert "ROWS" in lines and lines[-1] == "ENDATA"
    assert not {"COLUMNS", "RHS", "BOUNDS"} & set(lines)


def test_trivial_mps_read_back(tmp_path):
    obj, x = read_with_highs(write_mps(trivial_lp(), tmp_path / "t.mps"))
    assert obj == pytest.approx(3.0, abs=1e-9)
    assert x["x"] == pytest.approx(3.0, abs=1e-9)


def test_binary_marker_and_bounds():
    text = mps_text(knapsack())
    lines = text.splitlines()
    start = next(i for i, l in enumerate(lines) if "'INTORG'" in l)
    end = next(i for i, l in enumerate(lines) if "'INTEND'" in l)
    assert all(f"take{k}" in "\n".join(lines[start:end]) for k in range(3))
    assert " BV BND take0" in lines


def test_general_integer_gets_explicit_bounds():
    m = MilpInstance()
    m.add_var("n", 0.0, math.inf, obj=1.0, vtype=INTEGER)
    text = mps_text(m)
    assert " LO BND n 0" in text and " PL BND n" in text


def test_mps_rejects_nonfinite_coefficients():
    m = MilpInstance()
    j = m.add_var("x", obj=float("nan"))
    with pytest.raises(MpsError):
        mps_text(m)
    m = MilpInstance()
    j = m.add_var("x")
    m.add_constraint("r", [(j, math.inf)], LE, 1.0)
    with pytest.raises(MpsError):
        mps_text(m)


def test_mps_rejects_long_names():
    m = MilpInstance()
    m.add_var("x" * 256)
    with pytest.raises(MpsError):
        mps_text(m)


def test_mps_deterministic(tmp_path):
    a = write_mps(knapsack(), tmp_path / "a.mps").read_bytes()
    b = write_mps(knapsack(), tmp_path / "b.mps").read_bytes()
    assert a == b


@given(st.integers(1, 6), st.integers(0, 5), st.integers(0, 2**31 - 1))
@settings(max_examples=40)
def test_mps_round_trips_through_reader(tmp_path_factory, n, m_rows, seed):
    rng = np.random.default_rng(seed)
    m = MilpInstance("rand")
    cols = [m.add_var(f"x{j}", 0.0, float(rng.integers(1, 5)), obj=float(rng.normal())) for j in range(n)]
    for i in range(m_rows):
        m.add_constraint(f"r{i}", [(j, float(rng.uniform(0, 1))) for j in cols], LE, float(rng.uniform(1, 4)))
    path = tmp_path_factory.mktemp("mps") / "r.mps"
    assert write_mps(m, path).read_text() == mps_text(m)
    obj, _ = read_with_highs(path)
    assert obj == pytest.approx(solve_bruteforce(m).objective, abs=1e-7)


# --- solution files ------------------------------------------------------------

def test_solution_round_trip(tmp_path):
    m = knapsack()
    sol = Solution(OPTIMAL, objective=-22.0, values={"take0": 0.0, "take1": 1.0, "take2": 1.0})
    back = parse_solution(write_solution(sol, tmp_path / "s.sol"), m)
    assert (back.status, back.objective, back.values) == (sol.status, sol.objective, sol.values)
    assert back.warnings == []


def test_solution_unknown_name_warns(tmp_path):
    p = tmp_path / "s.sol"
    p.write_text("=obj= 3\nx 3\nghost 7\n")
    sol = parse_solution(p, trivial_lp())
    assert sol.values == {"x": 3.0}
    assert any("ghost" in w for w in sol.warnings)


def test_solution_missing_names_default_zero(tmp_path):
    p = tmp_path / "s.sol"
    p.write_text("take1 1\n")
    sol = parse_solution(p, knapsack())
    assert sol.values == {"take0": 0.0, "take1": 1.0, "take2": 0.0}
    assert sol.objective == -10.0
    assert any("missing" in w for w in sol.warnings)


def test_objective_only_file(tmp_path):
    p = tmp_path / "s.sol"
    p.write_text("=obj= 5.5\n")
    sol = parse_solution(p, trivial_lp())
    assert sol.values == {} and sol.objective == 5.5
    assert sol.warnings


@pytest.mark.parametrize("body,lineno", [("x 1\ny\n", 2), ("=obj= 1\n\nx one\n", 3), ("a b c\n", 1)])
def test_malformed_lines_carry_line_numbers(tmp_path, body, lineno):
    p = tmp_path / "s.sol"
    p.write_text(body)
    with pytest.raises(SolutionParseError, match=f":{lineno}:"):
        parse_solution(p)


def test_relative_gap_definition():
    assert relative_gap(100.0, 99.0) == pytest.approx(0.01)
    assert relative_gap(-100.0, -101.0) == pytest.approx(0.01)
    assert relative_gap(0.0, 0.0) == 0.0


# --- external solver -------------------------------------------------------------

def test_external_trivial():
    sol = solve_external(trivial_lp())
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-6)
    assert sol["x"] == pytest.approx(3.0, abs=1e-6)
    assert sol.mip_gap == 0.0 and sol.wall_time > 0


def test_external_infeasible():
    assert solve_external(infeasible_lp()).status == INFEASIBLE


def test_external_knapsack():
    sol = solve_external(knapsack())
    assert -sol.objective == pytest.approx(knapsack_best(VALUES, WEIGHTS, CAP)) == 22
    assert [round(sol[f"take{k}"]) for k in range(3)] == [0, 1, 1]


def test_external_concurrent_solves():
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(4) as ex:
        objs = list(ex.map(lambda _: solve_external(knapsack()).objective, range(4)))
    assert objs == [-22.0] * 4


def test_external_command_needs_placeholders():
    with pytest.raises(ValueError):
        solve_external(trivial_lp(), "highs {mps}")


def test_external_missing_binary():
    with pytest.raises(SolverError):
        solve_external(trivial_lp(), "/nonexistent/solver {mps} {sol}")


def test_external_failing_command_maps_to_error():
    sol = solve_external(trivial_lp(), "false {mps} {sol}")
    assert sol.status == ERROR and not sol.has_values


def test_solver_env_var(monkeypatch):
    monkeypatch.setenv(ENV_VAR, "mysolver {mps} {sol}")
    assert default_solver_cmd() == "mysolver {mps} {sol}"
    monkeypatch.delenv(ENV_VAR)
    assert "highs_cli" in default_solver_cmd()


# --- brute force -----------------------------------------------------------------

def test_bruteforce_knapsack():
    sol = solve_bruteforce(knapsack())
    assert sol.objective == -22.0
    assert [sol[f"take{k}"] for k in range(3)] == [0.0, 1.0, 1.0]


def test_bruteforce_pure_lp_equals_simplex():
    m = trivial_lp()
    c, A, sense, rhs, lb, ub, _ = m.arrays()
    assert solve_bruteforce(m).objective == solve_lp(c, A.toarray(), sense, rhs, lb, ub).objective == 3.0


def test_bruteforce_infeasible():
    assert solve_bruteforce(infeasible_lp()).status == INFEASIBLE


def test_bruteforce_lattice_limit():
    m = knapsack((1,) * 13, (1,) * 13, 5)
    assert lattice_size(m) == 2 ** 13
    with pytest.raises(LatticeTooLarge):
        solve_bruteforce(m)
    m2 = MilpInstance()
    m2.add_var("n", vtype=INTEGER)
    with pytest.raises(LatticeTooLarge):
        solve_bruteforce(m2)


def test_bruteforce_unbounded_is_error():
    m = MilpInstance()
    m.add_var("x", -math.inf, math.inf, obj=1.0)
    assert solve_bruteforce(m).status == ERROR


def test_bruteforce_is_bit_deterministic():
    m = knapsack((5, 5, 5, 5), (2, 2, 2, 2), 4)  # many ties
    a, b = solve_bruteforce(m), solve_bruteforce(m)
    assert a.values == b.values and a.objective == b.objective


@given(st.lists(st.integers(1, 20), min_size=1, max_size=7), st.lists(st.integers(1, 9), min_size=7, max_size=7),
       st.integers(0, 30))
def test_knapsack_backends_agree_with_enumeration(values, weights, cap):
    weights = weights[:len(values)]
    best = knapsack_best(values, weights, cap)
    m = knapsack(values, weights, cap)
    assert -solve_bruteforce(m).objective == best
    assert -solve_external(m, gap=0.0).objective == pytest.approx(best, abs=1e-6)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25)
def test_mixed_integer_backends_agree(seed):
    rng = np.random.default_rng(seed)
    m = MilpInstance("mix")
    ints = [m.add_var(f"n{k}", 0, int(rng.integers(1, 4)), obj=float(rng.uniform(1, 5)), vtype=INTEGER)
            for k in range(2)]
    conts = [m.add_var(f"x{k}", 0, float(rng.uniform(1, 6)), obj=float(rng.uniform(0.5, 3))) for k in range(4)]
    demand = float(rng.uniform(2, 8))
    m.add_constraint("demand", [(j, 1.0) for j in conts] + [(j, 2.0) for j in ints], GE, demand)
    m.add_constraint("link", [(conts[0], 1.0), (ints[0], -3.0)], LE, 0.0)
    ext = solve_external(m, gap=0.0)
    orc = solve_bruteforce(m)
    assert ext.status == orc.status
    if orc.status == OPTIMAL:
        assert abs(ext.objective - orc.objective) <= 1e-6 + 1e-9 * abs(orc.objective)


def test_backend_wrappers():
    assert oracle_backend()(knapsack()).objective == -22.0
    assert external_backend()(knapsack(), 0.0, 60).objective == pytest.approx(-22.0)


# --- simplex ---------------------------------------------------------------------

def random_lp(seed, n, m):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n)).round(2)
    lb = -rng.uniform(0, 3, size=n).round(1)
    ub = rng.uniform(0, 3, size=n).round(1)
    x0 = rng.uniform(lb, ub)  # keeps the LP feasible
    sense = rng.choice(["L", "G", "E"], size=m, p=[0.45, 0.45, 0.1])
    slack = rng.uniform(0, 1, size=m)
    rhs = A @ x0 + np.where(sense == "L", slack, np.where(sense == "G", -slack, 0.0))
    return c, A, sense, rhs, lb, ub


def scipy_reference(c, A, sense, rhs, lb, ub):
    le = sense == "L"
    ge = sense == "G"
    eq = sense == "E"
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([rhs[le], -rhs[ge]])
    return linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                   A_eq=A[eq] if eq.any() else None, b_eq=rhs[eq] if eq.any() else None,
                   bounds=list(zip(lb, ub)), method="highs")


def lagrangian_bound(y, c, A, rhs, lb, ub):
    """Dual function: min over the box of c x - y (A x - b)."""
    red = c - A.T @ y
    return float(y @ rhs + np.sum(np.where(red >= 0, red * lb, red * ub)))


@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.integers(0, 8))
@settings(max_examples=100)
def test_simplex_matches_scipy(seed, n, m):
    c, A, sense, rhs, lb, ub = random_lp(seed, n, m)
    res = solve_lp(c, A, sense, rhs, lb, ub)
    ref = scipy_reference(c, A, sense, rhs, lb, ub)
    assert ref.status == 0 and res.status == "optimal"
    assert res.objective == pytest.approx(ref.fun, abs=1e-7, rel=1e-7)
    assert np.all(res.x >= lb - 1e-9) and np.all(res.x <= ub + 1e-9)
    lhs = A @ res.x
    assert np.all(lhs[sense == "L"] <= rhs[sense == "L"] + 1e-7)
    assert np.all(lhs[sense == "G"] >= rhs[sense == "G"] - 1e-7)
    assert np.allclose(lhs[sense == "E"], rhs[sense == "E"], atol=1e-7)


@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.integers(1, 8))
@settings(max_examples=100)
def test_simplex_weak_duality(seed, n, m):
    c, A, sense, rhs, lb, ub = random_lp(seed, n, m)
    res = solve_lp(c, A, sense, rhs, lb, ub)
    rng = np.random.default_rng(seed + 1)
    # any sign-feasible multiplier gives a lower bound
    for _ in range(5):
        y = rng.normal(size=m)
        y = np.where(sense == "G", np.abs(y), np.where(sense == "L", -np.abs(y), y))
        assert lagrangian_bound(y, c, A, rhs, lb, ub) <= res.objective + 1e-7
    # the returned duals are sign-feasible and close the gap
    y = res.duals
    assert np.all(y[sense == "G"] >= -1e-7) and np.all(y[sense == "L"] <= 1e-7)
    assert lagrangian_bound(y, c, A, rhs, lb, ub) == pytest.approx(res.objective, abs=1e-6)


def test_simplex_unbounded_and_infeasible():
    assert solve_lp([-1.0], np.zeros((0, 1)), [], [], [0.0], [math.inf]).status == "unbounded"
    assert solve_lp([1.0], [[1.0], [1.0]], ["G", "L"], [1.0, 0.0], [0.0], [math.inf]).status == "infeasible"
    assert solve_lp([1.0], np.zeros((0, 1)), [], [], [2.0], [1.0]).status == "infeasible"


def test_simplex_degenerate_cycling_example():
    # Beale's example cycles under naive largest-coefficient pricing
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    res = solve_lp(c, A, ["L", "L", "L"], [0, 0, 1], [0] * 4, [math.inf] * 4)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(-0.05)
