"""MILP backends: MPS emission, external solver driver, exact oracle."""

from .bruteforce import DEFAULT_LATTICE_LIMIT, LatticeTooLarge, lattice_size, solve_bruteforce
from .external import ENV_VAR, HIGHS_CMD, SolverError, default_solver_cmd, solve_external
from .mps import MpsError, SolutionParseError, mps_text, parse_solution, write_mps, write_solution
from .simplex import LPResult, solve_lp


def oracle_backend(lattice_limit: int = DEFAULT_LATTICE_LIMIT):
    """Backend callable ``(instance, gap, time_limit) -> Solution`` using the oracle."""

    def solve(m, gap=0.0, time_limit=None):
        return solve_bruteforce(m, lattice_limit=lattice_limit)

    solve.exact = True
    return solve


def external_backend(solver_cmd: str | None = None):
    cmd = solver_cmd or default_solver_cmd()

    def solve(m, gap=1e-4, time_limit=3600.0):
        return solve_external(m, cmd, gap=gap, time_limit=time_limit)

    solve.exact = False
    return solve


__all__ = [
    "DEFAULT_LATTICE_LIMIT", "ENV_VAR", "HIGHS_CMD", "LPResult", "LatticeTooLarge", "MpsError",
    "SolutionParseError", "SolverError", "default_solver_cmd", "external_backend", "lattice_size",
    "mps_text", "oracle_backend", "parse_solution", "solve_bruteforce", "solve_external",
    "solve_lp", "write_mps", "write_solution",
]
