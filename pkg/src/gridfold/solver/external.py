"""Drive an external MILP solver through MPS and solution files.

The command template may use ``{mps}``, ``{sol}``, ``{gap}`` and
``{timelimit}``. The solver (or an adapter around it) writes the plain
solution format read by :func:`parse_solution` and signals the outcome with
its exit code:

    0 optimal, 2 infeasible, 3 time limit, 4 stopped with a gap above target

Comment lines ``# bound <value>`` in the solution file, when present, give
the best dual bound.
"""

from __future__ import annotations

import logging
import os
import shlex
import shutil
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from ..milp import (
    ERROR,
    FEASIBLE_GAP,
    INFEASIBLE,
    OPTIMAL,
    TIME_LIMIT,
    MilpInstance,
    Solution,
    relative_gap,
)
from .mps import SolutionParseError, parse_solution, write_mps

log = logging.getLogger(__name__)

EXIT_STATUS = {0: OPTIMAL, 2: INFEASIBLE, 3: TIME_LIMIT, 4: FEASIBLE_GAP}
ENV_VAR = "GRIDFOLD_SOLVER_CMD"

HIGHS_CMD = (f"{shlex.quote(sys.executable)} -m gridfold.solver.highs_cli {{mps}} {{sol}} "
             "--gap {gap} --time-limit {timelimit}")


class SolverError(RuntimeError):
    pass


def default_solver_cmd() -> str:
    return os.environ.get(ENV_VAR) or HIGHS_CMD


def _read_hints(path: Path) -> dict:
    hints = {}
    for line in path.read_text().splitlines():
        parts = line.strip().split()
        if len(parts) == 3 and parts[0] == "#":
            hints[parts[1]] = parts[2]
    return hints


def solve_external(m: MilpInstance, solver_cmd: str | None = None, gap: float = 1e-4,
                   time_limit: float = 3600.0, keep_files: bool = False) -> Solution:
    cmd = solver_cmd or default_solver_cmd()
    for ph in ("{mps}", "{sol}"):
        if ph not in cmd:
            raise ValueError(f"solver command template lacks {ph}")
    workdir = Path(tempfile.mkdtemp(prefix="gridfold-"))
    mps_path, sol_path = workdir / "model.mps", workdir / "model.sol"
    write_mps(m, mps_path)
    argv = shlex.split(cmd.format(mps=mps_path, sol=sol_path, gap=gap, timelimit=time_limit))

    t0 = time.perf_counter()
    timed_out = False
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=time_limit + 30)
        code = proc.returncode
    except subprocess.TimeoutExpired:
        timed_out, code, proc = True, None, None
    except OSError as exc:
        log.error("solver launch failed, files kept in %s", workdir)
        raise SolverError(f"cannot run solver {argv[0]!r}: {exc}") from exc
    elapsed = time.perf_counter() - t0

    status = TIME_LIMIT if timed_out else EXIT_STATUS.get(code, ERROR)
    if status == ERROR:
        log.error("solver exited with %s, files kept in %s", code, workdir)
        stderr = proc.stderr.strip() if proc else ""
        return Solution(ERROR, wall_time=elapsed, warnings=[f"exit code {code}: {stderr[-500:]}"])
    if status == INFEASIBLE:
        _cleanup(workdir, keep_files)
        return Solution(INFEASIBLE, wall_time=elapsed)
    if not sol_path.exists():
        if status == TIME_LIMIT:
            return Solution(TIME_LIMIT, wall_time=elapsed, warnings=["no incumbent"])
        raise SolverError(f"solver reported {status} but wrote no solution ({workdir})")
    try:
        sol = parse_solution(sol_path, m, status=status)
    except SolutionParseError:
        log.error("unparsable solution, files kept in %s", workdir)
        raise
    hints = _read_hints(sol_path)
    if "bound" in hints:
        sol.best_bound = float(hints["bound"])
    elif status == OPTIMAL:
        sol.best_bound = sol.objective
    if sol.objective is not None and sol.best_bound is not None:
        sol.mip_gap = max(0.0, relative_gap(sol.objective, sol.best_bound))
    sol.wall_time = elapsed
    _cleanup(workdir, keep_files)
    return sol


def _cleanup(workdir: Path, keep: bool):
    if not keep:
        shutil.rmtree(workdir, ignore_errors=True)
