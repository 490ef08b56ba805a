"""Free-format MPS writer and the plain-text solution file format."""

from __future__ import annotations

import math
from pathlib import Path

from ..milp import EQ, GE, LE, OPTIMAL, MilpInstance, Solution

_OBJ_ROW = "OBJ"
_ROW_TYPE = {LE: "L", GE: "G", EQ: "E"}
MAX_NAME = 255


class MpsError(ValueError):
    pass


def _num(v: float) -> str:
    if not math.isfinite(v):
        raise MpsError(f"unrepresentable value {v!r}")
    return repr(float(v))


def _check_name(name: str) -> str:
    if not name or len(name) > MAX_NAME or any(ch.isspace() for ch in name) or name.startswith("$"):
        raise MpsError(f"name {name!r} is not representable in free MPS")
    return name


def mps_text(m: MilpInstance) -> str:
    """Render ``m`` as free MPS. Output depends only on the instance."""
    out = [f"NAME {_check_name(m.name)}", "ROWS", f" N {_OBJ_ROW}"]
    row_names = []
    for con in m.constraints:
        row_names.append(_check_name(con.name))
        out.append(f" {_ROW_TYPE[con.sense]} {con.name}")

    col_entries: list[list[tuple[str, float]]] = [[] for _ in m.variables]
    for i, con in enumerate(m.constraints):
        for j, a in con.terms:
            col_entries[j].append((row_names[i], a))

    if m.variables:
        out.append("COLUMNS")
    in_int = False
    marker = 0
    for j, v in enumerate(m.variables):
        _check_name(v.name)
        if v.is_integer and not in_int:
            out.append(f" MARKER{marker} 'MARKER' 'INTORG'")
            in_int = True
        elif not v.is_integer and in_int:
            out.append(f" MARKER{marker} 'MARKER' 'INTEND'")
            marker += 1
            in_int = False
        entries = []
        if v.obj != 0.0:
            entries.append((_OBJ_ROW, v.obj))
        entries.extend(col_entries[j])
        if not entries:
            # keep the column declared even if it appears nowhere
            entries = [(_OBJ_ROW, 0.0)]
        for row, a in entries:
            out.append(f" {v.name} {row} {_num(a)}")
    if in_int:
        out.append(f" MARKER{marker} 'MARKER' 'INTEND'")

    rhs_lines = [f" RHS {con.name} {_num(con.rhs)}" for con in m.constraints if con.rhs != 0.0]
    if rhs_lines:
        out.append("RHS")
        out.extend(rhs_lines)

    bounds = []
    for v in m.variables:
        lb, ub = v.lb, v.ub
        if math.isnan(lb) or math.isnan(ub):
            raise MpsError(f"NaN bound on {v.name}")
        if lb == ub:
            bounds.append(f" FX BND {v.name} {_num(lb)}")
            continue
        if lb == -math.inf and ub == math.inf:
            bounds.append(f" FR BND {v.name}")
            continue
        if v.vtype == "B" and lb == 0.0 and ub == 1.0:
            bounds.append(f" BV BND {v.name}")
            continue
        if lb == -math.inf:
            bounds.append(f" MI BND {v.name}")
        elif lb != 0.0 or v.is_integer:
            bounds.append(f" LO BND {v.name} {_num(lb)}")
        if ub != math.inf:
            bounds.append(f" UP BND {v.name} {_num(ub)}")
        elif v.is_integer:
            # integer columns default to [0, 1] in some readers without an explicit UP
            bounds.append(f" PL BND {v.name}")
    if bounds:
        out.append("BOUNDS")
        out.extend(bounds)
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def write_mps(m: MilpInstance, path) -> Path:
    path = Path(path)
    path.write_text(mps_text(m))
    return path


def write_solution(sol: Solution, path) -> Path:
    lines = [f"# status {sol.status}"]
    if sol.objective is not None:
        lines.append(f"=obj= {sol.objective!r}")
    for name, val in sol.values.items():
        lines.append(f"{name} {float(val)!r}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


class SolutionParseError(ValueError):
    pass


def parse_solution(path, m: MilpInstance | None = None, status: str = OPTIMAL) -> Solution:
    """Read a ``name value`` solution file.

    With an instance, values are matched against its columns: unknown names
    are ignored and missing columns default to 0, both with warnings.
    """
    objective = None
    values: dict[str, float] = {}
    warns: list[str] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionParseError(f"{path}:{lineno}: expected '<name> <value>', got {raw!r}")
        name, text = parts
        try:
            val = float(text)
        except ValueError:
            raise SolutionParseError(f"{path}:{lineno}: bad number {text!r}") from None
        if name == "=obj=":
            objective = val
        else:
            values[name] = val
    if not values:
        warns.append("solution file holds no variable values")
    if m is not None:
        known = set(m.names())
        for name in [n for n in values if n not in known]:
            warns.append(f"unknown variable {name!r} ignored")
            del values[name]
        if values:
            missing = [n for n in m.names() if n not in values]
            if missing:
                warns.append(f"{len(missing)} variable(s) missing from solution, set to 0")
            values = {n: values.get(n, 0.0) for n in m.names()}
            if objective is None:
                objective = m.objective_value(values)
    return Solution(status, objective=objective, values=values, warnings=warns)
