"""Exact MILP oracle: enumerate the integer lattice, solve each LP exactly."""

from __future__ import annotations

import itertools
import math
import time

import numpy as np

from ..milp import ERROR, INFEASIBLE, OPTIMAL, MilpInstance, Solution
from .simplex import TOL, solve_lp

DEFAULT_LATTICE_LIMIT = 4096
DEFAULT_MAX_CONTINUOUS = 20_000


class LatticeTooLarge(ValueError):
    pass


def _integer_ranges(lb, ub, cols):
    ranges = []
    for j in cols:
        if not (math.isfinite(lb[j]) and math.isfinite(ub[j])):
            raise LatticeTooLarge(f"integer column {j} has an unbounded range")
        lo, hi = math.ceil(lb[j] - 1e-9), math.floor(ub[j] + 1e-9)
        ranges.append(range(int(lo), int(hi) + 1))
    return ranges


def lattice_size(m: MilpInstance) -> int:
    _, _, _, _, lb, ub, is_int = m.arrays()
    size = 1
    for r in _integer_ranges(lb, ub, np.flatnonzero(is_int)):
        size *= len(r)
    return size


def _restricted_lp(Ad, sense, rhs, lb, ub, fixed_cols, fixed_vals, free_cols):
    """Fold fixed columns into the rhs and turn single-column rows into bounds.

    Returns (A, sense, rhs, lb, ub) over ``free_cols`` or None if some row is
    violated by the fixed part alone.
    """
    b = rhs - Ad[:, fixed_cols] @ fixed_vals if len(fixed_cols) else rhs.copy()
    A = Ad[:, free_cols]
    lo, hi = lb[free_cols].copy(), ub[free_cols].copy()
    nnz = (A != 0).sum(axis=1)
    keep = np.ones(len(b), dtype=bool)
    scale = max(1.0, float(np.abs(rhs).max(initial=0.0)))
    for i in np.flatnonzero(nnz <= 1):
        keep[i] = False
        s = sense[i]
        if nnz[i] == 0:
            bad = ((s == "L" and b[i] < -TOL * scale) or (s == "G" and b[i] > TOL * scale)
                   or (s == "E" and abs(b[i]) > TOL * scale))
            if bad:
                return None
            continue
        k = int(np.flatnonzero(A[i])[0])
        a = A[i, k]
        v = b[i] / a
        if s == "E":
            lo[k], hi[k] = max(lo[k], v), min(hi[k], v)
        elif (s == "L") == (a > 0):
            hi[k] = min(hi[k], v)
        else:
            lo[k] = max(lo[k], v)
    if np.any(lo > hi + 1e-9 * np.maximum(1.0, np.abs(hi))):
        return None
    hi = np.maximum(hi, lo)
    return A[keep], sense[keep], b[keep], lo, hi


def solve_bruteforce(m: MilpInstance, lattice_limit: int = DEFAULT_LATTICE_LIMIT,
                     max_continuous: int = DEFAULT_MAX_CONTINUOUS) -> Solution:
    """Global optimum of ``m`` by exhaustive integer enumeration.

    Each integer assignment leaves an LP in the continuous columns, solved
    with the internal simplex. Ties keep the first assignment in lexicographic
    order, so results are reproducible bit for bit.
    """
    t0 = time.perf_counter()
    c, A, sense, rhs, lb, ub, is_int = m.arrays()
    int_cols = np.flatnonzero(is_int)
    cont_cols = np.flatnonzero(~is_int)
    if len(cont_cols) > max_continuous:
        raise LatticeTooLarge(f"{len(cont_cols)} continuous columns exceed limit {max_continuous}")
    ranges = _integer_ranges(lb, ub, int_cols)
    size = math.prod(len(r) for r in ranges)
    if size > lattice_limit:
        raise LatticeTooLarge(f"integer lattice has {size} points, limit is {lattice_limit}")

    Ad = A.toarray()
    best_obj, best_x = math.inf, None
    for assignment in itertools.product(*ranges):
        fixed = np.array(assignment, dtype=float)
        restricted = _restricted_lp(Ad, sense, rhs, lb, ub, int_cols, fixed, cont_cols)
        if restricted is None:
            continue
        Ar, sr, br, lo, hi = restricted
        # columns pinned by their bounds leave the LP entirely
        pinned = hi <= lo
        cc = c[cont_cols]
        xr = np.where(pinned, lo, 0.0)
        res = solve_lp(cc[~pinned], Ar[:, ~pinned], sr, br - Ar[:, pinned] @ lo[pinned],
                       lo[~pinned], hi[~pinned])
        if res.status == "infeasible":
            continue
        if res.status != "optimal":
            return Solution(ERROR, wall_time=time.perf_counter() - t0,
                            warnings=[f"continuous restriction {res.status} at {assignment}"])
        xr[~pinned] = res.x
        obj = float(c[int_cols] @ fixed) + float(cc @ xr)
        if obj < best_obj - 1e-12 * max(1.0, abs(obj)):
            best_obj = obj
            x = np.zeros(len(c))
            x[int_cols] = fixed
            x[cont_cols] = xr
            best_x = x
    elapsed = time.perf_counter() - t0
    if best_x is None:
        return Solution(INFEASIBLE, wall_time=elapsed)
    values = {v.name: float(best_x[j]) for j, v in enumerate(m.variables)}
    return Solution(OPTIMAL, objective=best_obj, best_bound=best_obj, mip_gap=0.0,
                    values=values, wall_time=elapsed)
