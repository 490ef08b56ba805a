"""Dense bounded-variable primal simplex.

This is the exact LP engine behind the brute-force oracle: a plain tableau
with explicit bounds, two phases, and Bland's rule for anti-cycling. Pricing
uses the largest reduced cost and drops to Bland's smallest-index rule
whenever a run of degenerate pivots gets long. Cycling can only happen
inside such a run, so Bland's rule there keeps the finite-termination
guarantee, and the next strict improvement switches back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9
_DEGENERATE_RUN = 40
_MAX_ITER = 200_000


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration-limit"
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None
    iterations: int = 0


class _Tableau:
    def __init__(self, T, lb, ub):
        self.T = T
        self.lb = lb
        self.ub = ub
        self.m, self.N = T.shape


def _run_phase(tab: _Tableau, basis, x, cost, nonbasic_mask, iters):
    """Primal simplex iterations until optimality for ``cost``."""
    T, lb, ub = tab.T, tab.lb, tab.ub
    d = cost - cost[basis] @ T
    bland = False
    degenerate = 0
    while True:
        if iters >= _MAX_ITER:
            return "iteration-limit", iters
        can_up = nonbasic_mask & (x < ub - TOL) & (d < -TOL)
        can_dn = nonbasic_mask & (x > lb + TOL) & (d > TOL)
        eligible = can_up | can_dn
        if not eligible.any():
            return "optimal", iters
        if bland:
            j = int(np.flatnonzero(eligible)[0])
        else:
            score = np.where(eligible, np.abs(d), -1.0)
            j = int(np.argmax(score))
        direction = 1.0 if can_up[j] else -1.0

        col = T[:, j] * direction  # x_B changes by -t * col
        xb = x[basis]
        lbb, ubb = lb[basis], ub[basis]
        t_best = ub[j] - lb[j]
        leave = -1
        with np.errstate(divide="ignore", invalid="ignore"):
            dec = col > TOL
            inc = col < -TOL
            ratios = np.full(tab.m, np.inf)
            ratios[dec] = (xb[dec] - lbb[dec]) / col[dec]
            ratios[inc] = (ubb[inc] - xb[inc]) / (-col[inc])
        ratios = np.maximum(ratios, 0.0)
        if tab.m:
            rmin = ratios.min()
            if rmin < t_best:
                ties = np.flatnonzero(ratios <= rmin + TOL)
                if bland:
                    leave = int(ties[np.argmin(basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(col[ties]))])
                t_best = rmin
        if not np.isfinite(t_best):
            return "unbounded", iters

        x[j] += direction * t_best
        x[basis] = xb - t_best * col
        iters += 1
        if leave < 0:
            # entering variable just moved to its opposite bound
            x[j] = ub[j] if direction > 0 else lb[j]
            degenerate = 0
            bland = False
            continue

        out = basis[leave]
        x[out] = lb[out] if col[leave] > 0 else ub[out]
        piv = T[leave, j]
        T[leave] /= piv
        colj = T[:, j].copy()
        colj[leave] = 0.0
        rows = np.flatnonzero(colj)
        prow = T[leave]
        cols = np.flatnonzero(prow)
        if len(cols) * 4 < T.shape[1]:
            T[np.ix_(rows, cols)] -= np.outer(colj[rows], prow[cols])
        else:
            T[rows] -= np.outer(colj[rows], prow)
        d -= d[j] * T[leave]
        d[j] = 0.0
        basis[leave] = j
        nonbasic_mask[j] = False
        nonbasic_mask[out] = True

        if t_best <= TOL:
            degenerate += 1
            if degenerate >= _DEGENERATE_RUN:
                bland = True
        else:
            # a strict improvement means no earlier basis can recur
            degenerate = 0
            bland = False


def solve_lp(c, A, sense, rhs, lb, ub) -> LPResult:
    """Minimise ``c @ x`` subject to row senses 'L'/'G'/'E' and bounds.

    ``A`` is a dense (m, n) array. Returns primal values, objective and the
    row duals of the final basis.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float).reshape(len(rhs), len(c))
    rhs = np.asarray(rhs, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    m, n = A.shape
    if np.any(lb > ub + TOL):
        return LPResult("infeasible")

    # slacks: L rows get +s, G rows get -s, s >= 0
    slack_rows = [i for i in range(m) if sense[i] != "E"]
    ns = len(slack_rows)
    S = np.zeros((m, ns))
    for k, i in enumerate(slack_rows):
        S[i, k] = 1.0 if sense[i] == "L" else -1.0

    x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    resid = _crash(A, sense, rhs, lb, ub, x0)

    basis = np.empty(m, dtype=int)
    art_rows, art_sign = [], []
    slack_of_row = {i: k for k, i in enumerate(slack_rows)}
    xs = np.zeros(ns)
    for i in range(m):
        k = slack_of_row.get(i)
        if k is not None and resid[i] * S[i, k] >= 0:
            basis[i] = n + k
            xs[k] = resid[i] * S[i, k]
        else:
            art_rows.append(i)
            art_sign.append(1.0 if resid[i] >= 0 else -1.0)
    na = len(art_rows)
    R = np.zeros((m, na))
    for k, i in enumerate(art_rows):
        R[i, k] = art_sign[k]
        basis[i] = n + ns + k

    full = np.hstack([A, S, R])
    N = n + ns + na
    L = np.concatenate([lb, np.zeros(ns), np.zeros(na)])
    art_val = np.abs(resid[art_rows]) if na else np.zeros(0)
    # artificials that start at zero are pinned there; only the others are priced in phase 1
    U = np.concatenate([ub, np.full(ns, np.inf), np.where(art_val > 0, np.inf, 0.0)])
    x = np.concatenate([x0, xs, art_val])

    # initial basis is diagonal with +-1 entries, so B^-1 = B
    diag = full[np.arange(m), basis] if m else np.zeros(0)
    T = full / diag[:, None] if m else full
    tab = _Tableau(T, L, U)
    nonbasic = np.ones(N, dtype=bool)
    nonbasic[basis] = False

    iters = 0
    if np.any(art_val > 0):
        cost1 = np.zeros(N)
        cost1[n + ns:] = 1.0
        status, iters = _run_phase(tab, basis, x, cost1, nonbasic, iters)
        if status != "optimal":
            return LPResult(status, iterations=iters)
        if x[n + ns:].sum() > 1e-7 * max(1.0, np.abs(rhs).max(initial=0.0)):
            return LPResult("infeasible", iterations=iters)
        U[n + ns:] = 0.0
        x[n + ns:] = 0.0

    cost2 = np.concatenate([c, np.zeros(ns + na)])
    status, iters = _run_phase(tab, basis, x, cost2, nonbasic, iters)
    if status != "optimal":
        return LPResult(status, iterations=iters)

    # B^-1 = T[:, initial basic columns] scaled back by the initial diagonal
    init = _initial_basis_columns(m, n, ns, slack_rows, art_rows)
    Binv = T[:, init] / diag[None, :] if m else np.zeros((0, 0))
    nb = nonbasic.copy()
    xb = Binv @ (rhs - full[:, nb] @ x[nb]) if m else np.zeros(0)
    x[basis] = xb
    duals = cost2[basis] @ Binv if m else np.zeros(0)
    xs_out = x[:n].copy()
    return LPResult("optimal", xs_out, float(c @ xs_out), duals, iters)


def _infeasibility(resid, sense):
    return np.where(sense == "E", np.abs(resid),
                    np.where(sense == "L", np.maximum(-resid, 0.0), np.maximum(resid, 0.0)))


def _crash(A, sense, rhs, lb, ub, x0, passes: int = 3):
    """Flip boxed columns between their bounds while that lowers row infeasibility.

    A cheap starting point that cuts phase 1 short when, say, a slack-like
    column can absorb an equality row on its own. Updates ``x0`` in place and
    returns the row residuals ``rhs - A @ x0``.
    """
    sense = np.asarray(sense)
    resid = rhs - A @ x0
    if not len(rhs):
        return resid
    boxed = np.flatnonzero(np.isfinite(lb) & np.isfinite(ub) & (ub > lb))
    support = {j: np.flatnonzero(A[:, j]) for j in boxed}
    for _ in range(passes):
        moved = False
        for j in boxed:
            rows = support[j]
            if not len(rows):
                continue
            target = lb[j] if x0[j] == ub[j] else ub[j]
            step = (target - x0[j]) * A[rows, j]
            before = _infeasibility(resid[rows], sense[rows]).sum()
            after = _infeasibility(resid[rows] - step, sense[rows]).sum()
            if after < before - TOL * max(1.0, before):
                x0[j] = target
                resid[rows] -= step
                moved = True
        if not moved:
            break
    return resid


def _initial_basis_columns(m, n, ns, slack_rows, art_rows):
    cols = np.empty(m, dtype=int)
    slack_of_row = {i: k for k, i in enumerate(slack_rows)}
    art_of_row = {i: k for k, i in enumerate(art_rows)}
    for i in range(m):
        if i in art_of_row:
            cols[i] = n + ns + art_of_row[i]
        else:
            cols[i] = n + slack_of_row[i]
    return cols
