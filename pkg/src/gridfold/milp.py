"""Solver-neutral MILP container and solution record."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy import sparse

CONTINUOUS = "C"
BINARY = "B"
INTEGER = "I"

LE, GE, EQ = "L", "G", "E"

OPTIMAL = "optimal"
FEASIBLE_GAP = "feasible-gap"
TIME_LIMIT = "time-limit"
INFEASIBLE = "infeasible"
ERROR = "error"


class Symbol(NamedTuple):
    element: str
    role: str
    hour: Optional[int] = None
    scenario: Optional[str] = None


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    vtype: str = CONTINUOUS
    obj: float = 0.0

    @property
    def is_integer(self) -> bool:
        return self.vtype in (BINARY, INTEGER)


@dataclass
class Constraint:
    name: str
    terms: list  # [(column index, coefficient), ...]
    sense: str
    rhs: float


class MilpInstance:
    """A minimisation MILP with a symbol table over its columns."""

    def __init__(self, name: str = "cep"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.symbols: dict[str, Symbol] = {}
        self.meta: dict = {}
        self._index: dict[str, int] = {}

    def __len__(self):
        return len(self.variables)

    def add_var(self, name, lb=0.0, ub=math.inf, obj=0.0, vtype=CONTINUOUS, symbol=None) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        if vtype == BINARY:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self._index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lb), float(ub), vtype, float(obj)))
        if symbol is not None:
            self.symbols[name] = symbol
        return self._index[name]

    def add_constraint(self, name, terms, sense, rhs) -> int:
        if sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {sense!r}")
        merged: dict[int, float] = {}
        n = len(self.variables)
        for j, a in terms:
            if not 0 <= j < n:
                raise IndexError(f"constraint {name!r} references undeclared column {j}")
            merged[j] = merged.get(j, 0.0) + float(a)
        self.constraints.append(Constraint(name, [(j, a) for j, a in merged.items() if a != 0.0],
                                           sense, float(rhs)))
        return len(self.constraints) - 1

    def index(self, name: str) -> int:
        return self._index[name]

    def var(self, name: str) -> Variable:
        return self.variables[self._index[name]]

    def fix(self, name: str, value: float) -> None:
        v = self.var(name)
        v.lb = v.ub = float(value)

    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def integer_columns(self) -> list[int]:
        return [j for j, v in enumerate(self.variables) if v.is_integer]

    def arrays(self):
        """(c, A csr, sense array, rhs, lb, ub, is_int)."""
        n, m = len(self.variables), len(self.constraints)
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constraints):
            for j, a in con.terms:
                rows.append(i)
                cols.append(j)
                vals.append(a)
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(m, n))
        c = np.array([v.obj for v in self.variables], dtype=float)
        lb = np.array([v.lb for v in self.variables], dtype=float)
        ub = np.array([v.ub for v in self.variables], dtype=float)
        sense = np.array([con.sense for con in self.constraints], dtype="<U1")
        rhs = np.array([con.rhs for con in self.constraints], dtype=float)
        is_int = np.array([v.is_integer for v in self.variables], dtype=bool)
        return c, A, sense, rhs, lb, ub, is_int

    def objective_value(self, values: dict) -> float:
        return sum(v.obj * values.get(v.name, 0.0) for v in self.variables)

    def max_violation(self, values: dict) -> float:
        """Largest bound/row/integrality violation of an assignment."""
        x = np.array([values.get(v.name, 0.0) for v in self.variables])
        worst = 0.0
        for v, xv in zip(self.variables, x):
            worst = max(worst, v.lb - xv, xv - v.ub)
            if v.is_integer:
                worst = max(worst, abs(xv - round(xv)))
        for con in self.constraints:
            lhs = sum(a * x[j] for j, a in con.terms)
            if con.sense == LE:
                worst = max(worst, lhs - con.rhs)
            elif con.sense == GE:
                worst = max(worst, con.rhs - lhs)
            else:
                worst = max(worst, abs(lhs - con.rhs))
        return worst


@dataclass
class Solution:
    status: str
    objective: Optional[float] = None
    best_bound: Optional[float] = None
    mip_gap: Optional[float] = None
    values: dict = field(default_factory=dict)
    wall_time: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def has_values(self) -> bool:
        return self.status in (OPTIMAL, FEASIBLE_GAP, TIME_LIMIT) and self.objective is not None

    def __getitem__(self, name):
        return self.values.get(name, 0.0)


def relative_gap(objective: float, bound: float, eps: float = 1e-10) -> float:
    return (objective - bound) / max(abs(objective), eps)
