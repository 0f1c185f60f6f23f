"""Thin linear-programming layer.

Problems are assembled symbolically (named variables, sparse rows) and handed
to scipy's HiGHS backend.  The solver choice is encapsulated here so the rest
of the package only depends on the build/solve contract: an optimal solution
within tolerance, or an explicit infeasible/unbounded verdict, deterministic
for identical input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from .errors import InvalidSpec, NumericalFailure

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LpProblem:
    """Sparse LP: minimize c @ x subject to A_ub x <= b_ub, A_eq x == b_eq."""

    _index: dict[str, int] = field(default_factory=dict)
    _obj: dict[int, float] = field(default_factory=dict)
    _lb: list[float] = field(default_factory=list)
    _ub: list[float] = field(default_factory=list)
    _ub_rows: list[tuple[dict[int, float], float, str]] = field(default_factory=list)
    _eq_rows: list[tuple[dict[int, float], float, str]] = field(default_factory=list)

    # -- construction ------------------------------------------------------

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf) -> str:
        if name in self._index:
            raise InvalidSpec(f"duplicate variable {name!r}")
        if not (lb <= ub):
            raise InvalidSpec(f"variable {name!r} has empty bounds [{lb}, {ub}]")
        self._index[name] = len(self._lb)
        self._lb.append(lb)
        self._ub.append(ub)
        return name

    def has_var(self, name: str) -> bool:
        return name in self._index

    def set_objective_coeff(self, name: str, coeff: float, accumulate: bool = True) -> None:
        i = self._require(name)
        if not math.isfinite(coeff):
            raise InvalidSpec(f"non-finite objective coefficient for {name!r}")
        if accumulate:
            self._obj[i] = self._obj.get(i, 0.0) + coeff
        else:
            self._obj[i] = coeff

    def add_leq(self, coeffs: dict[str, float], rhs: float, label: str = "") -> None:
        self._ub_rows.append((self._row(coeffs, rhs, label), rhs, label))

    def add_geq(self, coeffs: dict[str, float], rhs: float, label: str = "") -> None:
        flipped = {k: -v for k, v in coeffs.items()}
        self.add_leq(flipped, -rhs, label)

    def add_eq(self, coeffs: dict[str, float], rhs: float, label: str = "") -> None:
        self._eq_rows.append((self._row(coeffs, rhs, label), rhs, label))

    def fix_var(self, name: str, value: float) -> None:
        i = self._require(name)
        self._lb[i] = value
        self._ub[i] = value

    def set_bounds(self, name: str, lb: float | None = None, ub: float | None = None) -> None:
        i = self._require(name)
        if lb is not None:
            self._lb[i] = lb
        if ub is not None:
            self._ub[i] = ub
        if self._lb[i] > self._ub[i]:
            raise InvalidSpec(f"variable {name!r} has empty bounds [{self._lb[i]}, {self._ub[i]}]")

    # -- internals ---------------------------------------------------------

    def _require(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise InvalidSpec(f"unknown variable {name!r}") from None

    def _row(self, coeffs: dict[str, float], rhs: float, label: str) -> dict[int, float]:
        if not (math.isfinite(rhs) and all(math.isfinite(v) for v in coeffs.values())):
            raise InvalidSpec(f"non-finite coefficient in row {label!r}")
        return {self._require(k): v for k, v in coeffs.items()}

    @property
    def num_vars(self) -> int:
        return len(self._lb)


@dataclass
class LpSolution:
    status: str  # optimal / infeasible / unbounded
    objective: float
    values: dict[str, float]

    def __getitem__(self, name: str) -> float:
        return self.values[name]


def _stack(rows, n):
    data, ri, ci = [], [], []
    for r, (coeffs, _, _) in enumerate(rows):
        for c, v in coeffs.items():
            ri.append(r)
            ci.append(c)
            data.append(v)
    mat = csr_matrix((data, (ri, ci)), shape=(len(rows), n))
    rhs = np.array([r[1] for r in rows])
    return mat, rhs


def solve_lp(problem: LpProblem, tol: float = 1e-9) -> LpSolution:
    """Solve to optimality; deterministic for identical problems."""
    n = problem.num_vars
    c = np.zeros(n)
    for i, v in problem._obj.items():
        c[i] = v
    a_ub = b_ub = a_eq = b_eq = None
    if problem._ub_rows:
        a_ub, b_ub = _stack(problem._ub_rows, n)
    if problem._eq_rows:
        a_eq, b_eq = _stack(problem._eq_rows, n)
    bounds = [(lb if math.isfinite(lb) else None, ub if math.isfinite(ub) else None)
              for lb, ub in zip(problem._lb, problem._ub)]
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol},
    )
    if res.status == 0:
        values = {name: float(res.x[i]) for name, i in problem._index.items()}
        return LpSolution(OPTIMAL, float(res.fun), values)
    if res.status == 2:
        return LpSolution(INFEASIBLE, math.nan, {})
    if res.status == 3:
        return LpSolution(UNBOUNDED, math.nan, {})
    raise NumericalFailure(f"LP backend failed: status={res.status}, message={res.message}")
