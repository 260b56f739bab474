"""Bounded-variable linear programming.

Programs maximize a linear objective over x in [-1,1]^n subject to linear
inequalities (coeffs . x <= rhs) and equalities. The reference backend is a
dense two-phase simplex that handles the variable bounds natively (nonbasic
variables sit at either bound; the ratio test allows bound flips) and uses
Bland's rule against cycling. A scipy-backed solver with the same interface
can be substituted.

A returned maximum is only trusted as "safe" by callers when it clears the
conservative CERTIFICATION_MARGIN below zero; values above -margin are treated
as violation-possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Maxima in (-margin, +margin] are treated as possibly violating: float
# optimism must never turn into an unsound "equivalent" verdict.
CERTIFICATION_MARGIN = 1e-7

_FEAS_TOL = 1e-8
_PIVOT_TOL = 1e-9


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    SOLVER_ERROR = "solver_error"


@dataclass(frozen=True)
class LinearProgram:
    """max objective . x over x in [-1,1]^n_vars subject to the constraints."""

    n_vars: int
    objective: np.ndarray
    inequalities: tuple = ()  # (coeffs, rhs) meaning coeffs . x <= rhs
    equalities: tuple = ()  # (coeffs, rhs) meaning coeffs . x == rhs

    def __post_init__(self):
        obj = np.asarray(self.objective, dtype=float)
        if obj.shape != (self.n_vars,):
            raise ValueError(f"objective must have length {self.n_vars}")
        object.__setattr__(self, "objective", obj)
        for name in ("inequalities", "equalities"):
            rows = []
            for coeffs, rhs in getattr(self, name):
                coeffs = np.asarray(coeffs, dtype=float)
                if coeffs.shape != (self.n_vars,):
                    raise ValueError(
                        f"{name} row must have {self.n_vars} coefficients"
                    )
                rows.append((coeffs, float(rhs)))
            object.__setattr__(self, name, tuple(rows))

    def with_objective(self, objective: np.ndarray) -> "LinearProgram":
        return LinearProgram(self.n_vars, objective, self.inequalities, self.equalities)

    def constraint_arrays(self):
        ki, ke = len(self.inequalities), len(self.equalities)
        a_ub = np.array([c for c, _ in self.inequalities]).reshape(ki, self.n_vars)
        b_ub = np.array([r for _, r in self.inequalities])
        a_eq = np.array([c for c, _ in self.equalities]).reshape(ke, self.n_vars)
        b_eq = np.array([r for _, r in self.equalities])
        return a_ub, b_ub, a_eq, b_eq

    def check_feasible(self, x: np.ndarray, tol: float = _FEAS_TOL) -> bool:
        a_ub, b_ub, a_eq, b_eq = self.constraint_arrays()
        if np.any(np.abs(x) > 1.0 + tol):
            return False
        if a_ub.size and np.any(a_ub @ x > b_ub + tol):
            return False
        if a_eq.size and np.any(np.abs(a_eq @ x - b_eq) > tol):
            return False
        return True


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    value: float | None = None
    argmax: np.ndarray | None = None
    basis: tuple | None = field(default=None, repr=False)  # warm-start state


_BASIC, _LOWER, _UPPER = 0, 1, 2


class SimplexSolver:
    """Two-phase dense simplex over [lb, ub]-bounded variables.

    Internal layout: structural variables, then one slack per inequality
    (bounds [0, inf)), then one artificial per constraint row (bounds [0, inf)
    during phase 1, pinned to 0 afterwards).
    """

    max_iterations_base = 2000

    def solve_max(self, lp: LinearProgram) -> LpOutcome:
        try:
            return self._solve(lp, warm=None)
        except _NumericalFailure:
            return LpOutcome(LpStatus.SOLVER_ERROR)

    def solve_max_warm(self, lp: LinearProgram, prior: LpOutcome) -> LpOutcome:
        if prior.status is not LpStatus.OPTIMAL or prior.basis is None:
            return self.solve_max(lp)
        try:
            return self._solve(lp, warm=prior.basis)
        except _NumericalFailure:
            return self.solve_max(lp)

    # -- internals ----------------------------------------------------------

    def _setup(self, lp: LinearProgram):
        a_ub, b_ub, a_eq, b_eq = lp.constraint_arrays()
        n = lp.n_vars
        ki, ke = a_ub.shape[0], a_eq.shape[0]
        m = ki + ke
        n_total = n + ki + m
        A = np.zeros((m, n_total))
        b = np.concatenate([b_ub, b_eq]) if m else np.zeros(0)
        if ki:
            A[:ki, :n] = a_ub
            A[np.arange(ki), n + np.arange(ki)] = 1.0
        if ke:
            A[ki:, :n] = a_eq
        lb = np.concatenate([-np.ones(n), np.zeros(ki), np.zeros(m)])
        ub = np.concatenate([np.ones(n), np.full(ki, np.inf), np.full(m, np.inf)])
        return A, b, lb, ub, n, ki, m

    def _solve(self, lp: LinearProgram, warm) -> LpOutcome:
        A, b, lb, ub, n, ki, m = self._setup(lp)
        n_total = A.shape[1]
        art = n + ki  # first artificial column

        if warm is not None:
            basis = np.array(warm[0], dtype=int)
            status = np.array(warm[1], dtype=int)
            if basis.shape != (m,) or status.shape != (n_total,):
                return self.solve_max(lp)
            ub[art:] = 0.0  # artificials stay pinned after phase 1
            x = np.where(status == _UPPER, np.where(np.isfinite(ub), ub, lb), lb)
            x[art:] = 0.0
            ok = self._recompute_basics(A, b, basis, status, x)
            if not ok or self._bounds_violation(x, lb, ub, basis) > 1e-7:
                return self.solve_max(lp)
        else:
            # phase 1: drive artificials (absorbing the initial residuals) to 0
            status = np.full(n_total, _LOWER)
            x = lb.copy()
            x[art:] = 0.0
            resid = b - A[:, : n + ki] @ x[: n + ki]
            sign = np.where(resid >= 0.0, 1.0, -1.0)
            A[np.arange(m), art + np.arange(m)] = sign
            basis = art + np.arange(m)
            status[basis] = _BASIC
            x[basis] = np.abs(resid)
            c1 = np.zeros(n_total)
            c1[art:] = -1.0
            self._iterate(A, b, c1, lb, ub, basis, status, x)
            if c1 @ x < -1e-8:
                return LpOutcome(LpStatus.INFEASIBLE)
            ub[art:] = 0.0
            x[art:] = 0.0
            if not self._recompute_basics(A, b, basis, status, x):
                raise _NumericalFailure

        c = np.zeros(n_total)
        c[:n] = lp.objective
        self._iterate(A, b, c, lb, ub, basis, status, x)

        argmax = x[:n].copy()
        argmax = np.clip(argmax, -1.0, 1.0)
        if not lp.check_feasible(argmax):
            raise _NumericalFailure
        value = float(lp.objective @ argmax)
        return LpOutcome(
            LpStatus.OPTIMAL, value, argmax, (tuple(basis), tuple(status))
        )

    def _recompute_basics(self, A, b, basis, status, x) -> bool:
        m = len(basis)
        if m == 0:
            return True
        nonbasic_mask = np.ones(A.shape[1], dtype=bool)
        nonbasic_mask[basis] = False
        rhs = b - A[:, nonbasic_mask] @ x[nonbasic_mask]
        try:
            xb = np.linalg.solve(A[:, basis], rhs)
        except np.linalg.LinAlgError:
            return False
        x[basis] = xb
        return True

    @staticmethod
    def _bounds_violation(x, lb, ub, basis) -> float:
        v = np.maximum(lb[basis] - x[basis], x[basis] - ub[basis])
        return float(v.max(initial=0.0))

    def _iterate(self, A, b, c, lb, ub, basis, status, x) -> None:
        m, n_total = A.shape
        if m == 0:
            # no constraints: each variable goes to its objective-best bound
            better = np.where(c > 0.0, ub, lb)
            x[:] = np.where(np.isfinite(better), better, lb)
            status[:] = np.where(c > 0.0, _UPPER, _LOWER)
            return
        max_iter = self.max_iterations_base + 50 * (n_total + m)
        for _ in range(max_iter):
            B = A[:, basis]
            try:
                y = np.linalg.solve(B.T, c[basis])
            except np.linalg.LinAlgError:
                raise _NumericalFailure
            reduced = c - A.T @ y

            entering = -1
            for j in range(n_total):  # Bland: smallest eligible index
                if status[j] == _BASIC or ub[j] - lb[j] <= 0.0:
                    continue
                if status[j] == _LOWER and reduced[j] > _PIVOT_TOL:
                    entering = j
                    break
                if status[j] == _UPPER and reduced[j] < -_PIVOT_TOL:
                    entering = j
                    break
            if entering < 0:
                return

            sigma = 1.0 if status[entering] == _LOWER else -1.0
            try:
                w = np.linalg.solve(B, A[:, entering])
            except np.linalg.LinAlgError:
                raise _NumericalFailure

            # ratio test: entering moves by t >= 0, basics move by -sigma*t*w
            t_best = ub[entering] - lb[entering]
            leaving_pos = -1
            leaving_to = _LOWER
            for pos in range(m):
                i = basis[pos]
                wi = sigma * w[pos]
                if wi > _PIVOT_TOL:
                    limit = max(x[i] - lb[i], 0.0) / wi
                    to = _LOWER
                elif wi < -_PIVOT_TOL:
                    if not np.isfinite(ub[i]):
                        continue
                    limit = max(ub[i] - x[i], 0.0) / (-wi)
                    to = _UPPER
                else:
                    continue
                if limit < t_best - 1e-12 or (
                    limit < t_best + 1e-12
                    and (leaving_pos < 0 or i < basis[leaving_pos])
                ):
                    t_best = limit
                    leaving_pos = pos
                    leaving_to = to
            if not np.isfinite(t_best):
                raise _NumericalFailure  # unbounded: impossible for box-bounded x

            t = max(t_best, 0.0)
            x[entering] += sigma * t
            x[basis] -= sigma * t * w
            if leaving_pos < 0:
                status[entering] = _UPPER if status[entering] == _LOWER else _LOWER
                x[entering] = ub[entering] if status[entering] == _UPPER else lb[entering]
            else:
                leaver = basis[leaving_pos]
                status[leaver] = leaving_to
                x[leaver] = lb[leaver] if leaving_to == _LOWER else ub[leaver]
                basis[leaving_pos] = entering
                status[entering] = _BASIC
        raise _NumericalFailure  # iteration cap


class _NumericalFailure(Exception):
    pass


class ScipyBackend:
    """scipy.optimize.linprog (HiGHS) behind the same interface."""

    def solve_max(self, lp: LinearProgram) -> LpOutcome:
        from scipy.optimize import linprog

        a_ub, b_ub, a_eq, b_eq = lp.constraint_arrays()
        res = linprog(
            -lp.objective,
            A_ub=a_ub if a_ub.size else None,
            b_ub=b_ub if a_ub.size else None,
            A_eq=a_eq if a_eq.size else None,
            b_eq=b_eq if a_eq.size else None,
            bounds=[(-1.0, 1.0)] * lp.n_vars,
            method="highs",
        )
        if res.status == 2:
            return LpOutcome(LpStatus.INFEASIBLE)
        if res.status != 0:
            return LpOutcome(LpStatus.SOLVER_ERROR)
        x = np.clip(res.x, -1.0, 1.0)
        return LpOutcome(LpStatus.OPTIMAL, float(lp.objective @ x), x)

    def solve_max_warm(self, lp: LinearProgram, prior: LpOutcome) -> LpOutcome:
        return self.solve_max(lp)


_default_backend = SimplexSolver()


def solve_max(lp: LinearProgram, backend=None) -> LpOutcome:
    return (backend or _default_backend).solve_max(lp)


def solve_max_warm(lp: LinearProgram, prior: LpOutcome, backend=None) -> LpOutcome:
    return (backend or _default_backend).solve_max_warm(lp, prior)
