"""Equivalence properties and their certification checks on a propagated state.

Three properties: bounded output difference (per output dimension, L-inf),
Top-1 agreement, and confidence-gated Top-1 agreement where only inputs the
reference network classifies with softmax confidence >= delta are obligated.
The confidence gate enters as a linear margin t = ln(delta/(1-delta)) on the
reference network's outputs, via the outer polytope
P_n(delta) = { z : z_i - z_j >= t for all j != i } of the confidence region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import lp as lpmod
from .diffzono import DIFF, F1, F2, INPUT, DiffState
from .lp import CERTIFICATION_MARGIN, LinearProgram, LpOutcome, LpStatus
from .network import Network, evaluate


class PropertyKind(Enum):
    EPSILON = "epsilon"
    TOP1 = "top1"
    DELTA_TOP1 = "delta_top1"


@dataclass(frozen=True)
class PropertySpec:
    kind: PropertyKind
    epsilon: float | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.kind is PropertyKind.EPSILON:
            if self.epsilon is None or self.epsilon <= 0.0:
                raise ValueError("epsilon property needs epsilon > 0")
        elif self.kind is PropertyKind.DELTA_TOP1:
            if self.delta is None or not 0.5 <= self.delta < 1.0:
                raise ValueError(
                    "delta must lie in [1/2, 1): the margin ln(delta/(1-delta)) "
                    "is undefined at delta = 1"
                )

    def param(self) -> float | None:
        if self.kind is PropertyKind.EPSILON:
            return self.epsilon
        if self.kind is PropertyKind.DELTA_TOP1:
            return self.delta
        return None


class Verdict(Enum):
    SAFE = "safe"
    CANDIDATE = "candidate"


@dataclass(frozen=True)
class CheckOutcome:
    verdict: Verdict
    candidate_input: np.ndarray | None = None
    witness_pair: tuple[int, int] | None = None
    lp_calls: int = 0


class CandidateStatus(Enum):
    CONCRETE = "concrete"
    SPURIOUS = "spurious"


def softmax(z: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtraction; exact rearrangement)."""
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def delta_to_threshold(delta: float) -> float:
    """Output margin t with softmax_i(z) >= delta implying z_i - z_j >= t."""
    if not 0.5 <= delta < 1.0:
        raise ValueError(f"delta must lie in [1/2, 1), got {delta}")
    return math.log(delta / (1.0 - delta))


def softmax_poly_error(n: int, delta: float) -> float:
    """Worst confidence shortfall of the margin polytope: the gap between
    delta and the smallest top softmax value over P_n(delta). Zero at n=2 and
    in the limit delta -> 1."""
    if n < 2:
        raise ValueError(f"need n >= 2 outputs, got {n}")
    if not 0.5 <= delta <= 1.0:
        raise ValueError(f"delta must lie in [1/2, 1], got {delta}")
    delta = float(delta)
    return delta - delta / (delta * (2 - n) + n - 1)


def softmax_sigmoid_error(n: int, upsilon: float) -> float:
    """Worst-case error of the sigmoid-segment softmax approximation it is
    compared against: (n-2)/(sqrt(n-1)+1)^2 plus twice the segment error."""
    if n < 2:
        raise ValueError(f"need n >= 2 outputs, got {n}")
    if upsilon < 0.0:
        raise ValueError(f"upsilon must be >= 0, got {upsilon}")
    return (n - 2) / (math.sqrt(n - 1) + 1.0) ** 2 + 2.0 * upsilon


# -- epsilon check -----------------------------------------------------------


def check_epsilon(state: DiffState, epsilon: float) -> CheckOutcome:
    """SAFE iff every difference row has max(|lower|, |upper|) <= epsilon.

    Otherwise the candidate input realizes the worst row's bound within the
    abstraction: the bound-achieving sign pattern of the input generators,
    mapped through the input zonotope.
    """
    lo, up = state.zdelta.lower_upper()
    worst = np.maximum(np.abs(lo), np.abs(up))
    if np.all(worst <= epsilon):
        return CheckOutcome(Verdict.SAFE)
    row = int(np.argmax(worst))
    e_row = state.zdelta.block(INPUT)[row]
    sign = 1.0 if abs(up[row]) >= abs(lo[row]) else -1.0
    eps_in = sign * np.sign(e_row)
    x = state.z_in.point({INPUT: eps_in})
    return CheckOutcome(Verdict.CANDIDATE, candidate_input=x)


# -- Top-1 violation LP -------------------------------------------------------


class Top1Lp:
    """Constraint block for one reference class k, with per-j objectives.

    Variables are all generators of the joint state in class order
    (input, net-1 approx, net-2 approx, difference approx). Inequalities pin k
    as the reference network's maximum with margin t; equalities couple the
    three forms so the difference form constrains net 2's outputs.
    """

    def __init__(self, state: DiffState, k: int, t: float):
        zd = state.zdelta
        O = zd.dims
        if not 0 <= k < O:
            raise ValueError(f"output index {k} out of range [0, {O})")
        self.k = k
        self.t = t
        e1, a1, c1 = state.z1.block(INPUT), state.z1.block(F1), state.z1.center
        e2, a2, c2 = state.z2.block(INPUT), state.z2.block(F2), state.z2.center
        ed, a1d, a2d = zd.block(INPUT), zd.block(F1), zd.block(F2)
        a4d, cd = zd.block(DIFF), zd.center
        n1, n2, n3, n4 = (
            e1.shape[1],
            a1.shape[1],
            a2.shape[1],
            a4d.shape[1],
        )
        self.n_vars = n1 + n2 + n3 + n4
        self.slices = (
            slice(0, n1),
            slice(n1, n1 + n2),
            slice(n1 + n2, n1 + n2 + n3),
            slice(n1 + n2 + n3, self.n_vars),
        )
        s_in, s_f1, s_f2, s_diff = self.slices

        ineqs = []
        for l in range(O):
            if l == k:
                continue
            row = np.zeros(self.n_vars)
            row[s_in] = e1[l] - e1[k]
            row[s_f1] = a1[l] - a1[k]
            ineqs.append((row, float(c1[k] - c1[l] - t)))

        eqs = []
        for i in range(O):
            row = np.zeros(self.n_vars)
            row[s_in] = e1[i] - e2[i] - ed[i]
            row[s_f1] = a1[i] - a1d[i]
            row[s_f2] = -a2[i] - a2d[i]
            row[s_diff] = -a4d[i]
            eqs.append((row, float(c2[i] + cd[i] - c1[i])))

        self.base = LinearProgram(
            self.n_vars, np.zeros(self.n_vars), tuple(ineqs), tuple(eqs)
        )
        self._e2, self._a2, self._c2 = e2, a2, c2
        self._s_in, self._s_f2 = s_in, s_f2

    def objective_for(self, j: int) -> tuple[np.ndarray, float]:
        """Linear part and constant of (net-2 output j) - (net-2 output k)."""
        obj = np.zeros(self.n_vars)
        obj[self._s_in] = self._e2[j] - self._e2[self.k]
        obj[self._s_f2] = self._a2[j] - self._a2[self.k]
        return obj, float(self._c2[j] - self._c2[self.k])

    def lp_for(self, j: int) -> tuple[LinearProgram, float]:
        obj, const = self.objective_for(j)
        return self.base.with_objective(obj), const


def build_top1_lp(state: DiffState, k: int, t: float) -> Top1Lp:
    return Top1Lp(state, k, t)


def _zdelta_is_exactly_zero(state: DiffState) -> bool:
    zd = state.zdelta
    return not np.any(zd.center) and not any(
        np.any(blk) for blk in zd.blocks.values()
    )


def _candidate_from_argmax(state: DiffState, argmax: np.ndarray) -> np.ndarray:
    n1 = state.zdelta.block(INPUT).shape[1]
    return state.z_in.point({INPUT: argmax[:n1]})


def check_top1(state: DiffState, t: float, backend=None) -> CheckOutcome:
    """Sweep all ordered output pairs (k, j); SAFE only if every maximum of
    the violation LP clears the certification margin below zero.

    An exactly-zero difference form short-circuits to SAFE: the two networks
    agree pointwise on the box, so any argmax of the first is preserved.
    A numerically failed solve yields a candidate without input (forcing the
    caller to refine), never SAFE.
    """
    if t < 0.0:
        raise ValueError(f"margin t must be >= 0, got {t}")
    if _zdelta_is_exactly_zero(state):
        return CheckOutcome(Verdict.SAFE)
    O = state.zdelta.dims
    lp_calls = 0
    for k in range(O):
        plp = build_top1_lp(state, k, t)
        prior: LpOutcome | None = None
        for j in range(O):
            if j == k:
                continue
            lp, const = plp.lp_for(j)
            if prior is None:
                out = lpmod.solve_max(lp, backend)
            else:
                out = lpmod.solve_max_warm(lp, prior, backend)
            lp_calls += 1
            if out.status is LpStatus.INFEASIBLE:
                break  # no input makes k maximal with margin t: k is vacuous
            if out.status is LpStatus.SOLVER_ERROR:
                return CheckOutcome(Verdict.CANDIDATE, lp_calls=lp_calls)
            prior = out
            if out.value + const > -CERTIFICATION_MARGIN:
                x = _candidate_from_argmax(state, out.argmax)
                return CheckOutcome(
                    Verdict.CANDIDATE,
                    candidate_input=x,
                    witness_pair=(k, j),
                    lp_calls=lp_calls,
                )
    return CheckOutcome(Verdict.SAFE, lp_calls=lp_calls)


def check_delta_top1(state: DiffState, delta: float, backend=None) -> CheckOutcome:
    """Top-1 check gated on the reference network's confidence >= delta."""
    return check_top1(state, delta_to_threshold(delta), backend)


def check_property(state: DiffState, spec: PropertySpec, backend=None) -> CheckOutcome:
    if spec.kind is PropertyKind.EPSILON:
        return check_epsilon(state, spec.epsilon)
    if spec.kind is PropertyKind.TOP1:
        return check_top1(state, 0.0, backend)
    return check_delta_top1(state, spec.delta, backend)


# -- concrete validation -------------------------------------------------------


def validate_candidate(
    net1: Network,
    net2: Network,
    spec: PropertySpec,
    x: np.ndarray,
    box: tuple[np.ndarray, np.ndarray] | None = None,
) -> CandidateStatus:
    """Concrete forward evaluation of an abstract counterexample candidate.

    Ties in the reference network's argmax are all treated as obligations: any
    maximal output of net 1 that net 2 fails to keep weakly maximal counts.
    """
    x = np.asarray(x, dtype=float)
    if box is not None:
        lower, upper = box
        if np.any(x < lower - 1e-9) or np.any(x > upper + 1e-9):
            raise ValueError("candidate input lies outside the query box")
    y1 = evaluate(net1, x)
    y2 = evaluate(net2, x)
    if spec.kind is PropertyKind.EPSILON:
        violated = float(np.max(np.abs(y1 - y2))) >= spec.epsilon
        return CandidateStatus.CONCRETE if violated else CandidateStatus.SPURIOUS
    if spec.kind is PropertyKind.TOP1:
        obligated = np.flatnonzero(y1 == y1.max())
    else:
        conf = softmax(y1)
        obligated = np.flatnonzero(conf >= spec.delta)
    for k in obligated:
        if np.any(y2 > y2[k]):
            return CandidateStatus.CONCRETE
    return CandidateStatus.SPURIOUS
