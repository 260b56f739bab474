"""Branch-and-bound verification over input boxes.

Each popped sub-box is propagated through both networks; failed checks are
validated concretely (abstract candidate first, then the box midpoint as a
cheap probe) and otherwise refined by halving one input dimension. The split
dimension is chosen by a forward-influence heuristic: every relaxation
generator carries a nonnegative vector attributing its magnitude back to the
input dimensions, so output rows can be charged to inputs through
|G| |D|^T, scaled by each dimension's current range.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .diffzono import F1, F2, INPUT, DiffState, Mode, reach_delta
from .network import Network, evaluate, pad_to_common_shape
from .properties import (
    CandidateStatus,
    CheckOutcome,
    PropertySpec,
    Verdict,
    check_property,
    validate_candidate,
)
from .zonotope import (
    box_to_zonotope,
    compress_input_generators,
    input_generator_dims,
)


@dataclass(frozen=True)
class InfluenceTracker:
    """Identity block over the input generators, then one nonnegative
    influence column per approx generator, in creation order."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        n = m.shape[0]
        if m.shape[1] < n or not np.allclose(m[:, :n], np.eye(n)):
            raise ValueError("first block of an influence matrix must be identity")
        if np.any(m < 0.0):
            raise ValueError("influence entries must be nonnegative")
        object.__setattr__(self, "matrix", m)

    @property
    def n_inputs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_approx(self) -> int:
        return self.matrix.shape[1] - self.matrix.shape[0]

    def append(self, column: np.ndarray) -> "InfluenceTracker":
        return InfluenceTracker(np.hstack([self.matrix, column[:, None]]))


def influence_column(
    e_row: np.ndarray, a_row: np.ndarray, tracker: InfluenceTracker
) -> np.ndarray:
    """Influence of a fresh generator born at an instable neuron whose
    pre-activation row is (e_row, a_row): |e| + sum_k |a_k| d(k)."""
    e_row = np.asarray(e_row, dtype=float)
    a_row = np.asarray(a_row, dtype=float)
    if e_row.shape != (tracker.n_inputs,):
        raise ValueError("input-generator row length does not match tracker")
    if a_row.shape != (tracker.n_approx,):
        raise ValueError(
            f"row references {a_row.shape[0]} approx generators, tracker has "
            f"{tracker.n_approx} influence columns"
        )
    approx = tracker.matrix[:, tracker.n_inputs :]
    return np.abs(e_row) + approx @ np.abs(a_row)


@dataclass(frozen=True)
class SubProblem:
    lower: np.ndarray
    upper: np.ndarray
    depth: int = 0
    fraction: float = 1.0  # dyadic share of the root box

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ValueError("sub-problem box has lower > upper")

    @property
    def ranges(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)


def pick_split_dimension(
    state: DiffState, d1, d2, box: SubProblem
) -> int:
    """Input dimension with maximal combined direct+indirect influence on the
    two output zonotopes, scaled by the dimension's range; ties break low."""
    d1 = d1.matrix if isinstance(d1, InfluenceTracker) else np.asarray(d1)
    d2 = d2.matrix if isinstance(d2, InfluenceTracker) else np.asarray(d2)
    ranges = box.ranges
    if not np.any(ranges > 0.0):
        raise ValueError("cannot split a point box")
    g1 = np.abs(state.z1.generator_matrix((INPUT, F1)))
    g2 = np.abs(state.z2.generator_matrix((INPUT, F2)))
    per_gen = (g1 @ np.abs(d1).T).sum(axis=0) + (g2 @ np.abs(d2).T).sum(axis=0)
    dims = input_generator_dims(state.z_in)
    scores = np.full(ranges.shape[0], -np.inf)
    for gen, dim in enumerate(dims):
        scores[dim] = per_gen[gen] * ranges[dim]
    if not np.any(np.isfinite(scores)):
        raise ValueError("no splittable dimension (all ranges zero)")
    return int(np.argmax(scores))


class VerificationStatus:
    EQUIVALENT = "EQUIVALENT"
    NOT_EQUIVALENT = "NOT_EQUIVALENT"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class Counterexample:
    input: np.ndarray
    f1_output: np.ndarray
    f2_output: np.ndarray
    detail: str


@dataclass
class VerificationStats:
    splits: int = 0
    lp_calls: int = 0
    wall_time_seconds: float = 0.0
    verified_box_volume_fraction: float = 0.0


@dataclass(frozen=True)
class Budget:
    timeout_seconds: float
    max_splits: int

    def __post_init__(self):
        if self.timeout_seconds <= 0 or self.max_splits <= 0:
            raise ValueError("budget values must be positive")


@dataclass
class VerificationResult:
    status: str
    counterexample: Counterexample | None
    stats: VerificationStats
    verified_leaves: list | None = field(default=None, repr=False)


def _concrete_counterexample(
    net1: Network, net2: Network, spec: PropertySpec, x: np.ndarray, detail: str
) -> Counterexample:
    # result-type invariant: emitted counterexamples re-validate concretely
    status = validate_candidate(net1, net2, spec, x)
    if status is not CandidateStatus.CONCRETE:
        raise AssertionError("internal error: counterexample failed re-validation")
    return Counterexample(x, evaluate(net1, x), evaluate(net2, x), detail)


def verify(
    net1: Network,
    net2: Network,
    spec: PropertySpec,
    box: tuple[np.ndarray, np.ndarray],
    budget: Budget,
    mode: Mode = Mode.DIFF,
    collect_leaves: bool = False,
) -> VerificationResult:
    """Worklist loop over sub-boxes of the query box.

    EQUIVALENT requires every leaf to be certified; a concretely validated
    violation returns NOT_EQUIVALENT immediately; exhausting the split or time
    budget (or running out of splittable width) yields UNKNOWN with the
    certified volume fraction accumulated so far. Deterministic and
    single-threaded; distinct calls are safe to run concurrently.
    """
    lower = np.asarray(box[0], dtype=float)
    upper = np.asarray(box[1], dtype=float)
    if lower.shape != (net1.input_dim,) or upper.shape != (net1.input_dim,):
        raise ValueError("query box does not match network input dimension")
    if np.any(lower > upper):
        raise ValueError("query box has lower > upper")
    net1, net2 = pad_to_common_shape(net1, net2)

    t0 = time.monotonic()
    stats = VerificationStats()
    leaves: list[tuple[np.ndarray, np.ndarray]] = []
    stack = [SubProblem(lower, upper)]
    stuck = False  # some leaf could neither be certified nor split further

    def result(status, counterexample=None):
        stats.wall_time_seconds = time.monotonic() - t0
        return VerificationResult(
            status, counterexample, stats, leaves if collect_leaves else None
        )

    while stack:
        if time.monotonic() - t0 > budget.timeout_seconds:
            return result(VerificationStatus.UNKNOWN)
        sub = stack.pop()

        if not np.any(sub.ranges > 0.0):
            # point box: concrete evaluation is exact
            if validate_candidate(net1, net2, spec, sub.midpoint) is CandidateStatus.CONCRETE:
                cex = _concrete_counterexample(
                    net1, net2, spec, sub.midpoint, "violation at point box"
                )
                return result(VerificationStatus.NOT_EQUIVALENT, cex)
            stats.verified_box_volume_fraction += sub.fraction
            if collect_leaves:
                leaves.append((sub.lower, sub.upper))
            continue

        z_in = compress_input_generators(box_to_zonotope(sub.lower, sub.upper))
        state = reach_delta(net1, net2, z_in, mode)
        outcome: CheckOutcome = check_property(state, spec)
        stats.lp_calls += outcome.lp_calls

        if outcome.verdict is Verdict.SAFE:
            stats.verified_box_volume_fraction += sub.fraction
            if collect_leaves:
                leaves.append((sub.lower, sub.upper))
            continue

        candidate = outcome.candidate_input
        if candidate is not None:
            candidate = np.clip(candidate, sub.lower, sub.upper)
            if validate_candidate(net1, net2, spec, candidate, (sub.lower, sub.upper)) \
                    is CandidateStatus.CONCRETE:
                detail = (
                    f"abstract candidate, witness outputs {outcome.witness_pair}"
                    if outcome.witness_pair is not None
                    else "abstract candidate"
                )
                cex = _concrete_counterexample(net1, net2, spec, candidate, detail)
                return result(VerificationStatus.NOT_EQUIVALENT, cex)
        mid = sub.midpoint
        if validate_candidate(net1, net2, spec, mid) is CandidateStatus.CONCRETE:
            cex = _concrete_counterexample(net1, net2, spec, mid, "midpoint probe")
            return result(VerificationStatus.NOT_EQUIVALENT, cex)

        if stats.splits >= budget.max_splits:
            return result(VerificationStatus.UNKNOWN)
        try:
            dim = pick_split_dimension(state, state.d1, state.d2, sub)
        except ValueError:
            stuck = True
            continue
        split_at = 0.5 * (sub.lower[dim] + sub.upper[dim])
        if not sub.lower[dim] < split_at < sub.upper[dim]:
            stuck = True  # float width exhausted; cannot refine further
            continue
        stats.splits += 1
        lo_half_upper = sub.upper.copy()
        lo_half_upper[dim] = split_at
        hi_half_lower = sub.lower.copy()
        hi_half_lower[dim] = split_at
        children = [
            SubProblem(sub.lower, lo_half_upper, sub.depth + 1, sub.fraction / 2.0),
            SubProblem(hi_half_lower, sub.upper, sub.depth + 1, sub.fraction / 2.0),
        ]
        # explore the half containing the candidate first (it is pushed last)
        probe = candidate if candidate is not None else mid
        if probe[dim] <= split_at:
            children.reverse()
        stack.extend(children)

    if stuck:
        return result(VerificationStatus.UNKNOWN)
    return result(VerificationStatus.EQUIVALENT)
