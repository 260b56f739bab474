"""Lock-step propagation of two networks plus a difference zonotope.

The difference zonotope shares noise symbols with the two per-network
zonotopes (input block plus each network's relaxation blocks) and bounds
f1(x) - f2(x) pointwise: fixing the input generators to any v keeps all three
forms' concretizations simultaneously valid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .network import Activation, Network
from .zonotope import (
    GeneratorClass,
    Phase,
    ReluRelaxation,
    Zonotope,
)

INPUT = GeneratorClass.INPUT
F1 = GeneratorClass.F1_APPROX
F2 = GeneratorClass.F2_APPROX
DIFF = GeneratorClass.DIFF_APPROX


class Mode(Enum):
    DIFF = "diff"
    NAIVE = "naive"


@dataclass(frozen=True)
class DeltaReluParams:
    """Relaxation parameters for one doubly-instable difference row."""

    lambda_d: float
    mu_d: float
    nu_d: float
    lambda1: float
    mu1: float
    lambda2: float
    mu2: float


@dataclass
class DiffState:
    """The three coupled zonotopes plus split-heuristic bookkeeping.

    ``z1``/``z2`` carry INPUT plus their own approx class; ``zdelta`` carries
    all four classes with block widths always equal to z1's/z2's. ``d1``/``d2``
    are influence matrices (input-generator count x input-generator count +
    approx count): an identity block for the input generators followed by one
    nonnegative influence column per approx generator, in creation order.
    ``z_in`` is kept so abstract counterexample coordinates can be mapped back
    to concrete inputs.
    """

    z_in: Zonotope
    z1: Zonotope
    z2: Zonotope
    zdelta: Zonotope
    d1: np.ndarray
    d2: np.ndarray


def init_diff_state(z_in: Zonotope) -> DiffState:
    """Start state: both networks see the input box, difference is exactly 0."""
    for cls in (F1, F2, DIFF):
        if z_in.n_generators(cls) > 0:
            raise ValueError("input zonotope must carry only input generators")
    n = z_in.n_generators(INPUT)
    m = z_in.dims
    z1 = Zonotope(z_in.center.copy(), {INPUT: z_in.block(INPUT).copy()})
    z2 = Zonotope(z_in.center.copy(), {INPUT: z_in.block(INPUT).copy()})
    zdelta = Zonotope(np.zeros(m), {INPUT: np.zeros((m, n))})
    eye = np.eye(n)
    return DiffState(z_in, z1, z2, zdelta, eye.copy(), eye.copy())


def affine_delta(
    state: DiffState,
    W1: np.ndarray,
    b1: np.ndarray,
    W2: np.ndarray,
    b2: np.ndarray,
) -> DiffState:
    """Push the pair of affine maps through all three zonotopes.

    The difference form is scaled by W1 and picks up the weight/bias deltas
    applied to the second network's reachable values:
        E^ = W1 E + (W1-W2) E2,  A2^ = W1 A2d + (W1-W2) A2,
        c^ = W1 c + (W1-W2) c2 + (b1-b2),
    while the first-network and own-relaxation blocks are only scaled by W1.
    """
    W1 = np.asarray(W1, dtype=float)
    W2 = np.asarray(W2, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    if W1.shape != W2.shape:
        raise ValueError(f"weight shapes differ: {W1.shape} vs {W2.shape}")
    if W1.shape[1] != state.zdelta.dims:
        raise ValueError(
            f"affine map expects {W1.shape[1]} dims, state has {state.zdelta.dims}"
        )
    dW = W1 - W2
    zd = state.zdelta
    z2 = state.z2
    blocks = {
        INPUT: W1 @ zd.block(INPUT) + dW @ z2.block(INPUT),
        F1: W1 @ zd.block(F1),
        F2: W1 @ zd.block(F2) + dW @ z2.block(F2),
        DIFF: W1 @ zd.block(DIFF),
    }
    center = W1 @ zd.center + dW @ z2.center + (b1 - b2)
    return replace(
        state,
        z1=state.z1.affine_transform(W1, b1),
        z2=state.z2.affine_transform(W2, b2),
        zdelta=Zonotope(center, blocks),
    )


def delta_relu_params(
    l_delta: float, u_delta: float, rel1: ReluRelaxation, rel2: ReluRelaxation
) -> DeltaReluParams:
    """Parameters for the doubly-instable case, from the difference row's
    bounds and the two per-network relaxations.

    lambda_d is clamp(u/(u-l), 0, 1); at zero width it degenerates to 1 for a
    positive constant difference and 0 otherwise.
    """
    width = u_delta - l_delta
    if width > 0.0:
        lambda_d = min(max(u_delta / width, 0.0), 1.0)
    else:
        lambda_d = 1.0 if u_delta > 0.0 else 0.0
    mu_d = 0.5 * max(-l_delta, u_delta)
    nu_d = lambda_d * max(0.0, -l_delta)
    return DeltaReluParams(
        lambda_d=lambda_d,
        mu_d=mu_d,
        nu_d=nu_d,
        lambda1=1.0 - rel1.lam,
        mu1=rel1.new_generator_magnitude,
        lambda2=1.0 - rel2.lam,
        mu2=rel2.new_generator_magnitude,
    )


def relu_delta(state: DiffState) -> DiffState:
    """Apply ReLU to both networks and rebuild the difference form.

    Each row is classified by the pair of pre-activation phases and handled by
    one of nine cases: six are linear (both stable, or one negative and one
    instable, where the difference equals +-one network's value), three append
    one fresh difference generator (instable paired with positive, or both
    instable). z1 and z2 are replaced by their post-ReLU forms; the influence
    matrices gain one column per fresh per-network generator.
    """
    z1, z2, zd = state.z1, state.z2, state.zdelta
    m = zd.dims
    z1hat, rels1 = z1.relu_transform(F1)
    z2hat, rels2 = z2.relu_transform(F2)

    n1 = z1.n_generators(INPUT)
    n2_old, n3_old = z1.n_generators(F1), z2.n_generators(F2)
    n2_new, n3_new = z1hat.n_generators(F1), z2hat.n_generators(F2)
    n4_old = zd.n_generators(DIFF)

    E1, A1p, c1 = z1.block(INPUT), z1.block(F1), z1.center
    E2, A2p, c2 = z2.block(INPUT), z2.block(F2), z2.center
    E1h, A1h, c1h = z1hat.block(INPUT), z1hat.block(F1), z1hat.center
    E2h, A2h, c2h = z2hat.block(INPUT), z2hat.block(F2), z2hat.center
    Ed, A1d, A2d = zd.block(INPUT), zd.block(F1), zd.block(F2)
    A4d, cd = zd.block(DIFF), zd.center
    lo_d, up_d = zd.lower_upper()

    E = np.zeros((m, n1))
    A1 = np.zeros((m, n2_new))
    A2 = np.zeros((m, n3_new))
    A4 = np.zeros((m, n4_old))
    c = np.zeros(m)
    fresh: list[tuple[int, float]] = []

    for i in range(m):
        p1, p2 = rels1[i].phase, rels2[i].phase
        if p1 is Phase.NEG and p2 is Phase.NEG:
            pass  # relu(x) - relu(y) = 0 - 0
        elif p1 is Phase.NEG and p2 is Phase.POS:
            E[i] = -E2[i]
            A2[i, :n3_old] = -A2p[i]
            c[i] = -c2[i]
        elif p1 is Phase.POS and p2 is Phase.NEG:
            E[i] = E1[i]
            A1[i, :n2_old] = A1p[i]
            c[i] = c1[i]
        elif p1 is Phase.POS and p2 is Phase.POS:
            E[i] = Ed[i]
            A1[i, :n2_old] = A1d[i]
            A2[i, :n3_old] = A2d[i]
            A4[i] = A4d[i]
            c[i] = cd[i]
        elif p1 is Phase.INSTABLE and p2 is Phase.NEG:
            # difference equals relu(x): copy z1's post-ReLU row, fresh
            # generator included (it stays in z1's approx class).
            E[i] = E1h[i]
            A1[i] = A1h[i]
            c[i] = c1h[i]
        elif p1 is Phase.NEG and p2 is Phase.INSTABLE:
            E[i] = -E2h[i]
            A2[i] = -A2h[i]
            c[i] = -c2h[i]
        else:
            params = delta_relu_params(lo_d[i], up_d[i], rels1[i], rels2[i])
            if p1 is Phase.INSTABLE and p2 is Phase.POS:
                lam, mu = params.lambda1, params.mu1
                E[i] = Ed[i] - lam * E1[i]
                A1[i, :n2_old] = A1d[i] - lam * A1p[i]
                A2[i, :n3_old] = A2d[i]
                A4[i] = A4d[i]
                c[i] = cd[i] - lam * c1[i] + mu
                if mu > 0.0:
                    fresh.append((i, mu))
            elif p1 is Phase.POS and p2 is Phase.INSTABLE:
                lam, mu = params.lambda2, params.mu2
                E[i] = Ed[i] + lam * E2[i]
                A1[i, :n2_old] = A1d[i]
                A2[i, :n3_old] = A2d[i] + lam * A2p[i]
                A4[i] = A4d[i]
                c[i] = cd[i] + lam * c2[i] - mu
                if mu > 0.0:
                    fresh.append((i, mu))
            else:  # both instable
                if lo_d[i] == 0.0 and up_d[i] == 0.0:
                    # zero-width zero difference: relu(x) - relu(y) = 0 exactly
                    continue
                lam = params.lambda_d
                E[i] = lam * Ed[i]
                A1[i, :n2_old] = lam * A1d[i]
                A2[i, :n3_old] = lam * A2d[i]
                A4[i] = lam * A4d[i]
                c[i] = lam * cd[i] + params.nu_d - params.mu_d
                if params.mu_d > 0.0:
                    fresh.append((i, params.mu_d))

    if fresh:
        cols = np.zeros((m, len(fresh)))
        for j, (row, mag) in enumerate(fresh):
            cols[row, j] = mag
        A4 = np.hstack([A4, cols])

    zdelta_new = Zonotope(c, {INPUT: E, F1: A1, F2: A2, DIFF: A4})
    d1 = _extend_influence(state.d1, z1, rels1, F1)
    d2 = _extend_influence(state.d2, z2, rels2, F2)
    return replace(state, z1=z1hat, z2=z2hat, zdelta=zdelta_new, d1=d1, d2=d2)


def _extend_influence(
    D: np.ndarray,
    z_pre: Zonotope,
    rels: list[ReluRelaxation],
    approx_cls: GeneratorClass,
) -> np.ndarray:
    """One influence column per fresh generator: |e| + sum_k |a_k| d(k),
    taken from the fresh generator's pre-ReLU row."""
    n = z_pre.n_generators(INPUT)
    rows = [
        i
        for i, r in enumerate(rels)
        if r.phase is Phase.INSTABLE and r.new_generator_magnitude > 0.0
    ]
    if not rows:
        return D
    e_abs = np.abs(z_pre.block(INPUT)[rows])  # (k, n)
    a_abs = np.abs(z_pre.block(approx_cls)[rows])
    new_cols = e_abs.T + D[:, n:] @ a_abs.T
    return np.hstack([D, new_cols])


def naive_diff_form(z1: Zonotope, z2: Zonotope) -> Zonotope:
    """Generator-wise subtraction of the two output zonotopes.

    Sound for joint containment because z1 and z2 share the input generators:
    x - y = (E1-E2) eps_in + A1 eps_f1 - A2 eps_f2 + (c1 - c2).
    """
    m = z1.dims
    return Zonotope(
        z1.center - z2.center,
        {
            INPUT: z1.block(INPUT) - z2.block(INPUT),
            F1: z1.block(F1).copy(),
            F2: -z2.block(F2),
            DIFF: np.zeros((m, 0)),
        },
    )


def _check_lockstep_compatible(net1: Network, net2: Network) -> None:
    if net1.depth != net2.depth:
        raise ValueError(
            f"incompatible architectures: depth {net1.depth} vs {net2.depth}"
        )
    for i, (l1, l2) in enumerate(zip(net1.layers, net2.layers)):
        if l1.weights.shape != l2.weights.shape:
            raise ValueError(
                f"layer {i}: shapes {l1.weights.shape} vs {l2.weights.shape}; "
                "pad networks to a common shape first"
            )
        if l1.activation is not l2.activation:
            raise ValueError(f"layer {i}: activation mismatch")


def reach_delta(
    net1: Network, net2: Network, z_in: Zonotope, mode: Mode = Mode.DIFF
) -> DiffState:
    """Propagate the input zonotope through both networks in lock-step.

    DIFF mode maintains the difference form layer by layer; NAIVE mode only
    propagates the two individual zonotopes and derives the difference by
    generator-wise subtraction at the output.
    """
    _check_lockstep_compatible(net1, net2)
    state = init_diff_state(z_in)
    for l1, l2 in zip(net1.layers, net2.layers):
        if mode is Mode.DIFF:
            state = affine_delta(state, l1.weights, l1.bias, l2.weights, l2.bias)
            if l1.activation is Activation.RELU:
                state = relu_delta(state)
        else:
            z1 = state.z1.affine_transform(l1.weights, l1.bias)
            z2 = state.z2.affine_transform(l2.weights, l2.bias)
            d1, d2 = state.d1, state.d2
            if l1.activation is Activation.RELU:
                z1_pre, z2_pre = z1, z2
                z1, rels1 = z1.relu_transform(F1)
                z2, rels2 = z2.relu_transform(F2)
                d1 = _extend_influence(d1, z1_pre, rels1, F1)
                d2 = _extend_influence(d2, z2_pre, rels2, F2)
            state = replace(state, z1=z1, z2=z2, d1=d1, d2=d2)
    if mode is Mode.NAIVE:
        state = replace(state, zdelta=naive_diff_form(state.z1, state.z2))
    return state
