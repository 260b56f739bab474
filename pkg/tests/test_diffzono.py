import numpy as np
import pytest

from verydiff.diffzono import (
    DIFF,
    F1,
    F2,
    INPUT,
    Mode,
    affine_delta,
    delta_relu_params,
    init_diff_state,
    reach_delta,
    relu_delta,
)
from verydiff.network import Activation, Layer, Network, evaluate, prune_by_weight_norm
from verydiff.zonotope import (
    ReluRelaxation,
    Phase,
    Zonotope,
    box_to_zonotope,
    compress_input_generators,
)

from conftest import containment_violation, linear_net, random_net


def propagate(net1, net2, lo, hi, mode=Mode.DIFF):
    z_in = compress_input_generators(box_to_zonotope(lo, hi))
    return reach_delta(net1, net2, z_in, mode)


# -- init ------------------------------------------------------------------------


def test_init_zero_difference(rng):
    z_in = box_to_zonotope(-np.ones(3), np.ones(3))
    state = init_diff_state(z_in)
    lo, up = state.zdelta.lower_upper()
    assert np.array_equal(lo, np.zeros(3))
    assert np.array_equal(up, np.zeros(3))
    assert not np.any(state.zdelta.center)
    x = z_in.point({INPUT: rng.uniform(-1, 1, 3)})
    assert containment_violation(state, linear_net(np.eye(3), np.zeros(3)),
                                 linear_net(np.eye(3), np.zeros(3)),
                                 x[None, :]) <= 1e-12


def test_init_rejects_approx_generators():
    z = Zonotope(np.zeros(2), {F1: np.ones((2, 1))})
    with pytest.raises(ValueError):
        init_diff_state(z)


# -- affine step ------------------------------------------------------------------


def test_affine_delta_identical_maps_keep_zero(rng):
    state = init_diff_state(box_to_zonotope(-np.ones(2), np.ones(2)))
    W = rng.normal(0, 1, (3, 2))
    b = rng.normal(0, 1, 3)
    out = affine_delta(state, W, b, W, b)
    assert not np.any(out.zdelta.center)
    for blk in out.zdelta.blocks.values():
        assert not np.any(blk)


def test_affine_delta_one_dim_hand_check():
    # f1 = 2x, f2 = x on x in [-1,1]: difference is x
    state = init_diff_state(box_to_zonotope(np.array([-1.0]), np.array([1.0])))
    out = affine_delta(
        state, np.array([[2.0]]), np.zeros(1), np.array([[1.0]]), np.zeros(1)
    )
    assert out.zdelta.block(INPUT)[0, 0] == pytest.approx(1.0)
    assert out.zdelta.center[0] == pytest.approx(0.0)


def test_affine_delta_joint_containment(rng):
    for _ in range(10):
        m = int(rng.integers(2, 5))
        state = init_diff_state(box_to_zonotope(-np.ones(m), np.ones(m)))
        W1 = rng.normal(0, 1, (3, m))
        W2 = W1 + rng.normal(0, 0.1, (3, m))
        b1, b2 = rng.normal(0, 1, 3), rng.normal(0, 1, 3)
        out = affine_delta(state, W1, b1, W2, b2)
        net1 = linear_net(W1, b1)
        net2 = linear_net(W2, b2)
        X = rng.uniform(-1, 1, (200, m))
        assert containment_violation(out, net1, net2, X) <= 1e-9


def test_affine_delta_shape_mismatch(rng):
    state = init_diff_state(box_to_zonotope(-np.ones(2), np.ones(2)))
    with pytest.raises(ValueError):
        affine_delta(state, np.ones((2, 2)), np.zeros(2), np.ones((3, 2)), np.zeros(3))


# -- relu step --------------------------------------------------------------------


def _manual_state(z1, z2, zdelta, z_in):
    from verydiff.diffzono import DiffState

    n = z_in.n_generators(INPUT)
    eye = np.eye(n)
    return DiffState(z_in, z1, z2, zdelta, eye.copy(), eye.copy())


def test_relu_delta_neg_pos_copies_negated_second_row():
    z_in = box_to_zonotope(np.array([-1.0]), np.array([1.0]))
    z1 = Zonotope(np.array([-1.0]), {INPUT: np.array([[0.1]])})  # all negative
    z2 = Zonotope(np.array([1.0]), {INPUT: np.array([[0.2]])})  # all positive
    zdelta = Zonotope(np.array([-2.0]), {INPUT: np.array([[-0.1]])})
    out = relu_delta(_manual_state(z1, z2, zdelta, z_in))
    assert out.zdelta.block(INPUT)[0, 0] == pytest.approx(-0.2)
    assert out.zdelta.center[0] == pytest.approx(-1.0)
    assert out.zdelta.n_generators(DIFF) == 0


def test_relu_delta_pos_neg_copies_first_row():
    z_in = box_to_zonotope(np.array([-1.0]), np.array([1.0]))
    z1 = Zonotope(np.array([2.0]), {INPUT: np.array([[0.3]])})  # all positive
    z2 = Zonotope(np.array([-1.0]), {INPUT: np.array([[0.1]])})  # all negative
    zdelta = Zonotope(np.array([3.0]), {INPUT: np.array([[0.2]])})
    out = relu_delta(_manual_state(z1, z2, zdelta, z_in))
    assert out.zdelta.block(INPUT)[0, 0] == pytest.approx(0.3)
    assert out.zdelta.center[0] == pytest.approx(2.0)
    assert out.zdelta.n_generators(DIFF) == 0


def test_relu_delta_instable_neg_shares_fresh_generator():
    """When the first node is instable and the second negative, the new
    difference row is the first net's post-ReLU row, including its fresh
    relaxation generator (same class, same column, same coefficient)."""
    z_in = box_to_zonotope(np.array([-1.0]), np.array([1.0]))
    z1 = Zonotope(np.array([0.0]), {INPUT: np.array([[1.2]])})  # instable
    z2 = Zonotope(np.array([-2.0]), {INPUT: np.array([[0.5]])})  # negative
    zdelta = Zonotope(np.array([2.0]), {INPUT: np.array([[0.7]])})
    out = relu_delta(_manual_state(z1, z2, zdelta, z_in))
    # post-ReLU form of z1: 0.6 on the input generator, center 0.3,
    # fresh generator 0.3 in the first net's approx class
    assert out.z1.block(INPUT)[0, 0] == pytest.approx(0.6)
    assert out.z1.center[0] == pytest.approx(0.3)
    assert out.zdelta.block(INPUT)[0, 0] == pytest.approx(0.6)
    assert out.zdelta.center[0] == pytest.approx(0.3)
    assert np.array_equal(out.zdelta.block(F1), out.z1.block(F1))
    assert out.zdelta.n_generators(DIFF) == 0


def test_relu_delta_identical_stays_zero(rng):
    z_in = box_to_zonotope(-np.ones(2), np.ones(2))
    g = rng.normal(0, 1, (2, 2))
    c = rng.normal(0, 0.2, 2)  # instable rows
    z1 = Zonotope(c.copy(), {INPUT: g.copy()})
    z2 = Zonotope(c.copy(), {INPUT: g.copy()})
    zdelta = Zonotope(np.zeros(2), {INPUT: np.zeros((2, 2))})
    out = relu_delta(_manual_state(z1, z2, zdelta, z_in))
    assert not np.any(out.zdelta.center)
    for blk in out.zdelta.blocks.values():
        assert not np.any(blk)


def test_delta_relu_params_symmetric_example():
    rel = ReluRelaxation(Phase.INSTABLE, 0.5, 0.3, 0.3)
    p = delta_relu_params(-1.0, 1.0, rel, rel)
    assert p.lambda_d == pytest.approx(0.5)
    assert p.mu_d == pytest.approx(0.5)
    assert p.nu_d == pytest.approx(0.5)
    # center shift lambda*0 + nu - mu = 0
    assert p.nu_d - p.mu_d == pytest.approx(0.0)


def test_delta_relu_params_degenerate_width():
    rel = ReluRelaxation(Phase.INSTABLE, 0.5, 0.3, 0.3)
    p = delta_relu_params(0.5, 0.5, rel, rel)
    assert p.lambda_d == 1.0
    assert p.mu_d == pytest.approx(0.25)
    p = delta_relu_params(-0.5, -0.5, rel, rel)
    assert p.lambda_d == 0.0
    assert p.mu_d == pytest.approx(0.25)


def test_relu_delta_instable_pair_sound(rng):
    """Sampling oracle on a single ReLU layer with both rows instable."""
    for _ in range(20):
        W1 = rng.normal(0, 1, (3, 2))
        W2 = W1 + rng.normal(0, 0.3, (3, 2))
        b1 = rng.normal(0, 0.2, 3)
        b2 = b1 + rng.normal(0, 0.1, 3)
        net1 = Network("n1", 2, (Layer(W1, b1, Activation.RELU),
                                 Layer(np.eye(3), np.zeros(3), Activation.LINEAR)))
        net2 = Network("n2", 2, (Layer(W2, b2, Activation.RELU),
                                 Layer(np.eye(3), np.zeros(3), Activation.LINEAR)))
        state = propagate(net1, net2, -np.ones(2), np.ones(2))
        X = rng.uniform(-1, 1, (300, 2))
        assert containment_violation(state, net1, net2, X) <= 1e-9


# -- reach_delta -------------------------------------------------------------------


def test_reach_identical_network_collapses(rng):
    net = random_net(rng, 3, [8, 6], 2)
    state = propagate(net, net, -np.ones(3), np.ones(3))
    assert not np.any(state.zdelta.center)
    for blk in state.zdelta.blocks.values():
        assert not np.any(blk)


def affine_map_of(net, dim):
    """Effective (M, t) of a ReLU-free network, by probing basis vectors."""
    t = evaluate(net, np.zeros(dim))
    M = np.column_stack([evaluate(net, e) - t for e in np.eye(dim)])
    return M, t


@pytest.mark.parametrize("mode", [Mode.DIFF, Mode.NAIVE])
def test_reach_affine_only_exact(rng, mode):
    for _ in range(10):
        dim = 3
        W1 = rng.normal(0, 1, (4, dim))
        W2 = W1 + rng.normal(0, 0.2, (4, dim))
        V = rng.normal(0, 1, (2, 4))
        net1 = Network("a1", dim, (Layer(W1, rng.normal(0, 1, 4), Activation.LINEAR),
                                   Layer(V, rng.normal(0, 1, 2), Activation.LINEAR)))
        net2 = Network("a2", dim, (Layer(W2, rng.normal(0, 1, 4), Activation.LINEAR),
                                   Layer(V, rng.normal(0, 1, 2), Activation.LINEAR)))
        lo = rng.uniform(-2, 0, dim)
        hi = lo + rng.uniform(0.5, 2, dim)
        state = propagate(net1, net2, lo, hi, mode)

        M1, t1 = affine_map_of(net1, dim)
        M2, t2 = affine_map_of(net2, dim)
        Md, td = M1 - M2, t1 - t2
        center = 0.5 * (lo + hi)
        radius = 0.5 * (hi - lo)
        mid = Md @ center + td
        half = np.abs(Md * radius[None, :]).sum(axis=1)
        lo_d, up_d = state.zdelta.lower_upper()
        assert np.allclose(lo_d, mid - half, atol=1e-9)
        assert np.allclose(up_d, mid + half, atol=1e-9)


@pytest.mark.parametrize("mode", [Mode.DIFF, Mode.NAIVE])
def test_reach_pruned_pairs_jointly_sound(rng, mode):
    for _ in range(10):
        I = int(rng.integers(2, 5))
        widths = [int(rng.integers(4, 10)) for _ in range(int(rng.integers(1, 4)))]
        net1 = random_net(rng, I, widths, int(rng.integers(2, 4)))
        net2 = prune_by_weight_norm(net1, float(rng.uniform(0.05, 0.5)))
        lo = rng.uniform(-1, 0, I)
        hi = lo + rng.uniform(0.2, 1.5, I)
        state = propagate(net1, net2, lo, hi, mode)
        X = rng.uniform(lo, hi, (200, I))
        assert containment_violation(state, net1, net2, X) <= 1e-9


def test_reach_depth_mismatch(rng):
    net1 = random_net(rng, 2, [4], 2)
    net2 = random_net(rng, 2, [4, 4], 2)
    with pytest.raises(ValueError):
        propagate(net1, net2, -np.ones(2), np.ones(2))


def test_naive_form_blocks(rng):
    net1 = random_net(rng, 2, [6], 2)
    net2 = prune_by_weight_norm(net1, 0.3)
    state = propagate(net1, net2, -np.ones(2), np.ones(2), Mode.NAIVE)
    zd = state.zdelta
    assert zd.n_generators(DIFF) == 0
    assert np.allclose(zd.block(INPUT),
                       state.z1.block(INPUT) - state.z2.block(INPUT))
    assert np.allclose(zd.block(F1), state.z1.block(F1))
    assert np.allclose(zd.block(F2), -state.z2.block(F2))
    assert np.allclose(zd.center, state.z1.center - state.z2.center)


def test_diff_generator_accounting(rng):
    """The difference form gains exactly one generator per row classified
    (instable, positive), (positive, instable), or (instable, instable) with a
    nonzero appended magnitude, layer by layer."""
    for _ in range(10):
        net1 = random_net(rng, 3, [8, 8], 2)
        net2 = prune_by_weight_norm(net1, 0.2)
        z_in = compress_input_generators(
            box_to_zonotope(-np.ones(3), np.ones(3))
        )
        state = init_diff_state(z_in)
        expected = 0
        for l1, l2 in zip(net1.layers, net2.layers):
            state = affine_delta(state, l1.weights, l1.bias, l2.weights, l2.bias)
            if l1.activation is not Activation.RELU:
                continue
            # independent classification from interval arithmetic
            lo1, up1 = state.z1.lower_upper()
            lo2, up2 = state.z2.lower_upper()
            lod, upd = state.zdelta.lower_upper()

            def phase(lo, up, i):
                if up[i] < 0:
                    return "-"
                if lo[i] > 0:
                    return "+"
                return "~"

            for i in range(state.z1.dims):
                p1, p2 = phase(lo1, up1, i), phase(lo2, up2, i)
                if (p1, p2) in (("~", "+"), ("+", "~")):
                    expected += 1  # random bounds: mu' is never exactly zero
                elif (p1, p2) == ("~", "~") and 0.5 * max(-lod[i], upd[i]) > 0:
                    expected += 1
            state = relu_delta(state)
        assert state.zdelta.n_generators(DIFF) == expected
