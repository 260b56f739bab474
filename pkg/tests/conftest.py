import numpy as np
import pytest

from verydiff.diffzono import DIFF, F1, F2, INPUT
from verydiff.network import Activation, Layer, Network, evaluate
from verydiff.zonotope import input_generator_dims


def random_net(rng, input_dim, widths, output_dim, name="rnd", weight_scale=1.0):
    """Gaussian-initialized ReLU network with a linear output layer."""
    layers, prev = [], input_dim
    for w in widths:
        layers.append(
            Layer(
                rng.normal(0.0, weight_scale / np.sqrt(prev), (w, prev)),
                rng.normal(0.0, 0.5, w),
                Activation.RELU,
            )
        )
        prev = w
    layers.append(
        Layer(
            rng.normal(0.0, weight_scale / np.sqrt(prev), (output_dim, prev)),
            rng.normal(0.0, 0.5, output_dim),
            Activation.LINEAR,
        )
    )
    return Network(name, input_dim, tuple(layers))


def linear_net(W, b, name="lin"):
    """Single linear-layer network."""
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    return Network(name, W.shape[1], (Layer(W, b, Activation.LINEAR),))


def input_coords(z_in, X):
    """Generator coordinates of concrete inputs w.r.t. a (compressed) box."""
    e = z_in.block(INPUT)
    dims = input_generator_dims(z_in)
    radii = np.abs(e).max(axis=0)
    return (X[:, dims] - z_in.center[dims]) / radii


def containment_violation(state, net1, net2, X):
    """Worst excess of f1, f2, f1-f2 over the partially-fixed row intervals,
    relative to max(1, |value|)."""
    V = input_coords(state.z_in, X)
    fx1 = evaluate(net1, X)
    fx2 = evaluate(net2, X)
    worst = 0.0
    for z, values in ((state.z1, fx1), (state.z2, fx2), (state.zdelta, fx1 - fx2)):
        centers = z.center[None, :] + V @ z.block(INPUT).T
        slack = sum(np.abs(z.block(cls)).sum(axis=1) for cls in (F1, F2, DIFF))
        scale = np.maximum(1.0, np.abs(values))
        worst = max(
            worst,
            float(((values - (centers + slack)) / scale).max()),
            float((((centers - slack) - values) / scale).max()),
        )
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
