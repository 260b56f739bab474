"""Lock-step difference bounds vs. naive subtraction of output zonotopes.

A pruned copy of a network differs from the original by a few zeroed neurons.
Subtracting the two independently-propagated output zonotopes bounds that
difference, but the bound inherits both networks' full relaxation noise.
Propagating a dedicated difference zonotope in lock-step keeps the shared
structure and stays dramatically tighter as the input region grows.
"""

import numpy as np

from verydiff.diffzono import Mode, reach_delta
from verydiff.network import Activation, Layer, Network, evaluate, prune_by_weight_norm
from verydiff.zonotope import box_to_zonotope, compress_input_generators


def random_net(rng, input_dim, widths, output_dim, name="net"):
    layers, prev = [], input_dim
    for w in widths:
        layers.append(Layer(rng.normal(0, 1 / np.sqrt(prev), (w, prev)),
                            rng.normal(0, 0.5, w), Activation.RELU))
        prev = w
    layers.append(Layer(rng.normal(0, 1 / np.sqrt(prev), (output_dim, prev)),
                        rng.normal(0, 0.5, output_dim), Activation.LINEAR))
    return Network(name, input_dim, tuple(layers))

rng = np.random.default_rng(42)
net1 = random_net(rng, 16, [20, 20], 5, name="reference")
net2 = prune_by_weight_norm(net1, 0.05)
print("reference: 16 -> 20 -> 20 -> 5, second network = 5% magnitude-pruned\n")

center = rng.uniform(-0.5, 0.5, 16)
print(f"{'radius':>8} | {'lock-step width':>16} | {'naive width':>12} | {'true width':>11}")
for radius in (0.01, 0.05, 0.1, 0.2, 0.4):
    box_lo, box_hi = center - radius, center + radius
    z_in = compress_input_generators(box_to_zonotope(box_lo, box_hi))

    widths = {}
    for mode in (Mode.DIFF, Mode.NAIVE):
        state = reach_delta(net1, net2, z_in, mode)
        lo, up = state.zdelta.lower_upper()
        widths[mode] = np.median(up - lo)

    xs = rng.uniform(box_lo, box_hi, (4000, 16))
    gap = evaluate(net1, xs) - evaluate(net2, xs)
    true_width = np.median(gap.max(axis=0) - gap.min(axis=0))

    print(
        f"{radius:8.2f} | {widths[Mode.DIFF]:16.4f} | "
        f"{widths[Mode.NAIVE]:12.4f} | {true_width:11.4f}"
    )

print(
    "\nThe naive width blows up with the relaxation noise of both networks;"
    "\nthe lock-step form tracks the true difference much more closely."
)
