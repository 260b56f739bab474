"""End-to-end verification runs for the three equivalence properties.

Covers: proving bounded output difference on a pruned pair, refuting it with
a concrete counterexample after an output shift, and confidence-gated Top-1
agreement where only high-confidence inputs are obligated.
"""

import numpy as np

from verydiff.diffzono import Mode
from verydiff.network import Activation, Layer, Network, evaluate, prune_by_weight_norm
from verydiff.properties import PropertyKind, PropertySpec, softmax
from verydiff.refine import Budget, verify


def random_net(rng, input_dim, widths, output_dim, name="net"):
    layers, prev = [], input_dim
    for w in widths:
        layers.append(Layer(rng.normal(0, 1 / np.sqrt(prev), (w, prev)),
                            rng.normal(0, 0.5, w), Activation.RELU))
        prev = w
    layers.append(Layer(rng.normal(0, 1 / np.sqrt(prev), (output_dim, prev)),
                        rng.normal(0, 0.5, output_dim), Activation.LINEAR))
    return Network(name, input_dim, tuple(layers))


def show(tag, result):
    stats = result.stats
    print(
        f"{tag}: {result.status}  "
        f"(splits {stats.splits}, LP calls {stats.lp_calls}, "
        f"certified volume {stats.verified_box_volume_fraction:.3f}, "
        f"{stats.wall_time_seconds:.2f}s)"
    )
    if result.counterexample is not None:
        c = result.counterexample
        print(f"    counterexample x = {np.round(c.input, 4)}")
        print(f"    f1(x) = {np.round(c.f1_output, 4)}")
        print(f"    f2(x) = {np.round(c.f2_output, 4)}  [{c.detail}]")


rng = np.random.default_rng(3)
net1 = random_net(rng, 4, [12, 12], 3, name="reference")
net2 = prune_by_weight_norm(net1, 0.1)
box = (np.full(4, -0.6), np.full(4, 0.6))
budget = Budget(timeout_seconds=60.0, max_splits=1000)

print("== bounded output difference on a 10%-pruned pair ==")
show("eps = 1.0 ", verify(net1, net2, PropertySpec(PropertyKind.EPSILON, epsilon=1.0), box, budget))
show("eps = 0.05", verify(net1, net2, PropertySpec(PropertyKind.EPSILON, epsilon=0.05), box, budget))

print("\n== refutation: second network shifted on output 0 ==")
last = net1.layers[-1]
shifted = Network(
    "shifted", 4,
    net1.layers[:-1] + (Layer(last.weights, last.bias + np.array([3.0, 0, 0]),
                              Activation.LINEAR),),
)
show("eps = 1.0 ", verify(net1, shifted, PropertySpec(PropertyKind.EPSILON, epsilon=1.0), box, budget))

print("\n== confidence-gated agreement (delta-Top-1) ==")
for delta in (0.9, 0.99):
    spec = PropertySpec(PropertyKind.DELTA_TOP1, delta=delta)
    for mode in (Mode.DIFF, Mode.NAIVE):
        show(f"delta={delta}, {mode.value:5}", verify(net1, net2, spec, box, budget, mode))

print("\nconfidence profile of the reference network on the box:")
xs = rng.uniform(box[0], box[1], (10000, 4))
conf = softmax(evaluate(net1, xs)).max(axis=1)
for q in (0.1, 0.5, 0.9):
    print(f"  {int(q*100):2d}th percentile max-softmax: {np.quantile(conf, q):.3f}")
