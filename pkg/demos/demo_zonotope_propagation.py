"""Walk an input box through a small ReLU network as a zonotope.

Shows the three ingredients of the reachability layer: exact affine images,
the per-row ReLU relaxation with its fresh error generators, and interval
bounds that are guaranteed to contain every concrete output.
"""

import numpy as np

from verydiff.network import Activation, Layer, Network, evaluate
from verydiff.zonotope import GeneratorClass, box_to_zonotope

rng = np.random.default_rng(0)

net = Network(
    "demo",
    2,
    (
        Layer(rng.normal(0, 0.8, (4, 2)), rng.normal(0, 0.3, 4), Activation.RELU),
        Layer(rng.normal(0, 0.8, (2, 4)), rng.normal(0, 0.3, 2), Activation.LINEAR),
    ),
)

lower = np.array([-1.0, -0.5])
upper = np.array([1.0, 0.5])
z = box_to_zonotope(lower, upper)
print(f"input box  {lower} .. {upper}")
print(f"as zonotope: center {z.center}, {z.n_generators()} generators\n")

for i, layer in enumerate(net.layers):
    z = z.affine_transform(layer.weights, layer.bias)
    print(f"after affine stage {i}: bounds per row")
    lo, up = z.lower_upper()
    for r in range(z.dims):
        print(f"  row {r}: [{lo[r]:+.3f}, {up[r]:+.3f}]")
    if layer.activation is Activation.RELU:
        z, relaxations = z.relu_transform(GeneratorClass.F1_APPROX)
        phases = [r.phase.value for r in relaxations]
        fresh = sum(1 for r in relaxations if r.new_generator_magnitude > 0)
        print(f"after ReLU: phases {phases}, {fresh} fresh error generators")
    print()

lo, up = z.lower_upper()
print("output bounds:")
for r in range(z.dims):
    print(f"  row {r}: [{lo[r]:+.4f}, {up[r]:+.4f}]")

samples = rng.uniform(lower, upper, (20000, 2))
outputs = evaluate(net, samples)
print("\nempirical output range over 20000 samples (must nest inside):")
for r in range(z.dims):
    print(f"  row {r}: [{outputs[:, r].min():+.4f}, {outputs[:, r].max():+.4f}]")

inside = np.all((outputs >= lo - 1e-9) & (outputs <= up + 1e-9), axis=1)
print(f"\nall samples inside the certified bounds: {bool(inside.all())}")
