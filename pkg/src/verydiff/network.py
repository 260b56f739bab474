"""Feed-forward ReLU networks: representation, evaluation, padding, pruning."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Activation(Enum):
    RELU = "relu"
    LINEAR = "linear"


@dataclass(frozen=True)
class Layer:
    """One affine stage followed by an elementwise activation.

    ``weights`` has shape (out_dim, in_dim), ``bias`` shape (out_dim,).
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: Activation

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.bias, dtype=float)
        if w.ndim != 2:
            raise ValueError(f"layer weights must be a matrix, got ndim={w.ndim}")
        if b.ndim != 1:
            raise ValueError(f"layer bias must be a vector, got ndim={b.ndim}")
        if w.shape[0] != b.shape[0]:
            raise ValueError(
                f"layer weights rows ({w.shape[0]}) != bias length ({b.shape[0]})"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class Network:
    """Layered affine + activation model, immutable after construction.

    The last layer must be LINEAR; layer i's input width must match
    layer i-1's output width (or ``input_dim`` for the first layer).
    """

    name: str
    input_dim: int
    layers: tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.input_dim <= 0:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if not self.layers:
            raise ValueError("network needs at least one layer")
        prev = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.in_dim != prev:
                raise ValueError(
                    f"layer {i}: expected {prev} input columns, got {layer.in_dim}"
                )
            prev = layer.out_dim
        if self.layers[-1].activation is not Activation.LINEAR:
            raise ValueError("last layer must have LINEAR activation")

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)


def evaluate(net: Network, x: np.ndarray) -> np.ndarray:
    """Forward pass; accepts a single input (I,) or a batch (N, I)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.shape[-1] != net.input_dim:
        raise ValueError(
            f"input has {x.shape[-1]} entries, network expects {net.input_dim}"
        )
    h = x if not single else x[None, :]
    for layer in net.layers:
        h = h @ layer.weights.T + layer.bias
        if layer.activation is Activation.RELU:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def evaluate_prefix(net: Network, x: np.ndarray, i: int) -> np.ndarray:
    """Result of the first ``i`` layers; i=0 is the input, i=depth the output."""
    if not 0 <= i <= net.depth:
        raise ValueError(f"layer index {i} out of range [0, {net.depth}]")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ValueError(
            f"input has {x.shape[-1]} entries, network expects {net.input_dim}"
        )
    h = x
    for layer in net.layers[:i]:
        h = h @ layer.weights.T + layer.bias
        if layer.activation is Activation.RELU:
            h = np.maximum(h, 0.0)
    return h


def prune_by_weight_norm(net: Network, fraction: float) -> Network:
    """Zero out the weakest hidden RELU neurons, keeping the architecture.

    Neurons are ranked by the L1 norm of their incoming weight row plus the
    absolute bias; the lowest ``floor(fraction * H)`` of the H RELU neurons get
    their incoming row, bias entry, and outgoing column set to zero. Ties break
    by (layer index, neuron index).
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"pruning fraction must be in [0, 1), got {fraction}")
    relu_layers = [i for i, l in enumerate(net.layers) if l.activation is Activation.RELU]
    if not relu_layers:
        raise ValueError("network has no hidden RELU layer to prune")

    scores = []
    for li in relu_layers:
        layer = net.layers[li]
        norms = np.abs(layer.weights).sum(axis=1) + np.abs(layer.bias)
        for ni in range(layer.out_dim):
            scores.append((norms[ni], li, ni))
    scores.sort()

    total = len(scores)
    n_prune = int(np.floor(fraction * total))
    victims = scores[:n_prune]

    weights = [l.weights.copy() for l in net.layers]
    biases = [l.bias.copy() for l in net.layers]
    for _, li, ni in victims:
        weights[li][ni, :] = 0.0
        biases[li][ni] = 0.0
        if li + 1 < net.depth:
            weights[li + 1][:, ni] = 0.0

    layers = [
        Layer(w, b, l.activation)
        for w, b, l in zip(weights, biases, net.layers)
    ]
    return Network(f"{net.name}_pruned{fraction:g}", net.input_dim, tuple(layers))


def pad_to_common_shape(net1: Network, net2: Network) -> tuple[Network, Network]:
    """Widen both networks with zero rows/columns until layer widths match.

    Padding neurons have zero incoming weights, zero bias, and zero outgoing
    columns, so both networks evaluate unchanged.
    """
    if net1.depth != net2.depth:
        raise ValueError(
            f"incompatible architectures: depth {net1.depth} vs {net2.depth}"
        )
    if net1.input_dim != net2.input_dim or net1.output_dim != net2.output_dim:
        raise ValueError(
            "incompatible architectures: input/output dimensions differ "
            f"({net1.input_dim}->{net1.output_dim} vs {net2.input_dim}->{net2.output_dim})"
        )

    def pad(net: Network, widths: list[int]) -> Network:
        layers = []
        prev = net.input_dim
        for layer, w_target in zip(net.layers, widths):
            rows, cols = layer.weights.shape
            w = np.zeros((w_target, prev))
            w[:rows, :cols] = layer.weights
            b = np.zeros(w_target)
            b[:rows] = layer.bias
            layers.append(Layer(w, b, layer.activation))
            prev = w_target
        return Network(net.name, net.input_dim, tuple(layers))

    widths = [
        max(l1.out_dim, l2.out_dim) for l1, l2 in zip(net1.layers, net2.layers)
    ]
    widths[-1] = net1.output_dim  # equal already; never pad the output layer
    for l1, l2 in zip(net1.layers, net2.layers):
        if l1.activation is not l2.activation:
            raise ValueError("incompatible architectures: activation mismatch")
    if net1.layers[-1].out_dim != widths[-1] or net2.layers[-1].out_dim != widths[-1]:
        raise ValueError("incompatible architectures: output layer width mismatch")
    return pad(net1, widths), pad(net2, widths)
