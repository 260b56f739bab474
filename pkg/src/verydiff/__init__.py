"""Equivalence verification for feed-forward ReLU networks.

Propagates a shared input zonotope through two networks in lock-step together
with a difference zonotope bounding their output gap, then certifies bounded
difference, Top-1 agreement, or confidence-gated Top-1 agreement via interval
bounds and linear programming, refining by input splitting when needed.
"""

from .diffzono import DiffState, Mode, reach_delta
from .network import Activation, Layer, Network, evaluate, pad_to_common_shape, prune_by_weight_norm
from .properties import PropertyKind, PropertySpec, check_property, validate_candidate
from .refine import Budget, VerificationResult, VerificationStatus, verify
from .zonotope import GeneratorClass, Zonotope, box_to_zonotope

__all__ = [
    "Activation",
    "Budget",
    "DiffState",
    "GeneratorClass",
    "Layer",
    "Mode",
    "Network",
    "PropertyKind",
    "PropertySpec",
    "VerificationResult",
    "VerificationStatus",
    "Zonotope",
    "box_to_zonotope",
    "check_property",
    "evaluate",
    "pad_to_common_shape",
    "prune_by_weight_norm",
    "reach_delta",
    "validate_candidate",
    "verify",
]

__version__ = "0.1.0"
