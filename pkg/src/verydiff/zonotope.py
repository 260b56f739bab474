"""Zonotopes over a tagged generator registry.

A zonotope is a center vector plus per-class blocks of generator columns; the
concretization is { c + sum_g eps_g * col_g : eps in [-1,1]^n }. Generator
classes tag the origin of each noise symbol (input box vs. ReLU relaxations of
either network vs. relaxations added directly to the difference form), and
column alignment by (class, ordinal) is what lets several zonotopes share the
same noise symbols.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class GeneratorClass(Enum):
    INPUT = "input"
    F1_APPROX = "f1_approx"
    F2_APPROX = "f2_approx"
    DIFF_APPROX = "diff_approx"


CLASS_ORDER = (
    GeneratorClass.INPUT,
    GeneratorClass.F1_APPROX,
    GeneratorClass.F2_APPROX,
    GeneratorClass.DIFF_APPROX,
)


@dataclass(frozen=True)
class GeneratorId:
    cls: GeneratorClass
    ordinal: int


class Phase(Enum):
    NEG = "neg"
    POS = "pos"
    INSTABLE = "instable"


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= x <= self.upper + tol


@dataclass(frozen=True)
class ReluRelaxation:
    """Per-row record of one ReLU transform.

    The transformed row is ``lam * old_row + center_shift`` plus, for instable
    rows, one fresh generator of ``new_generator_magnitude``. NEG rows have
    lam=0, POS rows lam=1, and only INSTABLE rows carry a nonzero magnitude.
    """

    phase: Phase
    lam: float
    new_generator_magnitude: float
    center_shift: float


def _normalize_blocks(dims: int, blocks: dict) -> dict:
    out = {}
    for cls in CLASS_ORDER:
        blk = blocks.get(cls)
        if blk is None:
            blk = np.zeros((dims, 0))
        else:
            blk = np.asarray(blk, dtype=float)
            if blk.ndim != 2 or blk.shape[0] != dims:
                raise ValueError(
                    f"{cls.value} block must be ({dims}, k), got {blk.shape}"
                )
        out[cls] = blk
    return out


class Zonotope:
    """Value type: all transformers return new instances."""

    def __init__(self, center: np.ndarray, blocks: dict | None = None):
        self.center = np.asarray(center, dtype=float)
        if self.center.ndim != 1:
            raise ValueError("center must be a vector")
        self.blocks = _normalize_blocks(self.dims, blocks or {})

    @property
    def dims(self) -> int:
        return self.center.shape[0]

    def n_generators(self, cls: GeneratorClass | None = None) -> int:
        if cls is not None:
            return self.blocks[cls].shape[1]
        return sum(b.shape[1] for b in self.blocks.values())

    def block(self, cls: GeneratorClass) -> np.ndarray:
        return self.blocks[cls]

    def generator_matrix(self, classes=CLASS_ORDER) -> np.ndarray:
        return np.hstack([self.blocks[cls] for cls in classes])

    def generator_ids(self, classes=CLASS_ORDER) -> list[GeneratorId]:
        """Column identities in class order; alignment across zonotopes that
        share noise symbols is by these (class, ordinal) pairs."""
        return [
            GeneratorId(cls, ordinal)
            for cls in classes
            for ordinal in range(self.blocks[cls].shape[1])
        ]

    def point(self, eps_by_class: dict) -> np.ndarray:
        """Evaluate c + G@eps for explicit noise values (missing classes = 0)."""
        x = self.center.copy()
        for cls, eps in eps_by_class.items():
            eps = np.asarray(eps, dtype=float)
            x = x + self.blocks[cls] @ eps
        return x

    # -- interval bounds ---------------------------------------------------

    def halfwidths(self) -> np.ndarray:
        return sum(np.abs(b).sum(axis=1) for b in self.blocks.values())

    def lower_upper(self) -> tuple[np.ndarray, np.ndarray]:
        w = self.halfwidths()
        return self.center - w, self.center + w

    def bounds(self, row: int) -> Interval:
        lo, up = self.lower_upper()
        return Interval(float(lo[row]), float(up[row]))

    # -- transformers ------------------------------------------------------

    def affine_transform(self, W: np.ndarray, b: np.ndarray) -> "Zonotope":
        """Exact image under x -> Wx + b, columnwise over the same generators."""
        W = np.asarray(W, dtype=float)
        b = np.asarray(b, dtype=float)
        if W.shape[1] != self.dims:
            raise ValueError(
                f"affine map expects {W.shape[1]} dims, zonotope has {self.dims}"
            )
        blocks = {cls: W @ blk for cls, blk in self.blocks.items()}
        return Zonotope(W @ self.center + b, blocks)

    def relu_transform(
        self, new_class: GeneratorClass
    ) -> tuple["Zonotope", list[ReluRelaxation]]:
        """Elementwise ReLU overapproximation.

        Rows with negative upper bound become zero, rows with positive lower
        bound pass through, and instable rows are scaled by lam = u/(u-l) and
        get one fresh generator of magnitude -lam*l/2 (appended to
        ``new_class``), with the center shifted by the same amount. Fresh
        generators of magnitude zero are not appended.
        """
        lo, up = self.lower_upper()
        m = self.dims
        scale = np.zeros(m)
        shift = np.zeros(m)
        relaxations: list[ReluRelaxation] = []
        fresh: list[tuple[int, float]] = []  # (row, magnitude)

        for i in range(m):
            if up[i] < 0.0:
                relaxations.append(ReluRelaxation(Phase.NEG, 0.0, 0.0, 0.0))
            elif lo[i] > 0.0:
                scale[i] = 1.0
                relaxations.append(ReluRelaxation(Phase.POS, 1.0, 0.0, 0.0))
            else:
                width = up[i] - lo[i]
                lam = up[i] / width if width > 0.0 else 0.0
                mu = -0.5 * lam * lo[i]
                scale[i] = lam
                shift[i] = mu
                if mu > 0.0:
                    fresh.append((i, mu))
                relaxations.append(ReluRelaxation(Phase.INSTABLE, lam, mu, mu))

        blocks = {cls: scale[:, None] * blk for cls, blk in self.blocks.items()}
        if fresh:
            cols = np.zeros((m, len(fresh)))
            for j, (row, mag) in enumerate(fresh):
                cols[row, j] = mag
            blocks[new_class] = np.hstack([blocks[new_class], cols])
        return Zonotope(scale * self.center + shift, blocks), relaxations

    def fix_input_generators(self, v: np.ndarray) -> "Zonotope":
        """Fold the first len(v) input generators into the center.

        Entries of v must lie in [-1, 1] (a 1e-9 slack absorbs round-off from
        computing coordinates as (x - c) / radius).
        """
        v = np.atleast_1d(np.asarray(v, dtype=float))
        e = self.blocks[GeneratorClass.INPUT]
        d = v.shape[0]
        if d > e.shape[1]:
            raise ValueError(
                f"cannot fix {d} input generators, only {e.shape[1]} present"
            )
        if np.any(np.abs(v) > 1.0 + 1e-9):
            raise ValueError("fixed generator values must lie in [-1, 1]")
        v = np.clip(v, -1.0, 1.0)
        blocks = dict(self.blocks)
        blocks[GeneratorClass.INPUT] = e[:, d:]
        return Zonotope(self.center + e[:, :d] @ v, blocks)


def box_to_zonotope(lower: np.ndarray, upper: np.ndarray) -> Zonotope:
    """Interval box as a zonotope: one input generator per dimension."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("lower/upper must be equal-length vectors")
    if np.any(lower > upper):
        bad = int(np.argmax(lower > upper))
        raise ValueError(f"box dimension {bad} has lower > upper")
    center = 0.5 * (lower + upper)
    radius = 0.5 * (upper - lower)
    return Zonotope(center, {GeneratorClass.INPUT: np.diag(radius)})


def compress_input_generators(z_in: Zonotope) -> Zonotope:
    """Drop input generators whose column is identically zero.

    Intended for input-box zonotopes, where zero columns correspond to
    zero-range dimensions; the described point set is unchanged.
    """
    e = z_in.block(GeneratorClass.INPUT)
    keep = np.abs(e).sum(axis=0) > 0.0
    blocks = dict(z_in.blocks)
    blocks[GeneratorClass.INPUT] = e[:, keep]
    return Zonotope(z_in.center, blocks)


def input_generator_dims(z_in: Zonotope) -> np.ndarray:
    """For an input-box zonotope, map each input generator to its dimension.

    Each column of the input block must touch exactly one dimension (true for
    box_to_zonotope output, compressed or not).
    """
    e = z_in.block(GeneratorClass.INPUT)
    if np.any((np.abs(e) > 0.0).sum(axis=0) != 1):
        raise ValueError("input block is not an axis-aligned box")
    return np.abs(e).argmax(axis=0)
