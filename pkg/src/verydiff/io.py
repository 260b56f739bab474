"""JSON serialization for networks, queries, and results, plus the bench CSV.

Floats pass through Python's shortest-round-trip repr, so save/load cycles
reproduce weights bit for bit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diffzono import Mode
from .network import Activation, Layer, Network
from .properties import PropertyKind, PropertySpec
from .refine import Counterexample, VerificationResult, VerificationStats


class ParseError(ValueError):
    pass


# -- networks -----------------------------------------------------------------


def network_to_dict(net: Network) -> dict:
    return {
        "name": net.name,
        "input_dim": net.input_dim,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation.value,
            }
            for layer in net.layers
        ],
    }


def network_from_dict(data: dict) -> Network:
    for key in ("name", "input_dim", "layers"):
        if key not in data:
            raise ParseError(f"network is missing field '{key}'")
    layers = []
    for i, entry in enumerate(data["layers"]):
        for key in ("weights", "bias", "activation"):
            if key not in entry:
                raise ParseError(f"layer {i} is missing field '{key}'")
        try:
            activation = Activation(entry["activation"])
        except ValueError:
            raise ParseError(
                f"layer {i}: activation must be 'relu' or 'linear', "
                f"got {entry['activation']!r}"
            ) from None
        try:
            layers.append(
                Layer(np.array(entry["weights"], dtype=float),
                      np.array(entry["bias"], dtype=float),
                      activation)
            )
        except ValueError as exc:
            raise ParseError(f"layer {i}: {exc}") from None
    try:
        return Network(str(data["name"]), int(data["input_dim"]), tuple(layers))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def load_network(path) -> Network:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON ({exc})") from None
    return network_from_dict(data)


def save_network(net: Network, path) -> None:
    Path(path).write_text(
        json.dumps(network_to_dict(net), indent=2) + "\n", encoding="utf-8"
    )


# -- queries -------------------------------------------------------------------


@dataclass(frozen=True)
class QuerySpec:
    property: PropertySpec
    lower: np.ndarray
    upper: np.ndarray
    timeout_s: float = 60.0
    max_splits: int = 10000
    mode: Mode = Mode.DIFF


def parse_input_box(data: dict) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper vectors from an {"input": ...} envelope (either the
    center/radius or the lower/upper form, never both)."""
    spec = data.get("input")
    if spec is None:
        raise ParseError("query is missing field 'input'")
    has_cr = "center" in spec or "radius" in spec
    has_lu = "lower" in spec or "upper" in spec
    if has_cr and has_lu:
        raise ParseError("field 'input' must use either center/radius or lower/upper, not both")
    if has_cr:
        if "center" not in spec or "radius" not in spec:
            raise ParseError("field 'input' needs both 'center' and 'radius'")
        center = np.array(spec["center"], dtype=float)
        radius = np.array(spec["radius"], dtype=float)
        if center.shape != radius.shape:
            raise ParseError("fields 'center' and 'radius' must have equal length")
        if np.any(radius < 0.0):
            raise ParseError("field 'radius' must be nonnegative")
        return center - radius, center + radius
    if has_lu:
        if "lower" not in spec or "upper" not in spec:
            raise ParseError("field 'input' needs both 'lower' and 'upper'")
        lower = np.array(spec["lower"], dtype=float)
        upper = np.array(spec["upper"], dtype=float)
        if lower.shape != upper.shape:
            raise ParseError("fields 'lower' and 'upper' must have equal length")
        if np.any(lower > upper):
            raise ParseError("field 'lower' exceeds 'upper' in some dimension")
        return lower, upper
    raise ParseError("field 'input' needs center/radius or lower/upper")


def _parse_property(data: dict) -> PropertySpec:
    name = data.get("property")
    if name is None:
        raise ParseError("query is missing field 'property'")
    try:
        kind = PropertyKind(name)
    except ValueError:
        raise ParseError(
            f"field 'property' must be one of epsilon/top1/delta_top1, got {name!r}"
        ) from None
    epsilon = data.get("epsilon")
    delta = data.get("delta")
    if kind is PropertyKind.DELTA_TOP1 and delta is not None and delta >= 1.0:
        raise ParseError(
            "field 'delta' must be < 1: the required margin ln(delta/(1-delta)) "
            "is undefined at delta = 1"
        )
    try:
        return PropertySpec(kind, epsilon=epsilon, delta=delta)
    except ValueError as exc:
        field = "epsilon" if kind is PropertyKind.EPSILON else "delta"
        raise ParseError(f"field '{field}': {exc}") from None


def query_from_dict(data: dict) -> QuerySpec:
    prop = _parse_property(data)
    lower, upper = parse_input_box(data)
    mode_name = data.get("mode", "diff")
    try:
        mode = Mode(mode_name)
    except ValueError:
        raise ParseError(f"field 'mode' must be 'diff' or 'naive', got {mode_name!r}") from None
    timeout_s = float(data.get("timeout_s", 60.0))
    max_splits = int(data.get("max_splits", 10000))
    if timeout_s <= 0:
        raise ParseError("field 'timeout_s' must be positive")
    if max_splits <= 0:
        raise ParseError("field 'max_splits' must be positive")
    return QuerySpec(prop, lower, upper, timeout_s, max_splits, mode)


def load_query(path) -> QuerySpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON ({exc})") from None
    return query_from_dict(data)


# -- results -------------------------------------------------------------------


def result_to_dict(result: VerificationResult) -> dict:
    cex = None
    if result.counterexample is not None:
        c = result.counterexample
        cex = {
            "input": np.asarray(c.input).tolist(),
            "f1_output": np.asarray(c.f1_output).tolist(),
            "f2_output": np.asarray(c.f2_output).tolist(),
            "detail": c.detail,
        }
    return {
        "status": result.status,
        "counterexample": cex,
        "splits": result.stats.splits,
        "lp_calls": result.stats.lp_calls,
        "time_s": result.stats.wall_time_seconds,
        "verified_volume_fraction": result.stats.verified_box_volume_fraction,
    }


def result_from_dict(data: dict) -> VerificationResult:
    cex = None
    if data.get("counterexample") is not None:
        c = data["counterexample"]
        cex = Counterexample(
            np.array(c["input"], dtype=float),
            np.array(c["f1_output"], dtype=float),
            np.array(c["f2_output"], dtype=float),
            c["detail"],
        )
    stats = VerificationStats(
        splits=int(data["splits"]),
        lp_calls=int(data["lp_calls"]),
        wall_time_seconds=float(data["time_s"]),
        verified_box_volume_fraction=float(data["verified_volume_fraction"]),
    )
    return VerificationResult(data["status"], cex, stats)


def write_result(result: VerificationResult, path) -> None:
    Path(path).write_text(
        json.dumps(result_to_dict(result), indent=2) + "\n", encoding="utf-8"
    )


# -- bench CSV ------------------------------------------------------------------

BENCH_COLUMNS = (
    "query_id",
    "net1",
    "net2",
    "property",
    "param",
    "mode",
    "status",
    "splits",
    "lp_calls",
    "time_s",
)


def write_bench_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({col: row.get(col, "") for col in BENCH_COLUMNS})


def read_bench_csv(path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))
