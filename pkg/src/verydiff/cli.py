"""Command-line entry points: verify, prune, bench, softmax-error.

Exit codes: 0 equivalent, 1 not equivalent, 2 unknown, 3 usage/parse/runtime
error. VERYDIFF_LOG in {error, info, debug} controls stderr verbosity.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import logging
import os
import statistics
import sys
import time

import numpy as np

from . import io as vio
from .diffzono import Mode
from .network import prune_by_weight_norm
from .properties import (
    PropertyKind,
    PropertySpec,
    softmax_poly_error,
    softmax_sigmoid_error,
)
from .refine import Budget, VerificationStatus, verify

log = logging.getLogger("verydiff")

_EXIT_BY_STATUS = {
    VerificationStatus.EQUIVALENT: 0,
    VerificationStatus.NOT_EQUIVALENT: 1,
    VerificationStatus.UNKNOWN: 2,
}


def _setup_logging() -> None:
    level = os.environ.get("VERYDIFF_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(
        level=levels.get(level, logging.ERROR),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def cmd_verify(args) -> int:
    net1 = vio.load_network(args.net1)
    net2 = vio.load_network(args.net2)
    query = vio.load_query(args.query)

    prop = query.property
    if args.property or args.epsilon is not None or args.delta is not None:
        kind = PropertyKind(args.property) if args.property else prop.kind
        epsilon = args.epsilon if args.epsilon is not None else prop.epsilon
        delta = args.delta if args.delta is not None else prop.delta
        prop = PropertySpec(kind, epsilon=epsilon, delta=delta)
    mode = Mode(args.mode) if args.mode else query.mode
    timeout = args.timeout if args.timeout is not None else query.timeout_s
    max_splits = args.max_splits if args.max_splits is not None else query.max_splits

    result = verify(
        net1,
        net2,
        prop,
        (query.lower, query.upper),
        Budget(timeout, max_splits),
        mode,
    )
    log.info(
        "verify: %s after %d splits, %d LP calls, %.3fs",
        result.status,
        result.stats.splits,
        result.stats.lp_calls,
        result.stats.wall_time_seconds,
    )
    if args.out:
        vio.write_result(result, args.out)
    else:
        json.dump(vio.result_to_dict(result), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return _EXIT_BY_STATUS[result.status]


def cmd_prune(args) -> int:
    net = vio.load_network(args.net)
    pruned = prune_by_weight_norm(net, args.fraction)
    vio.save_network(pruned, args.out)
    log.info("pruned %s by %g into %s", args.net, args.fraction, args.out)
    return 0


def _plan_property(entry: dict) -> PropertySpec:
    kind = PropertyKind(entry["property"])
    return PropertySpec(kind, epsilon=entry.get("epsilon"), delta=entry.get("delta"))


def _plan_cells(plan: dict, seed: int) -> list[dict]:
    """Deterministic cross-product enumeration of a bench plan."""
    networks = plan.get("networks")
    if not networks:
        raise vio.ParseError("bench plan is missing field 'networks'")
    fractions = plan.get("fractions", [0.0])
    props = plan.get("properties")
    if not props:
        raise vio.ParseError("bench plan is missing field 'properties'")
    boxes = list(plan.get("boxes", []))
    if "random_boxes" in plan:
        rng = np.random.default_rng(seed)
        spec = plan["random_boxes"]
        first = vio.load_network(networks[0])
        for _ in range(int(spec["count"])):
            center = rng.uniform(-1.0, 1.0, size=first.input_dim)
            boxes.append(
                {"center": center.tolist(),
                 "radius": [float(spec["radius"])] * first.input_dim}
            )
    if not boxes:
        raise vio.ParseError("bench plan needs 'boxes' or 'random_boxes'")

    cells = []
    idx = 0
    for net_path in networks:
        for fraction in fractions:
            for prop in props:
                for box in boxes:
                    for mode in ("diff", "naive"):
                        cells.append(
                            {
                                "query_id": f"q{idx:04d}",
                                "net": net_path,
                                "fraction": float(fraction),
                                "property": prop,
                                "box": box,
                                "mode": mode,
                                "timeout_s": float(plan.get("timeout_s", 60.0)),
                                "max_splits": int(plan.get("max_splits", 10000)),
                            }
                        )
                        idx += 1
    return cells


def _run_cell(cell: dict) -> dict:
    prop = _plan_property(cell["property"])
    row = {
        "query_id": cell["query_id"],
        "net1": cell["net"],
        "net2": f"{cell['net']}#pruned{cell['fraction']:g}",
        "property": prop.kind.value,
        "param": "" if prop.param() is None else repr(prop.param()),
        "mode": cell["mode"],
    }
    try:
        net1 = vio.load_network(cell["net"])
        net2 = prune_by_weight_norm(net1, cell["fraction"])
        lower, upper = vio.parse_input_box({"input": cell["box"]})
        t0 = time.monotonic()
        result = verify(
            net1,
            net2,
            prop,
            (lower, upper),
            Budget(cell["timeout_s"], cell["max_splits"]),
            Mode(cell["mode"]),
        )
        row.update(
            status=result.status,
            splits=result.stats.splits,
            lp_calls=result.stats.lp_calls,
            time_s=f"{time.monotonic() - t0:.6f}",
        )
    except Exception as exc:  # a failing cell must not kill the run
        log.error("cell %s failed: %s", cell["query_id"], exc)
        row.update(status="ERROR", splits="", lp_calls="", time_s="")
    return row


def _bench_summary(rows: list[dict]) -> dict:
    """Per-mode solved counts plus the median naive/diff time ratio over cells
    both modes solved. Cells pair up by query index (diff/naive adjacent)."""
    solved = {"diff": 0, "naive": 0}
    by_pair: dict[int, dict[str, dict]] = {}
    for row in rows:
        if row["status"] in ("EQUIVALENT", "NOT_EQUIVALENT"):
            solved[row["mode"]] += 1
        by_pair.setdefault(int(row["query_id"][1:]) // 2, {})[row["mode"]] = row
    speedups = []
    for pair in by_pair.values():
        d, n = pair.get("diff"), pair.get("naive")
        if d is None or n is None:
            continue
        if (
            d["status"] in ("EQUIVALENT", "NOT_EQUIVALENT")
            and n["status"] in ("EQUIVALENT", "NOT_EQUIVALENT")
            and float(d["time_s"]) > 0
        ):
            speedups.append(float(n["time_s"]) / float(d["time_s"]))
    return {
        "solved_diff": solved["diff"],
        "solved_naive": solved["naive"],
        "commonly_solved": len(speedups),
        "median_speedup": statistics.median(speedups) if speedups else None,
    }


def cmd_bench(args) -> int:
    try:
        plan = json.loads(open(args.plan, encoding="utf-8").read())
    except json.JSONDecodeError as exc:
        raise vio.ParseError(f"{args.plan}: malformed JSON ({exc})") from None
    cells = _plan_cells(plan, args.seed)
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(cell) for cell in cells]
    vio.write_bench_csv(rows, args.out)
    summary = _bench_summary(rows)
    print(
        "bench summary: diff solved {solved_diff}, naive solved {solved_naive}, "
        "commonly solved {commonly_solved}, median speedup {median_speedup}".format(
            **summary
        ),
        file=sys.stderr,
    )
    return 0


def cmd_softmax_error(args) -> int:
    n_list = [int(s) for s in args.n_list.split(",") if s]
    if not n_list or any(n < 2 for n in n_list):
        raise ValueError("--n-list entries must all be >= 2")
    if args.upsilon < 0:
        raise ValueError("--upsilon must be >= 0")
    # log-spaced in 1-delta, from 0.5 down to 1e-7
    gaps = np.logspace(np.log10(0.5), -7.0, 200)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["delta", "n", "eps_poly", "eps_sig"])
        for n in n_list:
            for gap in gaps:
                delta = 1.0 - float(gap)
                writer.writerow(
                    [
                        repr(delta),
                        n,
                        repr(float(softmax_poly_error(n, delta))),
                        repr(float(softmax_sigmoid_error(n, args.upsilon))),
                    ]
                )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="verydiff",
        description="Prove or refute equivalence of feed-forward ReLU networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="verify equivalence of two networks")
    p.add_argument("--net1", required=True)
    p.add_argument("--net2", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--property", choices=[k.value for k in PropertyKind])
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--timeout", type=float)
    p.add_argument("--max-splits", type=int, dest="max_splits")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("prune", help="magnitude-prune a network")
    p.add_argument("--net", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("bench", help="run a diff-vs-naive benchmark plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser(
        "softmax-error", help="emit approximation-error curves over a delta grid"
    )
    p.add_argument("--n-list", default="3,5,10", dest="n_list")
    p.add_argument("--upsilon", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_softmax_error)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (vio.ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
