"""Experiment harness: subcommand dispatch, JSON I/O, deterministic runs.

Every subcommand reads and writes JSON with sorted keys, so a fixed
(config, seed) pair produces byte-identical artifacts on one platform.
Exit codes: 0 success, 1 precondition or input error, 2 budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from corners_lab import oracle_suite
from corners_lab.bohr import BohrSpec, bohr_report
from corners_lab.corners import Subset2D, ap3_free, behrend_set, count_corners, extremal_search
from corners_lab.errors import BudgetExhaustedError, ConstantsInfeasibleError, PreconditionError
from corners_lab.groups import GroupSpec
from corners_lab.increment import ConstantsConfig, iteration_driver
from corners_lab.uniformity import rect_alpha_uniform

SCHEMAS = {
    "subset2d": {
        "type": "object",
        "required": ["mode", "shape", "bits"],
        "properties": {
            "mode": {"enum": ["group", "grid"]},
            "shape": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "bits": {"type": "string", "description": "base64 of the row-major membership bitset"},
        },
    },
    "subset1d": {
        "type": "object",
        "required": ["mode", "shape", "arity", "bits"],
        "properties": {
            "mode": {"enum": ["group", "grid"]},
            "shape": {"type": "array", "items": {"type": "integer", "minimum": 1}},
            "arity": {"const": 1},
            "bits": {"type": "string"},
        },
    },
    "group": {"type": "object", "required": ["factors"], "properties": {"factors": {"type": "array"}}},
    "bohr_report": {
        "type": "object",
        "required": ["size", "lower_bound", "regular", "plus_size", "minus_size", "dimension", "eps"],
    },
    "uniformity_report": {
        "type": "object",
        "required": ["alpha_bias", "box_norm4", "rect_ratio", "verdicts"],
    },
    "extremal_result": {
        "type": "object",
        "required": ["n", "mode", "max_size", "witness", "nodes_explored", "optimal"],
    },
    "behrend": {"type": "object", "required": ["n", "size", "set"]},
    "increment_trace": {
        "type": "object",
        "required": ["schema_version", "config", "final_verdict", "steps"],
        "properties": {"schema_version": {"const": 1}},
    },
    "constants_config": {
        "type": "object",
        "properties": {
            "preset": {"enum": ["desk", "paper"]},
            "alpha": {"type": ["number", "null"]},
            "alpha0": {"type": ["number", "null"]},
            "alpha1": {"type": "number"},
            "kappa": {"type": "number"},
            "max_steps": {"type": "integer"},
            "min_density_gain": {"type": ["number", "null"]},
            "seed": {"type": "integer"},
        },
    },
    "oracle_suite_report": {
        "type": "object",
        "required": ["checks", "all_pass"],
        "properties": {"checks": {"type": "array"}},
    },
}


def worker_cap() -> int:
    """Upper bound on workers from CORNERS_LAB_THREADS (engines are
    currently single-threaded, so the cap is recorded, never exceeded)."""
    raw = os.environ.get("CORNERS_LAB_THREADS")
    if raw is None:
        return 1
    cap = int(raw)
    if cap < 1:
        raise PreconditionError("CORNERS_LAB_THREADS must be at least 1")
    return cap


def dump_json(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise PreconditionError(f"cannot read JSON input {path}: {err}") from err


def mask_to_json(mask: np.ndarray, mode: str, shape: list[int]) -> dict:
    import base64

    packed = np.packbits(np.asarray(mask, dtype=bool))
    return {"mode": mode, "shape": shape, "arity": 1, "bits": base64.b64encode(packed.tobytes()).decode("ascii")}


def mask_from_json(data: dict) -> np.ndarray:
    import base64
    import math

    n = math.prod(data["shape"])
    raw = np.frombuffer(base64.b64decode(data["bits"]), dtype=np.uint8)
    return np.unpackbits(raw, count=n).astype(bool)


def parse_chars(group: GroupSpec, text: str):
    """Character list: comma-separated indices or colon-joined coords."""
    chars = []
    if not text.strip():
        return tuple(chars)
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            coords = [int(c) for c in part.split(":")]
            chars.append(group.character(coords))
        else:
            chars.append(group.character_by_index(int(part)))
    return tuple(chars)


def write_trajectory_svg(densities: list[float], path: str) -> None:
    """Static density-vs-step polyline, written without plotting deps so
    the bytes are reproducible."""
    width, height, pad = 480, 320, 40
    n = max(len(densities), 1)
    xs = [pad + (width - 2 * pad) * (i / max(n - 1, 1)) for i in range(n)]
    ys = [height - pad - (height - 2 * pad) * min(max(d, 0.0), 1.0) for d in densities]
    points = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    marks = "".join(
        f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="#1f6feb"/>' for x, y in zip(xs, ys)
    )
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
        f'<rect width="{width}" height="{height}" fill="white"/>'
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>'
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>'
        f'<text x="{width // 2}" y="{height - 8}" font-size="12" text-anchor="middle">step</text>'
        f'<text x="12" y="{height // 2}" font-size="12" transform="rotate(-90 12 {height // 2})" '
        f'text-anchor="middle">density</text>'
        f'<polyline points="{points}" fill="none" stroke="#1f6feb" stroke-width="2"/>'
        f"{marks}</svg>\n"
    )
    Path(path).write_text(svg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corners-lab", description=__doc__)
    parser.add_argument("--schema", action="store_true", help="dump all JSON schemas and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("corner-count", help="count corners of a planar set")
    p.add_argument("--input", required=True)
    p.add_argument("--d-policy", choices=["nonzero", "positive"], default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("box-norm", help="rectilinear uniformity report for A inside E1 x E2")
    p.add_argument("--input", required=True)
    p.add_argument("--e1", required=True)
    p.add_argument("--e2", required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--out", default=None)

    p = sub.add_parser("bohr-explore", help="size/regularity report of a Bohr set")
    p.add_argument("--group", required=True)
    p.add_argument("--chars", default="")
    p.add_argument("--eps", required=True)
    p.add_argument("--kappa", default="0.125")
    p.add_argument("--out", default=None)

    p = sub.add_parser("lname-oracle", help="largest corner-free subset of a small frame")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=["grid", "group"], default="grid")
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("behrend", help="progression-free subset of {1..N}")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--verify", action="store_true")
    p.add_argument("--out", default=None)

    p = sub.add_parser("increment-run", help="run the density-increment driver")
    p.add_argument("--input", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trace", required=True)
    p.add_argument("--svg", default=None)

    p = sub.add_parser("oracle-suite", help="batch-run the brute-force oracle checks")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)

    return parser


def run(argv) -> int:
    argv = list(argv)
    if argv and argv[0] == "--schema":
        dump_json(SCHEMAS, None)
        return 0
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if args.schema:
        dump_json(SCHEMAS, None)
        return 0
    if args.command is None:
        parser.print_usage()
        return 1
    try:
        return _dispatch(args)
    except PreconditionError as err:
        dump_json({"error": "precondition", "message": str(err), "measured": getattr(err, "measured", None)}, None)
        return 1
    except ConstantsInfeasibleError as err:
        dump_json({"error": "constants-infeasible", "message": str(err), "diagnostics": err.diagnostics}, None)
        return 1
    except BudgetExhaustedError as err:
        dump_json({"error": "budget-exhausted", "message": str(err)}, None)
        return 2


def _dispatch(args) -> int:
    workers = worker_cap()
    if args.command == "corner-count":
        A = Subset2D.from_json(load_json(args.input))
        count = count_corners(A, d_policy=args.d_policy)
        dump_json(
            {
                "corners": count,
                "cardinality": A.cardinality,
                "mode": A.mode,
                "d_policy": args.d_policy or ("nonzero" if A.mode == "group" else "positive"),
                "workers": workers,
            },
            args.out,
        )
        return 0

    if args.command == "box-norm":
        A = Subset2D.from_json(load_json(args.input))
        E1 = mask_from_json(load_json(args.e1))
        E2 = mask_from_json(load_json(args.e2))
        report = rect_alpha_uniform(A, E1, E2, args.alpha)
        dump_json(report.to_json(), args.out)
        return 0

    if args.command == "bohr-explore":
        group = GroupSpec.parse(args.group)
        spec = BohrSpec(group, parse_chars(group, args.chars), Fraction(args.eps), Fraction(args.kappa))
        dump_json(bohr_report(spec).to_json(), args.out)
        return 0

    if args.command == "lname-oracle":
        result = extremal_search(args.n, mode=args.mode, budget=args.budget)
        dump_json(result.to_json(), args.out)
        return 0 if result.optimal else 2

    if args.command == "behrend":
        members = behrend_set(args.n)
        payload = {"n": args.n, "size": int(members.size), "set": [int(b) for b in members]}
        if args.verify:
            payload["ap3_free"] = bool(ap3_free(members))
        dump_json(payload, args.out)
        return 0

    if args.command == "increment-run":
        A = Subset2D.from_json(load_json(args.input))
        config = ConstantsConfig.from_json(load_json(args.config)) if args.config else ConstantsConfig()
        if args.seed is not None:
            config.seed = args.seed
        trace = iteration_driver(A, config)
        dump_json(trace.to_json(), args.trace)
        if args.svg:
            write_trajectory_svg(trace.densities(), args.svg)
        return 0

    if args.command == "oracle-suite":
        config = load_json(args.config) if args.config else None
        report = oracle_suite.run_suite(config)
        dump_json(report, args.out)
        return 0 if report["all_pass"] else 1

    raise PreconditionError(f"unknown subcommand {args.command!r}")


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
