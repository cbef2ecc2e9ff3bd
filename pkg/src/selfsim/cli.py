"""Command-line front end.

Exit codes: 0 holds/pass, 1 fails, 2 invalid input, 3 undetermined.

PPM rasters map the square ``[c - r, c + r]^2`` around the hull center ``c``
(radius ``r``) onto ``size x size`` pixels, row 0 at the top; pixel
``(row, col)`` is set when a sample point falls in it. One-dimensional
systems use a strip of height ``max(1, size // 8)`` with identical rows.
"""

from __future__ import annotations

import argparse
import sys
from importlib import metadata

import numpy as np

from . import io
from .classify import Undetermined, classify, registry_names
from .cograph import (
    DEFAULT_DEPTH,
    FAILS,
    HOLDS,
    UNDETERMINED,
    Verdict,
    branch_scan,
    check_graph_separation,
    check_open_set_condition,
    check_strong_separation,
)
from .exceptions import InvalidInputError, ResourceError
from .ifs import SampleGrid, chaos_game
from .regions import region_from_dict
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_UNDETERMINED = 0, 1, 2, 3
DEFAULT_RENDER_DEPTH = 8
DEFAULT_SIZE = 512
DEFAULT_SEED = 0


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _emit(payload: dict, out: str | None) -> None:
    text = io.dumps(payload)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _envelope(command: str, config: dict, report) -> dict:
    return {"command": command, "version": _version(), "config": config, "report": report}


# -- render ------------------------------------------------------------------


def render_points(system, depth=None, iterations=None, seed=DEFAULT_SEED) -> np.ndarray:
    if iterations is not None:
        return chaos_game(system, seed, iterations)
    return SampleGrid(system, DEFAULT_RENDER_DEPTH if depth is None else depth).points


def format_csv(points: np.ndarray) -> str:
    return "".join(",".join(f"{v:.6g}" for v in p) + "\n" for p in points)


def rasterize(system, points: np.ndarray, size: int = DEFAULT_SIZE) -> np.ndarray:
    """Boolean ``(height, width)`` mask of occupied pixels (see module docstring)."""
    d = system.dimension
    if d > 2:
        raise InvalidInputError("ppm output supports dimension 1 or 2")
    c, r = system.hull_center, system.hull_radius
    height = size if d == 2 else max(1, size // 8)
    col = np.floor((points[:, 0] - (c[0] - r)) / (2 * r) * size).astype(int)
    col = np.clip(col, 0, size - 1)
    mask = np.zeros((height, size), dtype=bool)
    if d == 1:
        mask[:, col] = True
    else:
        row = np.floor(((c[1] + r) - points[:, 1]) / (2 * r) * size).astype(int)
        mask[np.clip(row, 0, size - 1), col] = True
    return mask


def pixel_centers(system, shape) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of the pixel mapping: plane coordinates of pixel centers."""
    height, width = shape
    c, r = system.hull_center, system.hull_radius
    xs = c[0] - r + (np.arange(width) + 0.5) * 2 * r / width
    ys = c[1] + r - (np.arange(height) + 0.5) * 2 * r / height if system.dimension == 2 else None
    return xs, ys


def encode_ppm(mask: np.ndarray) -> bytes:
    height, width = mask.shape
    img = np.full((height, width, 3), 255, dtype=np.uint8)
    img[mask] = 0
    return f"P6\n{width} {height}\n255\n".encode("ascii") + img.tobytes()


def cmd_render(args) -> int:
    loaded = io.load_input(args.input)
    pts = render_points(loaded.system, args.depth, args.iterations, args.seed)
    if args.format == "csv":
        data = format_csv(pts).encode("ascii")
    else:
        data = encode_ppm(rasterize(loaded.system, pts, args.size))
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
    return EXIT_OK


# -- reports -----------------------------------------------------------------


def cmd_branch(args) -> int:
    loaded = io.load_input(args.input)
    report = branch_scan(loaded.system, args.depth, args.tol)
    config = {"input": loaded.source, "depth": args.depth, "tol": report.tol}
    _emit(_envelope("branch", config, report), args.out)
    return EXIT_OK if report.is_empty else EXIT_FAIL


def _witness(loaded, path):
    if path is None:
        return loaded.witness
    data = io.read_json(path)
    return region_from_dict(data.get("witness", data), loaded.system)


def cmd_check(args) -> int:
    loaded = io.load_input(args.input)
    system = loaded.system
    if args.condition == "strong":
        verdict = check_strong_separation(system, args.depth)
    elif args.condition == "graph":
        verdict = check_graph_separation(system, args.depth)
    else:
        witness = _witness(loaded, args.witness)
        if witness is None:
            verdict = Verdict(UNDETERMINED, details={"reason": "no witness supplied; no search performed"})
        else:
            verdict = check_open_set_condition(system, witness)
    config = {"input": loaded.source, "condition": args.condition, "depth": args.depth,
              "witness": args.witness}
    _emit(_envelope("check", config, verdict), args.out)
    return {HOLDS: EXIT_OK, FAILS: EXIT_FAIL}.get(verdict.status, EXIT_UNDETERMINED)


def cmd_classify(args) -> int:
    loaded = io.load_input(args.input)
    witness = _witness(loaded, args.witness)
    meta = {}
    if loaded.registry_name is not None:
        from .classify import get_entry

        meta = get_entry(loaded.registry_name).metadata
    report = classify(loaded.system, args.depth, args.tol, witness, meta)
    config = {"input": loaded.source, "depth": args.depth, "tol": report.tol,
              "witness": args.witness}
    _emit(_envelope("classify", config, report), args.out)
    return EXIT_UNDETERMINED if isinstance(report.verdict, Undetermined) else EXIT_OK


def cmd_verify(args) -> int:
    result = run_suite(args.suite, args.seed, args.depth, args.tol)
    config = {"suite": args.suite, "seed": args.seed, "depth": args.depth, "tol": args.tol}
    _emit(_envelope("verify", config, result), args.out)
    return EXIT_OK if result["passed"] else EXIT_FAIL


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfsim",
        description="Self-similar sets, their cograph bimodules and separation checks.",
        epilog="INPUT is a JSON file or a builtin name: " + ", ".join(registry_names()),
    )
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="sample the attractor as CSV or PPM")
    p.add_argument("input")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--depth", type=int, default=None,
                   help=f"grid depth (default {DEFAULT_RENDER_DEPTH})")
    g.add_argument("--iterations", type=int, default=None, help="chaos-game iterations")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--format", choices=("csv", "ppm"), default="csv")
    p.add_argument("--size", type=int, default=DEFAULT_SIZE, help="ppm width in pixels")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("branch", help="solve for the branch set")
    p.add_argument("input")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--tol", type=float, default=None, help="membership tolerance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_branch)

    p = sub.add_parser("check", help="check a separation condition")
    p.add_argument("input")
    p.add_argument("--condition", choices=("strong", "graph", "osc"), required=True)
    p.add_argument("--witness", default=None, help="JSON region file for osc")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("classify", help="classification report")
    p.add_argument("input")
    p.add_argument("--witness", default=None)
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InvalidInputError, ResourceError) as exc:
        print(f"selfsim: error: {exc}", file=sys.stderr)
        return EXIT_INVALID if isinstance(exc, InvalidInputError) else EXIT_UNDETERMINED


if __name__ == "__main__":
    sys.exit(main())
