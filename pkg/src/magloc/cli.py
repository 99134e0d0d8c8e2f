"""Command-line interface: ``magloc {phantom,validate,run,report}``.

Exit codes: 0 success, 1 domain failure (saturation, localization,
empty slice), 2 usage or configuration error.

Scenario settings come from an INI file (see ``magloc.config``); flags
given on the command line override values from the file, which in turn
override built-in defaults. ``MAGLOC_THREADS`` sets the default worker
count for ``run``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from magloc import body as _body
from magloc import core
from magloc.config import ScenarioConfig, load_config
from magloc.errors import ConfigError, EmptySliceError, MaglocError, SaturationError
from magloc.fieldmodel import validate_saturation
from magloc.simharness import (
    PointResults,
    export_error_map,
    export_projection,
    format_summary,
    run_scenario,
)

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("magloc")


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _slice_spec(text: str) -> tuple[str, float]:
    axis, sep, coord = text.partition("=")
    axis = axis.strip().lower()
    if not sep or axis not in ("x", "y", "z"):
        raise argparse.ArgumentTypeError(f"expected axis=coordinate with axis in x, y, z; got {text!r}")
    try:
        return axis, float(coord)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad slice coordinate in {text!r}") from None


def _default_threads() -> int:
    raw = os.environ.get("MAGLOC_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    over = {}
    if getattr(args, "arrangement", None):
        over.update(arrangement=args.arrangement.upper(), wire_file=None)
    if getattr(args, "wires", None):
        over.update(wire_file=args.wires, arrangement=None)
    if over:
        # switching the wire source must not trip the one-source check
        try:
            cfg = replace(cfg, **over)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return cfg.with_overrides(
        current=getattr(args, "current", None),
        clearance=getattr(args, "clearance", None),
        runs_per_point=getattr(args, "runs", None),
        seed=getattr(args, "seed", None),
        phantom=getattr(args, "phantom", None),
        phantom_resolution=getattr(args, "phantom_resolution", None),
        output=getattr(args, "out", None),
    )


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario INI file (defaults: W6 at 100 A)")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--arrangement", help="builtin wire arrangement: W3, W6, W9, W15, W30")
    src.add_argument("--wires", help="wire file (one 'axis=.. offset_a=.. offset_b=.. current=..' per line)")
    p.add_argument("--current", type=_positive_float, help="current in every wire, A")
    p.add_argument("--clearance", type=_positive_float, help="cage clearance around the body, m")
    p.add_argument("--phantom", help="voxel file, or 'generate'")
    p.add_argument("--phantom-resolution", type=_positive_float, help="generated phantom voxel size, m")


def cmd_phantom(args) -> int:
    body = _body.generate_phantom(args.height, args.resolution, args.margin)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _body.save_voxels(body, out)
    print(f"voxels = {len(body)}")
    print(f"resolution_m = {body.resolution!r}")
    print(f"height_m = {args.height!r}")
    lo, hi = body.bounding_box.lo, body.bounding_box.hi
    print(f"bounding_box_m = {', '.join(f'{v:.4f}' for v in lo)} .. {', '.join(f'{v:.4f}' for v in hi)}")
    print(f"written = {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _scenario(args)
    body = cfg.build_body()
    wireset = cfg.build_wireset(body.bounding_box)
    rep = validate_saturation(wireset, body, cfg.magnetometer.range_max, cfg.mu)
    print(cfg.to_ini(), end="")
    print("[saturation]")
    print(f"max_field_uT = {rep.max_field * 1e6:.3f}")
    print(f"limit_uT = {rep.limit * 1e6:.3f}")
    print(f"worst_wire = {rep.worst_wire}")
    print(f"worst_voxel = {', '.join(f'{v:.4f}' for v in rep.worst_voxel)}")
    print(f"status = {'ok' if rep.ok else 'SATURATED'}")
    return EXIT_OK if rep.ok else EXIT_DOMAIN


def cmd_run(args) -> int:
    cfg = _scenario(args)
    if cfg.output is None:
        raise ConfigError("no output directory: pass --out or set [simulation] output")
    t0 = time.perf_counter()
    try:
        result = run_scenario(cfg, threads=args.threads, backend=args.backend)
    except SaturationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        # every voxel failed to localize
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    dt = time.perf_counter() - t0
    print(format_summary(result.stats), end="")
    failed = int((result.points.mean_error != result.points.mean_error).sum())
    print(f"# {len(result.points)} voxels, {failed} with no successful run, "
          f"backend {result.backend}, {dt:.1f} s, written to {cfg.output}")
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.input)
    if not (src / "points.csv").is_file():
        raise ConfigError(f"{src}: no points.csv found")
    points = PointResults.read_csv(src)
    out = Path(args.out) if args.out else src
    out.mkdir(parents=True, exist_ok=True)
    if not args.slice and not args.projection:
        raise ConfigError("report needs at least one --slice or --projection")
    for axis, coord in args.slice or ():
        path = out / f"slice_{axis}_{coord:+.4f}.csv"
        export_error_map(points, axis, coord, path)
        print(f"written = {path}")
    for plane in args.projection or ():
        path = out / f"projection_{plane}.csv"
        export_projection(points, plane, path)
        print(f"written = {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magloc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate a voxel phantom file")
    p.add_argument("--height", type=_positive_float, default=_body.REFERENCE_HEIGHT, help="body height, m")
    p.add_argument("--resolution", type=_positive_float, default=0.005, help="voxel size, m")
    p.add_argument("--margin", type=float, default=_body.DEFAULT_MARGIN, help="envelope margin, m")
    p.add_argument("--out", required=True, help="output voxel file")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("validate", help="check the in-body field against the sensor range")
    _add_scenario_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run the Monte Carlo localization study")
    _add_scenario_flags(p)
    p.add_argument("--seed", type=int, help="64-bit seed")
    p.add_argument("--runs", type=_positive_int, help="localization attempts per voxel")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=_positive_int, default=_default_threads(),
                   help="worker threads (default: $MAGLOC_THREADS or 1)")
    p.add_argument("--backend", choices=core.BACKENDS, default=None, help="kernel backend")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="export error-map grids from a run directory")
    p.add_argument("--in", dest="input", required=True, help="run output directory")
    p.add_argument("--slice", type=_slice_spec, action="append", help="planar slice, e.g. x=0.0025")
    p.add_argument("--projection", choices=("xz", "yz", "xy"), action="append",
                   help="mean over the remaining axis")
    p.add_argument("--out", help="directory for grid CSVs (default: --in)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"magloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EmptySliceError as exc:
        print(f"magloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (SaturationError, MaglocError) as exc:
        print(f"magloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN if not isinstance(exc, ValueError) else EXIT_USAGE
    except OSError as exc:
        print(f"magloc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
