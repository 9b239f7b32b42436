"""Command line front end: ``magplan {synth,entropy,plan,simulate}``.

Exit status is 0 on success, 1 for usage errors and 2 for bad input data
(unreadable or malformed files, invalid configuration values, points off
the map).  Every output is computed before anything is written, and each
file is written to a temporary sibling and renamed into place, so a failed
command leaves no partial files behind.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from .entropy import EntropyConfig, entropy_map, save_points, select_low_entropy_points
from .exceptions import DataError
from .gridfield import Unit, load_grid, parse_synth_spec, save_grid, synth_map
from .harness import (
    config_from_mapping,
    format_summary,
    load_config,
    parse_config_text,
    run_experiment,
    summarize,
    with_seed,
)
from .planner import plan_path, save_path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def write_atomic(outputs: dict) -> None:
    """Write ``{path: text}`` so that either every file appears or none does."""
    staged = []
    try:
        for path, text in outputs.items():
            path = Path(path)
            fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp",
                                       dir=path.parent if str(path.parent) else ".")
            staged.append((tmp, path))
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        for tmp, path in staged:
            os.replace(tmp, path)
    except OSError as exc:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise DataError(f"cannot write output: {exc}") from None


def _default_sibling(path, suffix) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + suffix))


def _cmd_synth(args) -> dict:
    spec = parse_synth_spec(_read(args.spec))
    return {args.out: save_grid(synth_map(spec))}


def _cmd_entropy(args) -> dict:
    field = load_grid(_read(args.input))
    emap = entropy_map(field, EntropyConfig(args.bin, args.window, args.floor))
    points = select_low_entropy_points(emap, args.k_sigma, args.max_points)
    points_path = args.points or _default_sibling(args.out, "_points.csv")
    return {args.out: save_grid(emap), points_path: save_points(points)}


def _cmd_plan(args) -> dict:
    values = parse_config_text(_read(args.config)) if args.config else {}
    cfg = config_from_mapping(values, Path(args.config).parent if args.config else ".")
    field = load_grid(_read(args.map))
    emap = field if field.unit is Unit.BITS else entropy_map(field, cfg.entropy)
    start = args.start if args.start is not None else (cfg.start.x, cfg.start.y)
    goal = args.goal if args.goal is not None else cfg.goal
    result = plan_path(start, goal, emap, cfg.planner)
    meta_path = args.meta or _default_sibling(args.out, ".meta")
    return {args.out: save_path(result.path), meta_path: result.metadata()}


def _cmd_simulate(args) -> dict:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    plan, log = run_experiment(cfg)
    summary = format_summary(summarize(log), plan)
    outputs = {args.out: log.to_csv()}
    if args.summary:
        outputs[args.summary] = summary
    else:
        args.stdout_text = summary
    return outputs


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="magplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a grid-CSV map from a synthetic map spec")
    p.add_argument("--spec", required=True, help="key = value synthetic map description")
    p.add_argument("--out", required=True, help="grid-CSV output")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("entropy", help="entropy map and low-entropy points of a grid")
    p.add_argument("--in", dest="input", required=True, help="grid-CSV input map")
    p.add_argument("--bin", type=float, default=0.2, help="bin size in map units (0.2)")
    p.add_argument("--window", type=int, default=2, help="window side in bins (2)")
    p.add_argument("--floor", type=float, default=1e-12, help="probability floor (1e-12)")
    p.add_argument("--k-sigma", type=float, default=5.0, help="selection threshold (5)")
    p.add_argument("--max-points", type=int, default=64, help="selection cap (64)")
    p.add_argument("--out", required=True, help="entropy grid-CSV output")
    p.add_argument("--points", help="points CSV output (default <out>_points.csv)")
    p.set_defaults(func=_cmd_entropy)

    p = sub.add_parser("plan", help="plan a path over a map")
    p.add_argument("--map", required=True, help="grid-CSV map, magnetic (nT) or entropy (bits)")
    p.add_argument("--config", help="experiment config file supplying planner settings")
    p.add_argument("--start", type=float, nargs=2, metavar=("X", "Y"))
    p.add_argument("--goal", type=float, nargs=2, metavar=("X", "Y"))
    p.add_argument("--out", required=True, help="path CSV output")
    p.add_argument("--meta", help="metadata output (default <out stem>.meta)")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("simulate", help="run one closed-loop experiment")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=_seed, help="override the config seed")
    p.add_argument("--out", required=True, help="trajectory CSV output")
    p.add_argument("--summary", help="summary output (default: standard output)")
    p.set_defaults(func=_cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    args.stdout_text = None
    try:
        outputs = args.func(args)
        write_atomic(outputs)
    except (DataError, ValueError, TypeError) as exc:
        print(f"magplan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.stdout_text:
        sys.stdout.write(args.stdout_text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
