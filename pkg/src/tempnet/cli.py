"""Command-line entry point.

Exit status: 0 on success, 1 on usage or validation errors, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import ConfigError
from .diagnostics import run_summary
from .engine import advance, init_simulation, run_replicates
from . import io as tio

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _window(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be A:B with integers, got {text!r}")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tempnet", description="Spatial temporal network epidemic simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one simulation and write its outputs")
    s.add_argument("--config", required=True, help="JSON config file")
    s.add_argument("--scenario", default=None, help="named scenario block to apply over the base config")
    s.add_argument("--seed", type=int, default=None, help="RNG seed (default: rng_seed from the config)")
    s.add_argument("--steps", type=int, default=None, help="number of steps (default: horizon from the config)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--save-snapshot", default=None, metavar="FILE", help="write the final state to FILE")
    s.add_argument("--resume", default=None, metavar="FILE",
                   help="continue from a snapshot instead of initializing; --steps more steps are run")

    r = sub.add_parser("replicates", help="run seeds seed-base .. seed-base+reps-1, one subdirectory each")
    r.add_argument("--config", required=True, help="JSON config file")
    r.add_argument("--scenario", default=None, help="named scenario block to apply over the base config")
    r.add_argument("--reps", type=int, required=True, help="number of replicates")
    r.add_argument("--seed-base", type=int, required=True, help="seed of the first replicate")
    r.add_argument("--steps", type=int, default=None, help="steps per run (default: horizon from the config)")
    r.add_argument("--workers", type=int, default=1, help="worker processes")
    r.add_argument("--out", required=True, help="output directory")

    c = sub.add_parser("compare", help="paired equilibrium-window comparison of two run sets")
    c.add_argument("--baseline", required=True, help="run directory or directory of replicates")
    c.add_argument("--treatment", required=True, help="run directory or directory of replicates")
    c.add_argument("--window", required=True, type=_window, help="1-based inclusive step window A:B")
    c.add_argument("--out", default=None, help="also write the comparison JSON to this file")

    v = sub.add_parser("validate", help="check a config file and print 'ok'")
    v.add_argument("--config", required=True, help="JSON config file")
    v.add_argument("--scenario", default=None, help="named scenario block to apply over the base config")
    return p


def _load(args):
    cfg = tio.load_config(args.config, args.scenario)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    if args.steps is not None:
        if args.steps < 1:
            raise ConfigError("steps", "must be >= 1")
        overrides["horizon"] = args.steps
    return cfg.replace(**overrides).validate() if overrides else cfg


def cmd_simulate(args) -> int:
    if args.resume:
        state = tio.load_snapshot(args.resume)
        steps = args.steps if args.steps is not None else state.config.horizon - state.t
        if steps < 0:
            raise ConfigError("steps", "must be >= 0")
    else:
        cfg = _load(args)
        state = init_simulation(cfg)
        steps = cfg.horizon
    advance(state, steps)
    tio.write_outputs(state.recorder.output(state.config.rng_seed), args.out)
    if args.save_snapshot:
        tio.save_snapshot(state, args.save_snapshot)
    return EXIT_OK


def cmd_replicates(args) -> int:
    if args.reps < 1:
        raise ConfigError("reps", "must be >= 1")
    cfg = _load(args)
    runs = run_replicates(cfg, args.reps, args.seed_base, workers=args.workers)
    width = max(3, len(str(args.reps - 1)))
    for i, run in enumerate(runs):
        tio.write_outputs(run, Path(args.out) / f"rep_{i:0{width}d}")
    return EXIT_OK


def cmd_compare(args) -> int:
    base = tio.read_runs(args.baseline)
    treat = tio.read_runs(args.treatment)
    result = run_summary(base, treat, args.window)
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        tio._write_text(Path(args.out), text)
    return EXIT_OK


def cmd_validate(args) -> int:
    tio.load_config(args.config, args.scenario)
    print("ok")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "replicates": cmd_replicates, "compare": cmd_compare,
            "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, tio.SnapshotError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
