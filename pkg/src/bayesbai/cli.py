"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .bounds import FORMULAS, evaluate
from .harness import (
    ConfigError,
    ExperimentAborted,
    ExperimentConfig,
    load_config,
    sweep_budget,
    sweep_sigma0,
    write_results,
)
from .reproduce import FIGURES, reproduce_fig

OUT_ENV = "BAYESBAI_OUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _seed(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("master seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bayesbai", description="Bayesian fixed-budget best-arm identification")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    for name, help_ in (("run", "budget sweep, plus the sigma0 sweep if the config has a grid"),
                        ("sweep-budget", "one row per (policy, n)"),
                        ("sweep-sigma0", "one row per (policy, n, sigma0)")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="YAML experiment config")
        s.add_argument("--out-dir", help=f"output directory (default ${OUT_ENV} or ./results)")
        s.add_argument("--threads", type=_positive_int, default=1,
                       help="worker processes; never changes results")

    b = sub.add_parser("bound", help="evaluate a closed-form bound, print JSON",
                       epilog="formulas: " + ", ".join(
                           f"{k}({' '.join(v[0])})" for k, v in FORMULAS.items()))
    b.add_argument("formula", choices=sorted(FORMULAS))
    b.add_argument("params", nargs="*", metavar="key=value",
                   help="numeric parameters; comma-separated lists for vectors")

    r = sub.add_parser("reproduce", help="synthetic eight-armed sweeps as plot-ready CSV")
    r.add_argument("fig", choices=FIGURES)
    r.add_argument("--replications", type=_positive_int, default=5000)
    r.add_argument("--master-seed", type=_seed, default=0)
    r.add_argument("--out-dir")
    r.add_argument("--threads", type=_positive_int, default=1)
    r.add_argument("--policies", help="comma-separated subset of policies (default all)")
    return p


def _number(key: str, text: str):
    try:
        if "," in text:
            return [float(t) for t in text.split(",") if t]
        v = float(text)
    except ValueError:
        raise UsageError(f"parameter {key}: not a number: {text!r}") from None
    return int(v) if key in ("i", "j", "star") and v == int(v) else v


def parse_params(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise UsageError(f"expected key=value, got {item!r}")
        if key in out:
            raise UsageError(f"parameter {key} given twice")
        out[key] = _number(key, val)
    return out


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or "results")


def _sweep(cfg: ExperimentConfig, command: str, threads: int):
    if command == "sweep-budget":
        return sweep_budget(cfg, threads)
    if command == "sweep-sigma0":
        return sweep_sigma0(cfg, threads)
    rows = sweep_budget(cfg, threads)
    if cfg.sigma0_grid:
        rows += sweep_sigma0(cfg, threads)
    return rows


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    rows = _sweep(cfg, args.command, args.threads)
    out = _out_dir(args.out_dir)
    stem = f"{Path(args.config).stem}_{args.command.replace('-', '_')}"
    csv_path = Path(cfg.csv_path) if cfg.csv_path else out / f"{stem}.csv"
    json_path = Path(cfg.json_path) if cfg.json_path else out / f"{stem}.json"
    for p in write_results(rows, csv_path, json_path, master_seed=cfg.master_seed,
                           config_checksum=cfg.checksum()):
        print(p)
    return EXIT_OK


def _cmd_bound(args) -> int:
    params = parse_params(args.params)
    try:
        res = evaluate(args.formula, **params)
    except (KeyError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    except ValueError as exc:
        # missing or unexpected parameter names are usage errors; bad values are not
        if "takes" in str(exc):
            raise UsageError(str(exc)) from None
        raise
    print(json.dumps(res.to_dict(), sort_keys=False))
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    policies = args.policies.split(",") if args.policies else None
    for p in reproduce_fig(args.fig, args.replications, args.master_seed,
                           _out_dir(args.out_dir), args.threads, policies):
        print(p)
    return EXIT_OK


_COMMANDS = {"run": _cmd_experiment, "sweep-budget": _cmd_experiment,
             "sweep-sigma0": _cmd_experiment, "bound": _cmd_bound,
             "reproduce": _cmd_reproduce}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"bayesbai {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ExperimentAborted, ValueError, OSError, RuntimeError) as exc:
        print(f"bayesbai {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
