"""Command-line entry point: ``wsav {run, converge, lambda-study, list-presets}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from .errors import ConfigurationError, OutputError
from .harness import (
    PRESET_NAMES,
    PRESET_SUMMARIES,
    config_from_mapping,
    convergence_study,
    ensure_dir,
    halving,
    lambda_energy_study,
    read_config_file,
    run_experiment,
)

EXIT_OK = 0
EXIT_STEP_FAILURE = 3
EXIT_USAGE = 2
EXIT_IO = 4

# flags shared by every simulation subcommand; dest names match config keys
_SETTINGS = (
    ("--preset", dict(choices=PRESET_NAMES)),
    ("--scheme", dict(type=str.upper, choices=("BE", "CN"))),
    ("--nu", dict(type=float)),
    ("--eps", dict(type=float)),
    ("--gamma", dict(type=float)),
    ("--delta", dict(type=float)),
    ("--C", dict(type=float, dest="c")),
    ("--tau", dict(type=float)),
    ("--steps", dict(type=int)),
    ("--t-end", dict(type=float, dest="t_end")),
    ("--lambda", dict(dest="lambda", metavar="{min|0|1|VALUE}")),
    ("--grid", dict(metavar="N or NxN[xN]")),
    ("--domain", dict(metavar="LO,HI")),
    ("--out", dict(metavar="DIR")),
    ("--snapshot-every", dict(type=int, dest="snapshot_every")),
    ("--tol-lambda", dict(type=float, dest="tol_lambda")),
)


def _add_settings(p: argparse.ArgumentParser) -> None:
    for flag, kw in _SETTINGS:
        p.add_argument(flag, default=None, **kw)
    p.add_argument("--config", metavar="FILE", help="key = value file; command-line flags take precedence")
    p.add_argument("--full-scale", action="store_true", help="use the full-size reference grids (128^2, 256^2, 128^3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsav", description="Weighted SAV phase-field solver.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single trajectory")
    _add_settings(p_run)

    p_conv = sub.add_parser("converge", help="temporal self-convergence study")
    _add_settings(p_conv)
    p_conv.add_argument("--levels", type=int, default=6, help="number of table rows (default 6)")

    p_lam = sub.add_parser("lambda-study", help="modified-energy differences under halving lambda")
    _add_settings(p_lam)
    p_lam.add_argument("--levels", type=int, default=4, help="number of lambda values, halving from 1")
    p_lam.add_argument("--t-list", default="0.1,1", help="comma-separated end times")

    sub.add_parser("list-presets", help="print the available presets")
    return parser


def _settings(args: argparse.Namespace) -> dict:
    values: dict = {}
    if args.config:
        values.update(read_config_file(args.config))
    for flag, kw in _SETTINGS:
        dest = kw.get("dest", flag.lstrip("-").replace("-", "_"))
        v = getattr(args, dest, None)
        if v is not None:
            values[dest] = v
    # a config file may set one of steps / t_end and the command line the other
    if args.config and ("steps" in values) and ("t_end" in values):
        if getattr(args, "steps", None) is not None and getattr(args, "t_end", None) is None:
            values.pop("t_end")
        elif getattr(args, "t_end", None) is not None and getattr(args, "steps", None) is None:
            values.pop("steps")
    if args.full_scale:
        values["full_scale"] = True
    return values


def _emit_table(text: str, out: Optional[str], name: str) -> None:
    sys.stdout.write(text)
    if out:
        ensure_dir(out)
        path = os.path.join(out, name)
        try:
            with open(path, "w", encoding="ascii", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror}") from exc


def _cmd_run(args) -> int:
    cfg = config_from_mapping(_settings(args))
    res = run_experiment(cfg)
    last = len(res.series) - 1
    summary = {
        "preset": cfg.preset,
        "scheme": cfg.scheme,
        "steps": res.state.step,
        "t": res.state.t,
        "E_norm": res.series.E_norm[last],
        "max_mass_dev": max(res.series.mass_dev),
        "elapsed_seconds": round(res.elapsed, 3),
    }
    if res.failure is not None:
        print(json.dumps(res.failure, sort_keys=True))
        return EXIT_STEP_FAILURE
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_converge(args) -> int:
    cfg = config_from_mapping(_settings(args))
    T = cfg.t_end if cfg.t_end is not None else cfg.steps() * cfg.tau
    # ladders start at 2.5e-4 (the coarsest tabulated step) unless --tau is given
    start = cfg.tau if args.tau is not None else 0.25e-3
    table = convergence_study(cfg, halving(start, args.levels), T)
    _emit_table(table.to_csv(), cfg.out, "convergence.csv")
    return EXIT_STEP_FAILURE if any(r.failure for r in table.rows) else EXIT_OK


def _cmd_lambda_study(args) -> int:
    cfg = config_from_mapping(_settings(args))
    try:
        T_list = [float(v) for v in args.t_list.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse --t-list {args.t_list!r}") from None
    table = lambda_energy_study(cfg, halving(1.0, args.levels), T_list)
    _emit_table(table.to_csv(), cfg.out, "lambda_study.csv")
    return EXIT_STEP_FAILURE if any(r.failure for r in table.rows) else EXIT_OK


def _cmd_list(args) -> int:
    for name in PRESET_NAMES:
        print(f"{name:8s} {PRESET_SUMMARIES[name]}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "converge": _cmd_converge,
        "lambda-study": _cmd_lambda_study,
        "list-presets": _cmd_list,
    }
    try:
        return handlers[args.command](args)
    except ConfigurationError as exc:
        parser.print_usage(sys.stderr)
        print(f"wsav: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OutputError as exc:
        print(f"wsav: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
