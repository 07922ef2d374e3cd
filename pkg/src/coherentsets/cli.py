"""Command-line entry point: run experiments, emit plot data, validate configs."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, make_config
from .experiments import run_experiment
from .reporting import emit_plotdata, write_bundle, PLOTDATA_FIGURES

OUT_ENV = "COHERENTSETS_OUT"


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--boxes", help="box count, e.g. 100 or 120x60")
    parser.add_argument("--test-points", dest="test_points", type=int,
                        help="test points per box (perfect square in 2D)")
    parser.add_argument("--decay-span", dest="decay_span", type=float,
                        help="window the decay rates are measured over")
    parser.add_argument("--push-span", dest="push_span", type=float,
                        help="how far seed vectors are pushed before time zero")
    parser.add_argument("--modes", type=int, help="number of modes to extract")
    parser.add_argument("--checkpoints", help="comma-separated checkpoint times")
    parser.add_argument("--step", type=float, help="integrator step (wave2d)")
    parser.add_argument("--delta-range", dest="delta_range",
                        help="LO:HI push depths for the defect series (aperiodic4)")
    parser.add_argument("--preset", choices=("desk", "full"),
                        help="wave2d resolution preset")
    parser.add_argument("--workers", type=int, help="worker threads (results unchanged)")
    parser.add_argument("--out-dir", dest="out_dir", type=Path, help="bundle directory")


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("boxes", "test_points", "decay_span", "push_span", "modes",
            "checkpoints", "step", "delta_range", "preset", "workers", "out_dir")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _default_out(experiment: str) -> Path:
    root = os.environ.get(OUT_ENV, "runs")
    return Path(root) / experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coherentsets",
        description="Coherent sets of aperiodically driven systems via "
                    "transfer-operator cocycles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and write its bundle")
    p_run.add_argument("experiment", nargs="?", choices=EXPERIMENTS,
                       help="experiment name (may come from the config file)")
    _add_override_flags(p_run)
    p_run.add_argument("--dry-run", action="store_true",
                       help="validate configuration and write nothing")
    p_run.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")

    p_emit = sub.add_parser("emit-plotdata", help="write delimited plot data from a bundle")
    p_emit.add_argument("--bundle", type=Path, required=True, help="existing run bundle")
    p_emit.add_argument("--figure", required=True,
                        help="figure id: " + ", ".join(sorted(PLOTDATA_FIGURES)))
    p_emit.add_argument("--out-dir", dest="out_dir", type=Path,
                        help="where to write (default: the bundle)")
    p_emit.add_argument("--no-render", action="store_true", help="data files only")

    p_val = sub.add_parser("validate-config", help="parse and normalize a config")
    p_val.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    _add_override_flags(p_val)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = make_config(args.experiment, args.config, _overrides(args))
    print("configuration:")
    for key, value in cfg.as_items():
        print(f"  {key} = {value}")
    if args.dry_run:
        print("dry run: configuration valid, nothing written")
        return 0
    out_dir = cfg.out_dir or _default_out(cfg.experiment)
    result = run_experiment(cfg, log=lambda msg: print(f"[{cfg.experiment}] {msg}", flush=True))
    write_bundle(result, out_dir, figures=not args.no_figures)
    failed = 0
    for name, ok, detail in result.checks:
        status = "pass" if ok else "FAIL"
        suffix = f" ({detail})" if detail and not ok else ""
        print(f"  check {status}: {name}{suffix}")
        failed += 0 if ok else 1
    print(f"bundle written to {out_dir}")
    if failed:
        print(f"{failed} internal check(s) failed", file=sys.stderr)
        return 1
    return 0


def _cmd_emit(args: argparse.Namespace) -> int:
    if not args.bundle.exists():
        print(f"bundle {args.bundle} does not exist", file=sys.stderr)
        return 2
    written = emit_plotdata(args.bundle, args.figure, args.out_dir,
                            render=not args.no_render)
    for path in written:
        print(path)
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = make_config(args.experiment, args.config, _overrides(args))
    print("configuration valid:")
    for key, value in cfg.as_items():
        print(f"  {key} = {value}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "emit-plotdata":
            return _cmd_emit(args)
        if args.command == "validate-config":
            return _cmd_validate(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    raise SystemExit(main())
