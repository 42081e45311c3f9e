"""Command line entry point: ``rotwave <experiment> --config run.yaml --out results/``."""
from __future__ import annotations

import argparse
import logging
import sys

from pydantic import ValidationError

from . import __version__
from .harness import config as hconfig
from .harness import experiments as ex


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotwave", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rotwave {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "trajectory": "integrate the classical flow; writes trajectory.csv",
        "gaussian": "propagate the width matrices; writes matrices.csv",
        "amplitude": "solve the amplitude equation; writes amplitude.csv (and RPK1 snapshots)",
        "compare": "full solution against the wave packet for each eps; writes errors.csv",
        "converge": "compare plus rate and envelope fits; adds rate.csv and envelope.csv",
        "audit": "matrix invariant audit over potentials, rotations and seeded perturbations",
    }
    for name in hconfig.EXPERIMENTS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="YAML experiment configuration")
        p.add_argument("--out", required=True, help="output directory (created if missing)")
        p.add_argument("--seed", type=_seed, default=None, help="overrides the config seed")
        p.add_argument("--force-spectral", action="store_true", help="use the spectral amplitude solver for linear runs")
        p.add_argument("--jobs", type=_positive_int, default=None, help="parallel processes for eps sweeps")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _report(cmd, result) -> str:
    if cmd == "trajectory":
        return f"energy drift {result.energy_drift:.3e}; growth c0={result.growth[0]:.4g} c1={result.growth[1]:.4g}"
    if cmd == "gaussian":
        return "max residuals " + " ".join(f"{k}={v:.3e}" for k, v in result.residuals.items())
    if cmd == "amplitude":
        return f"mass {result.mass[0]:.12g} -> {result.mass[-1]:.12g}"
    if cmd == "compare":
        return "\n".join(f"eps={r.eps:g} error(T)={r.errors[-1]:.4e}" for r in result)
    if cmd == "converge":
        lines = [f"eps={e:g} error(T)={v:.4e}" for e, v in result.final_errors()]
        if result.rate is not None:
            lo, hi = result.rate.interval
            lines.append(f"slope {result.rate.slope:.4f} (95% CI [{lo:.4f}, {hi:.4f}])")
        return "\n".join(lines)
    failures = [r for r in result if not r.passed]
    return f"{len(result)} audit rows, {len(failures)} failing"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = hconfig.load_config(args.config)
    except (OSError, ValueError, ValidationError) as exc:
        print(f"rotwave: invalid config {args.config}: {exc}", file=sys.stderr)
        return 2
    if cfg.experiment is not None and cfg.experiment != args.command:
        print(f"rotwave: config is for '{cfg.experiment}', not '{args.command}'", file=sys.stderr)
        return 2

    cmd = args.command
    try:
        if cmd == "trajectory":
            result = ex.run_trajectory(cfg, args.out, args.seed)
        elif cmd == "gaussian":
            result = ex.run_gaussian(cfg, args.out, args.seed)
        elif cmd == "amplitude":
            result = ex.run_amplitude(cfg, args.out, args.seed)
        elif cmd == "compare":
            result = ex.run_compare_all(cfg, args.out, args.seed, force_spectral=args.force_spectral, jobs=args.jobs)
        elif cmd == "converge":
            result = ex.run_converge(cfg, args.out, args.seed, force_spectral=args.force_spectral, jobs=args.jobs)
        else:
            result = ex.audit_invariants(cfg, args.out, args.seed)
    except (ex.ExperimentError, ValueError) as exc:
        print(f"rotwave {cmd}: {exc}", file=sys.stderr)
        return 1
    print(_report(cmd, result))
    if cmd == "audit" and any(not r.passed for r in result):
        return 3
    return 0
