"""Command-line interface.

Subcommands mirror the run modes: `relax` finds a ground state,
`propagate` drives it through the laser pulse, `sweep-sigma` scans the
variational bandwidth, and `compare` merges completed runs. All
settings come from a config file (every key optional) plus a small set
of overriding flags; outputs land in the --out directory.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from tdqmc.config import RunConfig, load_config, parse_config
from tdqmc.errors import ConfigurationError, TdqmcError
from tdqmc.runner import (
    run_compare,
    run_propagate,
    run_relax,
    run_sweep_sigma,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to the run configuration file")
    parser.add_argument("--seed", type=int, help="override [run] seed")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument(
        "--solver", help="override [run] solver (tdqmc, exact, tdhf)"
    )
    parser.add_argument(
        "--regime",
        help="override [regime] kind (ultra_correlated, effective, mean_field)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tdqmc",
        description="Walker-ensemble and grid solvers for the 1D "
        "two-electron model atom in a laser field.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_relax = sub.add_parser("relax", help="ground-state relaxation")
    _add_run_flags(p_relax)

    p_prop = sub.add_parser("propagate", help="relax, then run the pulse")
    _add_run_flags(p_prop)

    p_sweep = sub.add_parser(
        "sweep-sigma", help="variational scan of the kernel bandwidth"
    )
    _add_run_flags(p_sweep)
    p_sweep.add_argument(
        "--sigmas",
        help="comma-separated candidate bandwidths (default "
        "0.1,0.5,2,5,20)",
    )

    p_cmp = sub.add_parser(
        "compare", help="merge completed propagation runs"
    )
    p_cmp.add_argument("run_dirs", nargs="+", help="completed run directories")
    p_cmp.add_argument("--out", required=True, help="output directory")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = parse_config("", source="<defaults>")
    return config.with_overrides(
        seed=args.seed, solver=args.solver, regime=args.regime, out=args.out
    )


def _parse_sigmas(text: Optional[str]) -> Optional[tuple[float, ...]]:
    if text is None:
        return None
    try:
        sigmas = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigurationError(f"--sigmas: not a number list: {text!r}") from None
    if not sigmas:
        raise ConfigurationError("--sigmas: empty list")
    return sigmas


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            payload = run_compare(args.run_dirs, args.out)
            for label, value in payload["final_ion_proj"].items():
                print(f"{label}: final ion_proj = {value:.6f}")
            return EXIT_OK
        config = _resolve_config(args)
        if args.command == "relax":
            payload = run_relax(config, config.out)
            print(f"{config.solver} ground-state energy: {payload['energy']:.6f}")
        elif args.command == "propagate":
            payload = run_propagate(config, config.out)
            final = payload["final"]
            print(
                f"{config.solver} final ionization (projection): "
                f"{final['ion_proj']:.6f}"
            )
        else:
            payload = run_sweep_sigma(
                config, config.out, _parse_sigmas(args.sigmas)
            )
            print(f"selected sigma: {payload['selected_sigma']:g}")
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TdqmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
