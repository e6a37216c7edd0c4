"""Command-line front end: ``dpplab <scenario> --config cfg.json``.

Exit codes: 0 pass, 1 convergence proxy not met, 2 assumption-diagnostic
failure, 3 statistical failure (|z| > 3), 4 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback

from ..fredholm_deform import ConditioningUndefinedError, IllPosedDeformationError
from ..mc_oracle import AcceptanceStarvationError
from ..orthopoly import NotABulkPoint
from .config import SCENARIO_ALIASES, ConfigError, config_from_dict, load_config
from .runners import StatisticalFailure, run

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_ASSUMPTION, EXIT_STATISTICAL, EXIT_CONFIG = 0, 1, 2, 3, 4
SUBCOMMANDS = ("bulk-sine", "edge-airy", "discrete-sine", "mc-verify", "gap", "equilibrium")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpplab", description="Deformed determinantal point process experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", help="JSON config file (defaults apply to omitted keys)")
        sp.add_argument("--out", help="output CSV path (overrides the config)")
        sp.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        sp.add_argument("--threads", type=int, help="parallel tasks across the n sweep")
        sp.add_argument("--quad-order", type=int, help="Gauss-Legendre nodes per unit length")
        sp.add_argument("-v", "--verbose", action="store_true", help="log assumption diagnostics")
    return p


def _config(args):
    scenario = SCENARIO_ALIASES.get(args.command, args.command)
    if args.config:
        cfg = load_config(args.config)
        if cfg.scenario != scenario:
            raise ConfigError(f"config scenario {cfg.scenario!r} does not match subcommand {args.command!r}")
    else:
        cfg = config_from_dict({"scenario": scenario, **DEFAULTS.get(scenario, {})})
    cfg = cfg.with_overrides(output=args.out, seed=args.seed, threads=args.threads, quad_order=args.quad_order)
    # re-run validation on the overridden values
    return config_from_dict(cfg.to_dict())


DEFAULTS = {
    "bulk-sine": {"n": [10, 20, 40, 80], "symbol": {"family": "thinned", "gamma": 0.5, "a": -1, "b": 1}},
    "edge-airy": {"n": [16, 32, 64], "symbol": {"family": "indicator", "a": 1, "b": "inf"}},
    "discrete-sine": {"n": [64, 128, 256], "symbol": {"family": "one-minus-exp", "height": 1.0, "a": -1, "b": 1}},
    "mc-verify": {"n": [2], "symbol": {"family": "thinned", "gamma": 0.5, "a": -1, "b": 1},
                  "h": {"family": "soft-indicator", "height": 0.5, "a": -0.5, "b": 0.5, "width": 0.05}},
    "gap-probability": {"s_grid": [0.0, 0.05, 0.1, 0.2, 0.5, 1.0]},
    "equilibrium": {"n": [500, 1000, 2000]},
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IllPosedDeformationError, ConditioningUndefinedError, NotABulkPoint) as exc:
        print(f"assumption diagnostic failed: {exc}", file=sys.stderr)
        print(json.dumps({"config": cfg.to_dict(), "error": type(exc).__name__}, default=str), file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        return EXIT_ASSUMPTION
    except AcceptanceStarvationError as exc:
        print(f"statistical failure: {exc}", file=sys.stderr)
        return EXIT_STATISTICAL
    except StatisticalFailure as exc:
        _emit(exc.report, cfg)
        print("statistical failure: |z| > 3", file=sys.stderr)
        return EXIT_STATISTICAL
    _emit(rep, cfg)
    if rep.metadata.get("errors_decreasing") is False or rep.metadata.get("kernel_envelope_ok") is False:
        print("convergence proxy not met (errors not decreasing along the sweep)", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _emit(rep, cfg) -> None:
    print(rep.table())
    if cfg.output:
        rep.save(cfg.output)
        print(f"wrote {cfg.output}")


if __name__ == "__main__":
    sys.exit(main())
