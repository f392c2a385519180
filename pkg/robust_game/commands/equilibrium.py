"""Verbs about the equilibrium: nash, certify."""
import argparse
import json

from robust_game.export import load_record
from robust_game.harness import certify_record, nash_for_config
from robust_game.schemas import load_scenario


def nash(args: argparse.Namespace) -> int:
    """
    Nash: print the coupled-CARE feedback gains of a scenario.
    """
    sol = nash_for_config(load_scenario(args.config))
    print(json.dumps({
        "K1_star": sol.K1_star.tolist(),
        "K2_star": sol.K2_star.tolist(),
        "residuals": [float(r) for r in sol.residuals],
        "iterations": sol.iterations,
    }, indent=2))
    return 0


def certify(args: argparse.Namespace) -> int:
    """
    Certify: recompute epsilon from a saved summary.json.
    """
    cert = certify_record(load_record(args.record))
    print(cert.model_dump_json(indent=2))
    return 0


def register(subparsers) -> None:
    nash_p = subparsers.add_parser("nash", help="Coupled-CARE Nash gains of a scenario")
    nash_p.add_argument("--config", required=True, help="Scenario JSON file")
    nash_p.set_defaults(handler=nash)

    cert_p = subparsers.add_parser("certify", help="Recompute the epsilon certificate of a saved run")
    cert_p.add_argument("--record", required=True, help="summary.json or the directory holding it")
    cert_p.set_defaults(handler=certify)
