"""Verbs that run experiments: run, compare-ls."""
import argparse
import json
import logging
from pathlib import Path

from robust_game.export import export_comparison, export_record
from robust_game.harness import run_algorithm1, run_ls_comparison, run_seed_sweep
from robust_game.schemas import load_scenario
from robust_game.settings import get_settings

logger = logging.getLogger(__name__)


def _out_dir(args, config) -> Path:
    return Path(args.out) if args.out else get_settings().output_dir / config.name


def run_experiment(args: argparse.Namespace) -> int:
    """
    Run: learn a robust gain for a scenario and export the record.
    """
    config = load_scenario(args.config)
    record = run_algorithm1(config, seed=args.seed, max_iterations=args.max_iters)
    out = export_record(record, _out_dir(args, config))
    terminal = record.terminal
    print(json.dumps({
        "out": str(out),
        "iterations": len(record.iterations) - 1,
        "stop_reason": terminal.stop_reason,
        "K1_final": terminal.K1_final,
        "K1_star": terminal.K1_star,
        "gap_inf": terminal.gap_inf,
        "epsilon": terminal.certificate.epsilon if terminal.certificate else None,
    }, indent=2))
    return 0


def compare_ls(args: argparse.Namespace) -> int:
    """
    Compare-ls: robust-set gain versus least-squares gain on one batch, or a sweep over seeds.
    """
    config = load_scenario(args.config)
    base = config.seed if args.seed is None else args.seed
    if args.seeds > 1:
        records = run_seed_sweep(config, range(base, base + args.seeds), n_samples=args.samples)
    else:
        records = [run_ls_comparison(config, n_samples=args.samples, seed=base)]

    out = _out_dir(args, config)
    summary = []
    for rec in records:
        target = out / f"seed_{rec.seed}" if len(records) > 1 else out
        export_comparison(rec, target)
        summary.append({
            "seed": rec.seed,
            "robust_all_stable": rec.robust_all_stable,
            "ls_all_stable": rec.ls_all_stable,
            "robust_worst_abscissa": max(rec.robust_abscissa),
            "ls_worst_abscissa": max(rec.ls_abscissa),
        })
    n_fail = sum(not s["ls_all_stable"] for s in summary)
    logger.info("LS gain destabilized some vertex in %d of %d seeds", n_fail, len(summary))
    print(json.dumps({"out": str(out), "runs": summary}, indent=2))
    return 0


def register(subparsers) -> None:
    run = subparsers.add_parser("run", help="Learn a robust gain online and export the record")
    run.add_argument("--config", required=True, help="Scenario JSON file")
    run.add_argument("--out", help="Output directory")
    run.add_argument("--seed", type=int, help="Override the scenario seed")
    run.add_argument("--max-iters", dest="max_iters", type=int, help="Override max_iterations")
    run.set_defaults(handler=run_experiment)

    cmp_ = subparsers.add_parser("compare-ls", help="Robust-set versus least-squares gain")
    cmp_.add_argument("--config", required=True, help="Scenario JSON file")
    cmp_.add_argument("--out", help="Output directory")
    cmp_.add_argument("--seed", type=int, help="First seed")
    cmp_.add_argument("--samples", type=int, default=9, help="Samples in the data batch")
    cmp_.add_argument("--seeds", type=int, default=1, help="Number of consecutive seeds to sweep")
    cmp_.set_defaults(handler=compare_ls)
