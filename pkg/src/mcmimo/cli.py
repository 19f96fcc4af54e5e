"""Command-line entry point: run experiments, deterministic equivalents, checks.

Subcommands:
    run       Monte-Carlo sweep (plus deterministic-equivalent companions).
    detequiv  Deterministic-equivalent SE only, no channel realizations.
    validate  Built-in oracle/property checks.

On failure a machine-readable JSON error object is printed to stderr and the
exit code is nonzero.
"""

import argparse
import json
import sys

from .config import NetworkConfig, apply_overrides, config_from_mapping, load_config_file
from .results import emit_results, run_experiment
from .validate import run_validation


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcmimo",
        description="Multi-cell massive MIMO uplink SE simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("-c", "--config", help="key = value config file")
        p.add_argument(
            "-O", "--override", action="append", default=[], metavar="KEY=VALUE",
            help="override any config key (repeatable)",
        )
        p.add_argument("-o", "--output", default="results.csv",
                       help="output file path")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="output format (default: from file suffix)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for Monte-Carlo trials")

    run_p = sub.add_parser("run", help="Monte-Carlo experiment sweep")
    add_config_args(run_p)

    de_p = sub.add_parser(
        "detequiv", help="deterministic-equivalent SE only (no Monte Carlo)"
    )
    add_config_args(de_p)

    val_p = sub.add_parser("validate", help="run oracle/property self-checks")
    val_p.add_argument("--seed", type=int, default=0)
    return parser


def _load_config(args) -> NetworkConfig:
    values = load_config_file(args.config) if args.config else {}
    values = apply_overrides(values, args.override)
    return config_from_mapping(values)


def _resolve_format(args) -> str:
    if args.format:
        return args.format
    return "json" if str(args.output).endswith(".json") else "csv"


def _summarize(table, monte_carlo: bool) -> None:
    for row in table.rows:
        parts = [f"{row.scheme:7s} M={row.M:<4d} beta={row.beta} drop={row.drop}"]
        if row.error:
            parts.append(f"FAILED: {row.error}")
        else:
            if monte_carlo and row.sum_se is not None:
                parts.append(
                    f"sum SE/cell = {row.sum_se:8.3f} +- {row.sum_se_stderr:.3f}"
                )
            if row.detequiv_sum_se is not None:
                parts.append(f"detequiv = {row.detequiv_sum_se:8.3f}")
        print("  ".join(parts))


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            ok = run_validation(seed=args.seed)
            if not ok:
                _fail("ValidationError", "one or more self-checks failed")
                return 1
            return 0
        config = _load_config(args)
        monte_carlo = args.command == "run"
        table = run_experiment(config, workers=args.workers,
                               monte_carlo=monte_carlo)
        _summarize(table, monte_carlo)
        emit_results(table, _resolve_format(args), args.output)
        print(f"wrote {len(table.rows)} rows to {args.output}")
        return 0
    except Exception as exc:
        _fail(type(exc).__name__, str(exc))
        return 1


def _fail(kind: str, message: str) -> None:
    json.dump({"error": kind, "message": message}, sys.stderr)
    sys.stderr.write("\n")


if __name__ == "__main__":
    sys.exit(main())
