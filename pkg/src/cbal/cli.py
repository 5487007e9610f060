"""Command line: ``cbal run|validate|plotdata|list-strategies``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfg
from .bench import AggregateReport, emit_plotdata, run_bench
from .strategy import STRATEGIES

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

STRATEGY_HELP = {
    "cbal": "uncertainty x density candidates, then expected cost + Bayes risk",
    "random": "uniform draw without replacement",
    "entropy": "highest posterior entropy",
    "margin": "smallest top-2 posterior margin",
    "coreset": "greedy k-center from the labeled set",
    "bald": "highest vote entropy of a bootstrap committee",
}


def _split_overrides(extra: list[str]) -> dict[str, str]:
    overrides = {}
    for item in extra:
        if not item.startswith("--") or "=" not in item:
            raise cfg.ConfigError(item, "overrides must look like --key=value")
        key, value = item[2:].split("=", 1)
        overrides[key.replace("-", "_")] = value
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every strategy x seed and aggregate")
    run.add_argument("config")
    val = sub.add_parser("validate", help="check a config file and print the parsed settings")
    val.add_argument("config")
    plot = sub.add_parser("plotdata", help="write per-dataset plot tables from an aggregate file")
    plot.add_argument("aggregate")
    plot.add_argument("--out", help="output directory (default: plots/ next to the aggregate file)")
    sub.add_parser("list-strategies", help="print the available strategy names")
    sub.add_parser("list-keys", help="print the accepted config keys")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list-strategies":
        for name in STRATEGIES:
            print(f"{name:10s} {STRATEGY_HELP[name]}")
        return EXIT_OK
    if args.command == "list-keys":
        for key, (default, text) in cfg.KEYS.items():
            print(f"{key:22s} default={default!s:14s} {text}")
        return EXIT_OK
    if args.command == "plotdata":
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        path = Path(args.aggregate)
        try:
            report = AggregateReport.from_json(path.read_text())
        except (OSError, ValueError, TypeError) as exc:
            print(f"error: cannot read aggregate file {path}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        for written in emit_plotdata(report, args.out or path.parent / "plots"):
            print(written)
        return EXIT_OK

    try:
        config = cfg.load(args.config, _split_overrides(extra))
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"config ok (hash {config.hash()})")
        for key in cfg.KEYS:
            print(f"  {key} = {config.values[key]}")
        return EXIT_OK

    try:
        report = run_bench(config)
    except Exception as exc:
        logging.getLogger("cbal").exception("benchmark failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for row in report.summary:
        print(f"{row['dataset']:12s} {row['strategy']:8s} final={row['final_accuracy']:.4f} "
              f"auc={row['auc']:.4f} seeds={row['n_seeds']}")
    print(f"wrote {Path(config.output_dir) / 'aggregate.json'}")
    if report.failures:
        for f in report.failures:
            print(f"failed: {f['dataset']} {f['strategy']} seed={f['seed']}: {f['error']}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
