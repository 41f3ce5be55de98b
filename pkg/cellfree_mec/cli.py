# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
Command line entry point.

Runs a campaign (or re-reports a stored one) and writes CSV reports. Exit codes:
0 on success, 2 on configuration errors, 3 on I/O or database errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

from pathlib import Path

from cellfree_mec import __version__
from cellfree_mec.campaign import run_campaign
from cellfree_mec.config import ALL_MODES, load_campaign_config
from cellfree_mec.errors import ConfigurationError, StoreError
from cellfree_mec.report import emit_report
from cellfree_mec.store import load_metrics, verify_database

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

ARGUMENT_SPEC = {
    "config": {"type": Path, "help": "YAML campaign configuration"},
    "mode": {"default": None, "choices": list(ALL_MODES) + ["all"], "help": "mode to run"},
    "snapshots": {"type": int, "help": "number of network snapshots"},
    "seed": {"type": int, "help": "campaign seed"},
    "out": {"type": Path, "help": "output directory"},
    "realizations": {"type": int, "help": "extra channel realizations for ergodic SE"},
    "workers": {"type": int, "help": "worker processes"},
    "db": {"type": Path, "help": "also store the metrics in this SQLite database"},
    "report_from": {"type": Path, "help": "re-emit reports from a stored database"},
    "log_level": {
        "default": "WARNING",
        "choices": ["DEBUG", "INFO", "WARNING", "ERROR"],
        "help": "logging level",
    },
}


def build_parser():
    """Argument parser built from ARGUMENT_SPEC"""
    parser = argparse.ArgumentParser(
        prog="cellfree-mec",
        description="Joint power and compute allocation for MEC-enabled cell-free massive MIMO",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    for name, spec in ARGUMENT_SPEC.items():
        parser.add_argument(f"--{name.replace('_', '-')}", dest=name, **spec)
    return parser


def _overrides(args):
    return {
        "modes": args.mode,
        "snapshots": args.snapshots,
        "seed": args.seed,
        "output_dir": args.out,
        "realizations": args.realizations,
        "workers": args.workers,
    }


def main(argv=None):
    """Run the CLI and return the process exit code"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = load_campaign_config(args.config, _overrides(args))
    except ConfigurationError as error:
        print(f"Configuration error: {error}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as error:
        print(f"Cannot read configuration: {error}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.report_from is not None:
            if not verify_database(args.report_from):
                print(f"Not a valid results database: {args.report_from}", file=sys.stderr)
                return EXIT_IO
            metrics = load_metrics(args.report_from)
        else:
            metrics = run_campaign(config)
        emit_report(metrics, config.output_dir, database=args.db)
    except (OSError, StoreError) as error:
        print(f"I/O error: {error}", file=sys.stderr)
        return EXIT_IO

    logger.info("Reports written to %s", config.output_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
