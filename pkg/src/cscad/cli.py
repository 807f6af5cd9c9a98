"""Command line entry point.

    cscad <mine|train-recon|train-disc|detect|evaluate|run-all>
          --config <path> [--seed N] [--no-gcn] [--no-sigma]
          [--negatives p] [--labels <anomaly-id-file>]

Exit status is 0 on success. Any pipeline failure exits nonzero with a
stage-tagged message on stderr, e.g. "[train-disc] no reconstruction
checkpoint; run `cscad train-recon` first".
"""

import argparse
import sys
import time

from . import pipeline
from .disc import COMBINE_D_ONLY
from .exceptions import ConfigError, CscadError, StageError
from .metrics import save_timings_json

COMMANDS = pipeline.STAGE_ORDER + ("run-all",)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cscad",
        description="collective anomaly detection over a mined correlation structure",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="pipeline config (JSON)")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument(
        "--no-gcn",
        action="store_true",
        help="ablation: plain fully-connected reconstruction, no graph convolution",
    )
    parser.add_argument(
        "--no-sigma",
        action="store_true",
        help="ablation: rank and discriminate on reconstruction error only",
    )
    parser.add_argument(
        "--negatives",
        type=float,
        default=None,
        metavar="P",
        help="override the self-labeled negative fraction",
    )
    parser.add_argument(
        "--labels",
        default=None,
        metavar="FILE",
        help="newline-separated ids of known anomalies to inject as negatives",
    )
    return parser


def apply_overrides(config, args):
    if args.seed is not None:
        config.seed = args.seed
    if args.no_gcn:
        config.use_gcn = False
    if args.no_sigma:
        config.use_sigma = False
        config.combine_rule = COMBINE_D_ONLY
    if args.negatives is not None:
        if not 0.0 < args.negatives < 1.0:
            raise ConfigError(f"--negatives must be in (0, 1), got {args.negatives}")
        config.negative_fraction = args.negatives
    if args.labels is not None:
        config.labels_file = args.labels
    config.validate_files()
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = pipeline.load_config(args.config)
        config = apply_overrides(config, args)
    except CscadError as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 1
    if args.command == "run-all":
        try:
            report = pipeline.run_all(config)
        except StageError as exc:
            print(exc, file=sys.stderr)
            return 1
        print(f"precision={report.precision:.4f} recall={report.recall:.4f} f1={report.f1:.4f}")
        return 0
    runner = pipeline._STAGE_RUNNERS[args.command]
    started = time.perf_counter()
    try:
        result = runner(config)
    except CscadError as exc:
        print(StageError(args.command, exc), file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - started
    if args.command == pipeline.STAGE_EVALUATE:
        print(
            f"precision={result.precision:.4f} recall={result.recall:.4f} f1={result.f1:.4f}"
        )
    else:
        print(f"[{args.command}] done in {elapsed:.1f}s, artifacts in {config.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
