#!/usr/bin/env python3
"""
SFN pipeline command line.

Subcommands:
    generate-synthetic    render the seeded synthetic dataset
    analyze               answer/question statistics, n-grams, image sizes
    resample              merge train + valid and split them again (19:1)
    pretrain-categorizer  stage 1: question categorizer
    pretrain-fusion       stage 2: encoders + Fusion I/II, C4 excluded
    train --stage         stage 3: if1c baseline or sfn
    evaluate              metrics report on one or more answered splits
    predict               image_id|answer lines for a split

Exit codes: 0 on success, 1 on a pipeline or configuration error, 2 on usage errors.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from sfn_vqa.config import (
    AppConfig,
    echo_config,
    get_config,
    print_config_help,
)
from sfn_vqa.core import close_run_log, end_session, start_session
from sfn_vqa.core.exceptions import ConfigError, DatasetError, SFNError
from sfn_vqa.core.logging import get_logger, setup_logging

logger = get_logger(__name__)


# ============================================================================
# ARGUMENTS
# ============================================================================

def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file merged over the defaults")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one configuration key (repeatable)",
    )
    common.add_argument("--seed", type=int, help="seed for generation, resampling and training")
    common.add_argument("--threads", type=int, help="worker threads; 1 selects the deterministic mode")
    common.add_argument(
        "--log-level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL", "QUIET", "OFF"],
        help="overrides logging.level",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="sfn-vqa",
        description="Supporting Facts Network pipeline for medical visual question answering.",
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    generate = commands.add_parser("generate-synthetic", parents=[common], help="render the synthetic dataset")
    generate.add_argument("--out", required=True, help="dataset directory to create")

    analyze = commands.add_parser("analyze", parents=[common], help="dataset analysis report")
    analyze.add_argument("--data", required=True, help="dataset directory")
    analyze.add_argument("--out", required=True, help="report directory")

    resample = commands.add_parser("resample", parents=[common], help="re-split train + valid")
    resample.add_argument("--data", required=True, help="dataset directory")
    resample.add_argument("--out", required=True, help="directory of the resampled dataset")

    for name, help_text in (
        ("pretrain-categorizer", "pretrain the question categorizer"),
        ("pretrain-fusion", "pretrain Input Fusion on C1, C2, C3 and Binary"),
    ):
        stage = commands.add_parser(name, parents=[common], help=help_text)
        stage.add_argument("--data", required=True, help="dataset directory")
        stage.add_argument("--out", required=True, help="checkpoint directory")

    train = commands.add_parser("train", parents=[common], help="train the if1c baseline or the sfn")
    train.add_argument("--stage", required=True, choices=["if1c", "sfn"])
    train.add_argument("--data", required=True, help="dataset directory")
    train.add_argument("--out", required=True, help="checkpoint directory")
    train.add_argument("--categorizer", help="categorizer checkpoint directory (sfn)")
    train.add_argument("--fusion", help="input_fusion checkpoint directory")

    evaluate = commands.add_parser("evaluate", parents=[common], help="metrics on answered splits")
    evaluate.add_argument("--checkpoint", required=True, help="if1c or sfn checkpoint directory")
    evaluate.add_argument("--data", required=True, help="dataset directory")
    evaluate.add_argument("--split", dest="splits", action="append", help="split to score (repeatable, default valid)")
    evaluate.add_argument("--out", required=True, help="report directory")

    predict = commands.add_parser("predict", parents=[common], help="predict answers for a split")
    predict.add_argument("--checkpoint", required=True, help="if1c or sfn checkpoint directory")
    predict.add_argument("--data", required=True, help="dataset directory")
    predict.add_argument("--split", default="test", help="split to answer (default test)")
    predict.add_argument("--out", help="directory for predictions.txt; stdout when omitted")
    return parser


def _overrides(args: argparse.Namespace) -> List[str]:
    overrides = list(args.overrides)
    if args.seed is not None:
        for key in ("synthetic.seed", "resample.seed", "training.seed"):
            overrides.append(f"{key}={args.seed}")
    if args.threads is not None:
        overrides.append(f"runtime.threads={args.threads}")
    if args.log_level:
        overrides.append(f"logging.level={args.log_level}")
    return overrides


# ============================================================================
# COMMANDS
# ============================================================================

def _load(args: argparse.Namespace, config: AppConfig, split: str):
    from sfn_vqa.data import load_split

    return load_split(args.data, config, split)


def _optional_split(args: argparse.Namespace, config: AppConfig, split: str):
    from sfn_vqa.data import resolve_split

    try:
        resolve_split(args.data, config, split)
    except DatasetError as e:
        logger.warning(f"Skipping split '{split}': {e}")
        return None
    return _load(args, config, split)


def cmd_generate_synthetic(args: argparse.Namespace, config: AppConfig) -> None:
    from sfn_vqa.data.synthetic import generate_synthetic

    counts = generate_synthetic(config.synthetic, Path(args.out))
    for split, numbers in counts.items():
        print(f"{split}: {numbers['images']} images, {numbers['questions']} questions")


def cmd_analyze(args: argparse.Namespace, config: AppConfig) -> None:
    from sfn_vqa.analysis import analyze_dataset, emit_report

    train = _load(args, config, "train")
    valid = _optional_split(args, config, "valid")
    report = analyze_dataset(train, valid, config.analysis.prefix_tokens)
    written = emit_report(report, Path(args.out), plots=config.analysis.plots)
    print(f"Wrote {len(written)} report files to {args.out}")


def cmd_resample(args: argparse.Namespace, config: AppConfig) -> None:
    from sfn_vqa.analysis import resample_split, write_resampled
    from sfn_vqa.data import resolve_split, split_layout

    train = _load(args, config, "train")
    valid = _load(args, config, "valid")
    new_train, new_valid = resample_split(
        train, valid, tuple(config.resample.ratio), config.resample.seed, config.resample.stratified
    )
    out = Path(args.out)
    extra = {}
    try:
        resolve_split(args.data, config, "test")
        pattern, image_dirs = split_layout(args.data, config, "test")
    except DatasetError:
        logger.info("No test split found; the resampled dataset has train and valid only")
    else:
        # the test split is referenced in place, never resampled
        data_root = Path(args.data)
        extra["test"] = {
            "questions": os.path.relpath(data_root / pattern, out),
            "images": [os.path.relpath(data_root / d, out) for d in image_dirs],
        }
    write_resampled({"train": new_train, "valid": new_valid}, out, extra)
    print(f"train: {len(new_train)}, valid: {len(new_valid)}")


def cmd_pretrain_categorizer(args: argparse.Namespace, config: AppConfig) -> None:
    from sfn_vqa.training.stages import pretrain_categorizer

    checkpoint = pretrain_categorizer(
        _load(args, config, "train"), _load(args, config, "valid"), config, out_dir=Path(args.out)
    )
    print(f"categorizer: best validation accuracy epoch {checkpoint.metadata.get('best_epoch')}")


def cmd_pretrain_fusion(args: argparse.Namespace, config: AppConfig) -> None:
    from sfn_vqa.training.stages import pretrain_input_fusion

    checkpoint = pretrain_input_fusion(
        _load(args, config, "train"), _load(args, config, "valid"), config, out_dir=Path(args.out)
    )
    print(f"input_fusion: best epoch {checkpoint.metadata.get('best_epoch')}")


def cmd_train(args: argparse.Namespace, config: AppConfig) -> None:
    from sfn_vqa.training import load_checkpoint
    from sfn_vqa.training.stages import require_pretrained, train_model

    pretrained = {}
    if args.categorizer:
        pretrained["categorizer"] = load_checkpoint(args.categorizer)
    if args.fusion:
        pretrained["input_fusion"] = load_checkpoint(args.fusion)
    require_pretrained(args.stage, pretrained)
    checkpoint = train_model(
        _load(args, config, "train"),
        _load(args, config, "valid"),
        config,
        pretrained,
        stage=args.stage,
        out_dir=Path(args.out),
    )
    print(f"{args.stage}: best validation F1 {checkpoint.metadata.get('best_val_f1')}")


def cmd_evaluate(args: argparse.Namespace, config: AppConfig) -> None:
    from sfn_vqa.metrics import format_table, write_examples, write_metrics
    from sfn_vqa.training.inference import evaluate_splits, load_model

    model, checkpoint = load_model(args.checkpoint)
    splits = {name: _load(args, config, name) for name in (args.splits or ["valid"])}
    reports, answers = evaluate_splits(model, checkpoint, splits, config)
    out = Path(args.out)
    write_metrics(reports, out)
    for name, split in splits.items():
        write_examples(split, answers[name], out / f"examples_{name}.txt", config.metrics.examples)
    print(format_table(reports), end="")


def cmd_predict(args: argparse.Namespace, config: AppConfig) -> None:
    from sfn_vqa.training.inference import load_model, predict_split

    model, checkpoint = load_model(args.checkpoint)
    split = _load(args, config, args.split)
    predictions = predict_split(model, checkpoint, split, config)
    lines = "".join(f"{sample.image_id}|{p.answer}\n" for sample, p in zip(split, predictions))
    if args.out:
        target = Path(args.out) / "predictions.txt"
        try:
            target.write_text(lines, encoding="utf-8")
        except OSError as e:
            raise SFNError(f"Cannot write predictions to {target}: {e}") from e
        logger.info(f"Wrote {len(predictions)} predictions to {target}")
    else:
        sys.stdout.write(lines)


# These commands write a dataset into --out; its tree holds only the dataset files.
DATASET_COMMANDS = frozenset({"generate-synthetic", "resample"})

COMMANDS: Dict[str, Callable[[argparse.Namespace, AppConfig], None]] = {
    "generate-synthetic": cmd_generate_synthetic,
    "analyze": cmd_analyze,
    "resample": cmd_resample,
    "pretrain-categorizer": cmd_pretrain_categorizer,
    "pretrain-fusion": cmd_pretrain_fusion,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
}


# ============================================================================
# ENTRY POINTS
# ============================================================================

def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        config = get_config(args.config, _overrides(args))
    except ConfigError as e:
        print(f"Configuration Error: {e}", file=sys.stderr)
        print_config_help()
        return 1

    out = Path(args.out) if getattr(args, "out", None) else None
    if args.command in DATASET_COMMANDS:
        out = None
    setup_logging(config.logging.level, log_file=str(out / "run.log") if out is not None else None)

    session_id = None
    if config.logging.telemetry:
        session_id = start_session(Path(config.logging.logs_dir))
        logger.info(f"Telemetry enabled. Session ID: {session_id}")

    try:
        if out is not None:
            echo_config(config, out)
        COMMANDS[args.command](args, config)
        return 0
    except SFNError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"An unexpected error occurred in {args.command}: {e}", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return 1
    finally:
        if session_id:
            end_session()
        close_run_log()


def main():
    """Console script entry point."""
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        logger.info("Stopped by user")
        sys.exit(130)


__all__ = ["main", "run", "build_parser"]

if __name__ == "__main__":
    main()
