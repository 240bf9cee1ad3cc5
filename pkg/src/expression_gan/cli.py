"""
Command-line entry point.

    expression-gan [--config FILE] [--override KEY=VALUE ...] [--output-dir DIR]
                   [--dry-run] [--log-level LEVEL] <subcommand> ...

Subcommands: prepare-data, train, generate, evaluate, augment-eval. Every output is
written under the output directory. Exit codes: 0 success, 1 validation error,
2 runtime abort.
"""

import os
import sys
import json
import logging
import argparse
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv

from .config import TrainConfig
from .config_manager import DEFAULT_CONFIG_FILE, apply_overrides, default_output_dir, load_config, save_config
from .errors import (CheckpointError, ConfigError, DatasetError, EmbedderNotFrozenError, ExpressionGANError,
                     LabelError, LandmarkExtractionError, ManifestError, TrainingAbortedError)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

VALIDATION_ERRORS = (ConfigError, ManifestError, LabelError, DatasetError, LandmarkExtractionError,
                     EmbedderNotFrozenError)
RUNTIME_ERRORS = (TrainingAbortedError, CheckpointError)

SUBCOMMANDS = ("prepare-data", "train", "generate", "evaluate", "augment-eval")


class UsageError(ConfigError):
    """Raised for unknown subcommands, flags or malformed arguments."""
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _add_common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    """Global flags; subcommands accept them too, without resetting values given before the subcommand."""
    def default(value: Any) -> Any:
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--config", default=default(None),
                        help="JSON config file (defaults to config.json in the project root)")
    parser.add_argument("--override", "-o", action="append", default=default([]), metavar="KEY=VALUE",
                        help="Override a config value; repeatable; dotted keys for nested values")
    parser.add_argument("--output-dir", default=default(None),
                        help="Output directory (default: $EXPRESSION_GAN_OUTPUT_DIR or ./outputs)")
    parser.add_argument("--dry-run", action="store_true", default=default(False),
                        help="Validate and print the effective configuration")
    parser.add_argument("--log-level", default=default("INFO"), choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--no-progress", action="store_true", default=default(False), help="Disable progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="expression-gan", description="Landmark-guided facial expression translation")
    _add_common(parser, suppress=False)
    common = _Parser(add_help=False)
    _add_common(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    prep = sub.add_parser("prepare-data", parents=[common],
                          help="Build train/test manifests from a raw directory or a synthetic corpus")
    source = prep.add_mutually_exclusive_group(required=True)
    source.add_argument("--raw", help="Raw directory <raw>/<subject>/<expression>[_<level>].png")
    source.add_argument("--synthetic", action="store_true", help="Render a synthetic corpus")
    prep.add_argument("--subjects", type=int, default=4, help="Synthetic subjects")
    prep.add_argument("--expressions", help="Comma-separated expression vocabulary")
    prep.add_argument("--intensities", type=int, default=1, help="Synthetic intensity levels")
    prep.add_argument("--overlay-markers", action="store_true",
                      help="Draw landmark markers on synthetic faces (resolution >= 512)")
    prep.add_argument("--split", choices=["subject", "fraction"], default="subject")
    prep.add_argument("--holdout", type=int, default=1, help="Held-out subjects for --split subject")
    prep.add_argument("--test-fraction", type=float, default=0.33, help="Test share for --split fraction")

    train = sub.add_parser("train", parents=[common], help="Train both stages")
    train.add_argument("--manifest", required=True, help="Training manifest")
    train.add_argument("--embedder", help="Pretrained identity embedder file")
    train.add_argument("--no-resume", action="store_true", help="Ignore existing checkpoints")

    gen = sub.add_parser("generate", parents=[common], help="Translate one face to a target expression")
    gen.add_argument("--checkpoint", required=True)
    gen.add_argument("--input", required=True, help="Input face image")
    gen.add_argument("--expression", required=True)
    gen.add_argument("--intensity", type=int)
    gen.add_argument("--stochastic", action="store_true", help="Keep dropout active")

    ev = sub.add_parser("evaluate", parents=[common], help="Compute quality metrics on a test manifest")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--manifest", required=True, help="Test manifest")

    aug = sub.add_parser("augment-eval", parents=[common],
                         help="Expression classification with generated training data")
    aug.add_argument("--checkpoint", required=True)
    aug.add_argument("--train-manifest", required=True)
    aug.add_argument("--test-manifest", required=True)
    aug.add_argument("--modes", help="Comma-separated subset of Real/Real,Real/Syn,Real+Nor,Real+Syn")
    aug.add_argument("--save-synthetic", action="store_true", help="Also write the generated set as a manifest")
    return parser


def resolve_config(config_path: Optional[str], overrides: Sequence[str]) -> TrainConfig:
    """Defaults < config file < overrides."""
    return TrainConfig.from_dict(apply_overrides(load_config(config_path), overrides))


def describe_precedence(config_path: Optional[str], overrides: Sequence[str]) -> str:
    source = config_path or (DEFAULT_CONFIG_FILE if os.path.exists(DEFAULT_CONFIG_FILE) else "none")
    applied = ", ".join(overrides) if overrides else "none"
    return f"Configuration precedence: defaults < file ({source}) < overrides ({applied})"


def _progress(args: argparse.Namespace) -> bool:
    return not args.no_progress


def cmd_prepare_data(args: argparse.Namespace, config: TrainConfig, output_dir: str) -> Dict[str, Any]:
    from .data import DEFAULT_EXPRESSIONS, SplitPolicy, ingest_raw_directory, split, synth_corpus, write_manifest

    expressions = [e.strip() for e in args.expressions.split(",") if e.strip()] if args.expressions else None
    if args.raw:
        dataset = ingest_raw_directory(args.raw, config.resolution, expressions)
    else:
        dataset = synth_corpus(args.subjects, expressions or DEFAULT_EXPRESSIONS, args.intensities,
                               config.resolution, config.seed, args.overlay_markers)
    policy = (SplitPolicy.subject_holdout(args.holdout) if args.split == "subject"
              else SplitPolicy.sample_fraction(args.test_fraction))
    train_set, test_set = split(dataset, policy, config.seed)
    data_dir = os.path.join(output_dir, "data")
    return {
        "train_manifest": write_manifest(train_set, os.path.join(data_dir, "train.jsonl")),
        "test_manifest": write_manifest(test_set, os.path.join(data_dir, "test.jsonl")),
        "train_samples": len(train_set),
        "test_samples": len(test_set),
    }


def cmd_train(args: argparse.Namespace, config: TrainConfig, output_dir: str) -> Dict[str, Any]:
    from .data import load_manifest
    from .identity import load_embedder
    from .trainer import train

    dataset = load_manifest(args.manifest, config.resolution)
    embedder = load_embedder(args.embedder) if args.embedder else None
    os.makedirs(output_dir, exist_ok=True)
    save_config(config.to_dict(), os.path.join(output_dir, "config.json"))
    checkpoints = train(dataset, config, output_dir, embedder, resume=not args.no_resume, progress=_progress(args))
    return {"checkpoints": checkpoints}


def cmd_generate(args: argparse.Namespace, config: TrainConfig, output_dir: str) -> Dict[str, Any]:
    from .inference import generate, resolve_checkpoint
    from .utils.images import load_image, save_png
    from .utils.reporting import write_json

    state = resolve_checkpoint(args.checkpoint)
    image, _ = load_image(args.input, state.resolution)
    result = generate(state, image, args.expression, args.intensity, deterministic=not args.stochastic)

    stem = os.path.splitext(os.path.basename(args.input))[0]
    tag = args.expression if result.intensity is None else f"{args.expression}_{result.intensity}"
    out = os.path.join(output_dir, "generated")
    paths = {
        "face": os.path.join(out, f"{stem}_{tag}_face.png"),
        "landmark_image": os.path.join(out, f"{stem}_{tag}_landmarks.png"),
        "landmarks": os.path.join(out, f"{stem}_{tag}_landmarks.json"),
    }
    save_png(result.face.clip(-1.0, 1.0), paths["face"])
    save_png(result.landmark_image.image, paths["landmark_image"])
    write_json(result.to_dict(), paths["landmarks"])
    return paths


def cmd_evaluate(args: argparse.Namespace, config: TrainConfig, output_dir: str) -> Dict[str, Any]:
    from .data import load_manifest
    from .inference import resolve_checkpoint
    from .metrics import evaluate_model
    from .utils.reporting import write_json

    state = resolve_checkpoint(args.checkpoint)
    test = load_manifest(args.manifest, state.resolution)
    paths = {
        "metrics": os.path.join(output_dir, "metrics.json"),
        "table": os.path.join(output_dir, "metrics.txt"),
        "samples": os.path.join(output_dir, "samples.png"),
    }
    report = evaluate_model(state, test, config.seed, sheet_path=paths["samples"])
    write_json(report.to_dict(), paths["metrics"])
    with open(paths["table"], "w") as f:
        f.write(report.to_text() + "\n")
    print(report.to_text())
    return paths


def cmd_augment_eval(args: argparse.Namespace, config: TrainConfig, output_dir: str) -> Dict[str, Any]:
    from .data import load_manifest, write_manifest
    from .inference import resolve_checkpoint, synthesize_dataset
    from .metrics import augmentation_experiment
    from .utils.reporting import write_json

    state = resolve_checkpoint(args.checkpoint)
    real_train = load_manifest(args.train_manifest, state.resolution)
    real_test = load_manifest(args.test_manifest, state.resolution)
    modes = [m.strip() for m in args.modes.split(",")] if args.modes else None
    synth = synthesize_dataset(state, real_train, config.seed, deterministic=config.eval_deterministic)
    table = augmentation_experiment(real_train, synth, real_test, modes, config.seed, progress=_progress(args))

    paths = {
        "accuracy": os.path.join(output_dir, "augmentation.json"),
        "table": os.path.join(output_dir, "augmentation.txt"),
    }
    write_json(table.to_dict(), paths["accuracy"])
    with open(paths["table"], "w") as f:
        f.write(table.to_text() + "\n")
    if args.save_synthetic:
        paths["synthetic_manifest"] = write_manifest(synth, os.path.join(output_dir, "synthetic", "manifest.jsonl"))
    print(table.to_text())
    return paths


COMMANDS = {
    "prepare-data": cmd_prepare_data,
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "augment-eval": cmd_augment_eval,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map errors to exit codes.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:]).

    Returns:
        0 on success, 1 on a validation error, 2 on a runtime abort.
    """
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    try:
        config = resolve_config(args.config, args.override)
        output_dir = os.path.abspath(args.output_dir or default_output_dir())
        print(describe_precedence(args.config, args.override), file=sys.stderr)
        if args.dry_run:
            print(json.dumps({"command": args.command, "output_dir": output_dir, "config": config.to_dict()},
                             indent=2, sort_keys=True))
            return EXIT_OK
        result = COMMANDS[args.command](args, config, output_dir)
        print(json.dumps(result, indent=2, sort_keys=True))
        return EXIT_OK
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except RUNTIME_ERRORS as e:
        print(f"aborted: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except ExpressionGANError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as e:
        logger.error(f"I/O failure: {e}")
        print(f"aborted: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
