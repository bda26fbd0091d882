# Copyright (C) 2025 AIDC-AI
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#     http://www.apache.org/licenses/LICENSE-2.0
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Command-line interface

    csvmasr gen-data --out data/corpus.jsonl
    csvmasr train --corpus data/corpus.jsonl --variant csv --out runs/csv
    csvmasr eval --checkpoint runs/csv/avg.ckpt --prompt allhot
    csvmasr sweep --checkpoint runs/csv/avg.ckpt
    csvmasr gradcheck

Exit codes: 0 success, 1 usage error, 2 runtime failure (including a
failed gradcheck).
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml
from loguru import logger
from pydantic import ValidationError

from csvmasr.config import config_manager, deep_merge
from csvmasr.config.schema import CsvMasrConfig, RoutingVariant
from csvmasr.errors import CorpusMismatchError, CsvMasrError, UsageError
from csvmasr.models.routing import Prompt
from csvmasr.service import CsvMasrCore
from csvmasr.utils.os_util import ROOT_ENV, resolve_path
from csvmasr.utils.parallel import THREADS_ENV, resolve_threads

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2

DEFAULTS = CsvMasrConfig()
VARIANTS = [v.value for v in RoutingVariant]
LOG_FORMAT = "<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}"


class _Parser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _override(parser, flag: str, help_text: str, default: Any, **kwargs):
    """Flag that only overrides the configuration when given"""
    parser.add_argument(flag, default=argparse.SUPPRESS, help=f"{help_text} (default: {default})", **kwargs)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default="config.yaml", help="YAML configuration file")
    common.add_argument("--log-level", default=None,
                        choices=["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"],
                        help=f"Console log level (config runtime.log_level, {DEFAULTS.runtime.log_level})")
    common.add_argument("--threads", type=int, default=None,
                        help=f"Worker threads (falls back to ${THREADS_ENV}, then runtime.threads)")

    parser = _Parser(
        prog="csvmasr",
        description=(
            "Configurable multilingual ASR with summary-vector-routed adapters. "
            f"Relative --out, --corpus and --checkpoint paths resolve against ${ROOT_ENV} when set."
        ),
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    commands.required = True

    def command(name: str, help_text: str):
        return commands.add_parser(
            name, parents=[common], help=help_text, description=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )

    corpus = DEFAULTS.corpus
    gen = command("gen-data", "Generate the synthetic multilingual corpus")
    gen.add_argument("--out", default="data/corpus.jsonl", help="Corpus JSON-lines file")
    _override(gen, "--seed", "Corpus seed", corpus.seed, type=int)
    _override(gen, "--num-languages", "Number of languages L", corpus.num_languages, type=int)
    _override(gen, "--tokens-per-language", "Content tokens per language", corpus.tokens_per_language, type=int)
    _override(gen, "--d-feat", "Feature dimension", corpus.d_feat, type=int)
    _override(gen, "--frames-per-token", "Frames per token", corpus.frames_per_token, type=int)
    _override(gen, "--noise-sigma", "Feature noise std", corpus.noise_sigma, type=float)
    _override(gen, "--train-per-language", "Train utterances per language", corpus.train_per_language, type=int)
    _override(gen, "--val-per-language", "Validation utterances per language", corpus.val_per_language, type=int)
    _override(gen, "--test-per-language", "Test utterances per language", corpus.test_per_language, type=int)

    train_cfg, loss = DEFAULTS.train, DEFAULTS.loss
    train = command("train", "Train one routing variant and average its best checkpoints")
    train.add_argument("--corpus", default="data/corpus.jsonl", help="Corpus file from gen-data")
    train.add_argument("--out", default="runs/train", help="Output directory")
    _override(train, "--variant", "Routing variant", train_cfg.variant.value, choices=VARIANTS)
    _override(train, "--epochs", "Training epochs", train_cfg.epochs, type=int)
    _override(train, "--batch-size", "Utterances per batch", train_cfg.batch_size, type=int)
    _override(train, "--lr", "Adam learning rate", train_cfg.learning_rate, type=float)
    _override(train, "--p-insert", "Probability of inserting each wrong LID", train_cfg.p_insert, type=float)
    _override(train, "--k-average", "Checkpoints averaged", train_cfg.k_average, type=int)
    _override(train, "--seed", "Training seed", train_cfg.seed, type=int)
    _override(train, "--precision", "Float width", train_cfg.precision, type=int, choices=[32, 64])
    _override(train, "--lambda", "Language loss weight", loss.lambda_, type=float, dest="lambda_")
    _override(train, "--beta", "CTC weight inside the ASR loss", loss.beta, type=float)
    _override(train, "--val-prompt", "Prompt for validation metrics", train_cfg.val_prompt)
    _override(train, "--train-languages", "Comma-separated language ids to train on", "all", type=_int_list)
    _override(
        train, "--adapters", "Comma-separated 1-based encoder layers holding adapters",
        ",".join(str(n) for n in DEFAULTS.encoder.adapter_layers), type=_int_list,
    )

    eval_cfg = DEFAULTS.eval
    evaluate = command("eval", "Evaluate a checkpoint: WER and per-layer language accuracy")
    evaluate.add_argument("--checkpoint", "--ckpt", dest="checkpoint", required=True, help="Checkpoint file")
    evaluate.add_argument("--corpus", default=None, help="Corpus file (default: the one used for training)")
    evaluate.add_argument("--out", default=None, help="Report directory (default: <checkpoint dir>/eval)")
    _override(evaluate, "--prompt", "1hot, allhot, nogt or mask=<bits>", eval_cfg.prompt)
    _override(evaluate, "--decode-mode", "Decoding", eval_cfg.decode_mode, choices=["ar", "nar", "both"])
    _override(evaluate, "--split", "Corpus split", eval_cfg.split, choices=["train", "val", "test"])
    evaluate.add_argument("--two-hot", action="store_true", help="Also write the 2-hot prompting matrix")

    sweep = command("sweep", "WER against the number of additional prompted languages")
    sweep.add_argument("--checkpoint", "--ckpt", dest="checkpoint", required=True, help="Checkpoint file")
    sweep.add_argument("--corpus", default=None, help="Corpus file (default: the one used for training)")
    sweep.add_argument("--out", default=None, help="Report directory (default: <checkpoint dir>/sweep)")
    sweep.add_argument("--decode-mode", default="nar", choices=["ar", "nar"], help="Decoding")
    sweep.add_argument("--languages", type=_int_list, default=None, help="Comma-separated languages (default: all)")
    _override(sweep, "--split", "Corpus split", eval_cfg.split, choices=["train", "val", "test"])
    sweep.add_argument("--no-svg", action="store_true", help="Skip the SVG chart")

    gradcheck = command("gradcheck", "Gradient, CTC and micro-model oracle checks")
    gradcheck.add_argument("--cases", type=int, default=100, help="Random cases per primitive op")
    gradcheck.add_argument("--seed", type=int, default=0, help="Seed for the random cases")
    gradcheck.add_argument("--variants", default="csv", help="Comma-separated variants for the micro-model check")
    return parser


def _updates(args: argparse.Namespace) -> Dict[str, Any]:
    """Configuration overrides from the flags actually given"""
    given = vars(args)
    mapping = {
        "gen-data": {
            "seed": ("corpus", "seed"),
            "num_languages": ("corpus", "num_languages"),
            "tokens_per_language": ("corpus", "tokens_per_language"),
            "d_feat": ("corpus", "d_feat"),
            "frames_per_token": ("corpus", "frames_per_token"),
            "noise_sigma": ("corpus", "noise_sigma"),
            "train_per_language": ("corpus", "train_per_language"),
            "val_per_language": ("corpus", "val_per_language"),
            "test_per_language": ("corpus", "test_per_language"),
        },
        "train": {
            "variant": ("train", "variant"),
            "epochs": ("train", "epochs"),
            "batch_size": ("train", "batch_size"),
            "lr": ("train", "learning_rate"),
            "p_insert": ("train", "p_insert"),
            "k_average": ("train", "k_average"),
            "seed": ("train", "seed"),
            "precision": ("train", "precision"),
            "lambda_": ("loss", "lambda"),
            "beta": ("loss", "beta"),
            "val_prompt": ("train", "val_prompt"),
            "train_languages": ("train", "languages"),
            "adapters": ("encoder", "adapter_layers"),
        },
        "eval": {
            "prompt": ("eval", "prompt"),
            "decode_mode": ("eval", "decode_mode"),
            "split": ("eval", "split"),
        },
        "sweep": {
            "split": ("eval", "split"),
        },
    }.get(args.command, {})

    updates: Dict[str, Any] = {}
    for flag, (section, key) in mapping.items():
        if flag in given:
            updates.setdefault(section, {})[key] = given[flag]
    if getattr(args, "no_svg", False):
        updates.setdefault("eval", {})["write_svg"] = False
    return updates


def resolve_config(args: argparse.Namespace) -> CsvMasrConfig:
    """
    File configuration, overlaid with flags and the resolved thread count

    Raises:
        UsageError: If the merged configuration is invalid
    """
    config_path = Path(args.config)
    if not config_path.exists() and args.config != "config.yaml":
        raise UsageError(f"config file not found: {config_path}")
    try:
        config_manager.use(str(config_path))
        merged = deep_merge(config_manager.config.to_dict(), _updates(args))
        threads = resolve_threads(args.threads, default=merged.get("runtime", {}).get("threads", 1))
        merged.setdefault("runtime", {})["threads"] = threads
        if args.log_level:
            merged["runtime"]["log_level"] = args.log_level
        config = CsvMasrConfig(**merged)
    except (ValidationError, ValueError, yaml.YAMLError) as e:
        raise UsageError(str(e)) from e
    config_manager.config = config

    for text in (config.eval.prompt, config.train.val_prompt):
        try:
            Prompt.parse(text)
        except (ValueError, CsvMasrError) as e:
            raise UsageError(str(e)) from e
    return config


def configure_logging(level: str, log_file: Optional[Path] = None):
    logger.remove()
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_file, level="DEBUG", mode="w", encoding="utf-8")


def _anchor_paths(args: argparse.Namespace):
    """Anchor relative --out, --corpus and --checkpoint paths at $CSVMASR_ROOT"""
    for name in ("out", "corpus", "checkpoint"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(args, name, str(resolve_path(value)))


def _output_dir(args: argparse.Namespace) -> Optional[Path]:
    if args.command == "train":
        return Path(args.out)
    if args.command == "eval":
        return Path(args.out) if args.out else Path(args.checkpoint).parent / "eval"
    if args.command == "sweep":
        return Path(args.out) if args.out else Path(args.checkpoint).parent / "sweep"
    return None


def _dispatch(args: argparse.Namespace, config: CsvMasrConfig) -> int:
    core = CsvMasrCore(config)
    if args.command == "gen-data":
        core.run("gen-data", out=args.out)
    elif args.command == "train":
        core.run("train", corpus=args.corpus, out_dir=args.out)
    elif args.command == "eval":
        core.run("eval", checkpoint=args.checkpoint, corpus=args.corpus, out_dir=args.out, two_hot=args.two_hot)
    elif args.command == "sweep":
        core.run(
            "sweep", checkpoint=args.checkpoint, corpus=args.corpus, out_dir=args.out,
            decode_mode=args.decode_mode, languages=args.languages,
        )
    elif args.command == "gradcheck":
        try:
            variants = [RoutingVariant(v.strip()) for v in args.variants.split(",") if v.strip()]
        except ValueError as e:
            raise UsageError(f"unknown variant in '{args.variants}', expected {', '.join(VARIANTS)}") from e
        results = core.run("gradcheck", cases=args.cases, seed=args.seed, variants=variants)
        failed = [r.name for r in results if not r.passed]
        if failed:
            logger.error(f"Gradient checks failed: {', '.join(failed)}")
            return EXIT_FAILURE
    return EXIT_OK


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run the subcommand and return the exit code"""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"csvmasr: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        _anchor_paths(args)
        configure_logging(args.log_level or "INFO")
        config = resolve_config(args)
        output_dir = _output_dir(args)
        configure_logging(config.runtime.log_level, output_dir / "run.log" if output_dir else None)
        return _dispatch(args, config)
    except (UsageError, CorpusMismatchError) as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except (CsvMasrError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return EXIT_FAILURE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
