"""Command-line entry point.

    python -m src.cli <subcommand> [--config FILE] [flags]

Exit status: 0 on success, 1 when the input or configuration is invalid,
2 on any other failure.
"""
import argparse
import logging
import os
import sys
from collections import Counter
from typing import Dict, List, Optional, Sequence

from config.settings import PipelineConfig
from evaluation.benchmark_datasets import write_synthetic_corpus
from evaluation.evaluator import comparison_table, load_report
from src.core.corpus import load_corpus
from src.core.vocabulary import NO_COLOR, NO_WORK_TYPE
from src.data.dataset import load_samples
from src.models.trainer import TrainReport
from src.pipeline.costume_core import CostumeCorePipeline, stage_pipelines, whole_description_pipeline
from src.utils.errors import ConfigError, CostumeCoreError, ParseError, ValidationError
from src.utils.io import read_json
from src.utils.logger import setup_logger

logger = logging.getLogger(__name__)

SEED_KEYS = ("split_seed", "provider_seed", "balance_seed", "validation_seed", "init_seed",
             "shuffle_seed", "hash_seed")

EXIT_OK, EXIT_INVALID, EXIT_ERROR = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="key=value configuration file")
    common.add_argument("--seed-override", type=int, default=None, help="use this value for every seed")
    common.add_argument("--provider", choices=("offline", "identity", "endpoint"), default=None,
                        help="translation provider for back-translation")
    common.add_argument("--backend", choices=("hashing", "endpoint"), default=None, help="embedding backend")
    common.add_argument("--out-dir", type=str, default=None, help="directory for all run artifacts")
    common.add_argument("--corpus", type=str, default=None, help="corpus file (overrides corpus_path)")

    parser = argparse.ArgumentParser(prog="costume-core",
                                     description="Map garment descriptions to Costume Core Color and Work Type")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("validate", parents=[common], help="check a corpus file")
    sub.add_parser("split", parents=[common], help="80/20 split by description")
    sub.add_parser("augment", parents=[common], help="tokenize, annotate and back-translate")
    sub.add_parser("build", parents=[common], help="balance and split sentence datasets")
    sub.add_parser("tune", parents=[common], help="grid search learning rate and batch size")
    sub.add_parser("train", parents=[common], help="train one classifier per attribute")

    evaluate = sub.add_parser("evaluate", parents=[common], help="predict and score the test side")
    evaluate.add_argument("--trace", action="store_true", help="include sentence and variant predictions")
    evaluate.add_argument("--compare-whole-description", action="store_true",
                          help="also run without sentence tokenization and compare")
    evaluate.add_argument("--compare-stages", action="store_true",
                          help="also run every whole-description stage (no augmentation, augmented training, "
                               "test-set augmentation) and compare")

    predict = sub.add_parser("predict", parents=[common], help="label unseen descriptions")
    predict.add_argument("--input", type=str, default=None, help="descriptions to label (default: corpus)")
    predict.add_argument("--output", type=str, default=None, help="prediction file")
    predict.add_argument("--trace", action="store_true", help="include sentence and variant predictions")

    sub.add_parser("report", parents=[common], help="print distributions, training and evaluation reports")

    synth = sub.add_parser("synth", parents=[common], help="write a synthetic labelled corpus")
    synth.add_argument("--descriptions", type=int, default=400, help="number of descriptions")
    synth.add_argument("--seed", type=int, default=7, help="generator seed")
    synth.add_argument("--output", type=str, default=None, help="corpus file (default: corpus_path)")
    return parser


def resolve_config(args: argparse.Namespace, environ: Optional[Dict[str, str]] = None) -> PipelineConfig:
    overrides: Dict[str, str] = {}
    if args.seed_override is not None:
        overrides.update({key: str(args.seed_override) for key in SEED_KEYS})
    for flag, key in (("provider", "provider"), ("backend", "backend"),
                      ("out_dir", "out_dir"), ("corpus", "corpus_path")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = str(value)
    return PipelineConfig.load(args.config, environ=environ, overrides=overrides)


# -- subcommands -------------------------------------------------------------

def cmd_validate(pipeline: CostumeCorePipeline, args) -> List[str]:
    records = pipeline.load_records()
    groups = Counter(r.gold_color_group for r in records)
    work_types = Counter(r.gold_work_type for r in records)
    print(f"{pipeline.cfg.corpus_path}: {len(records)} records valid, "
          f"{len(set(groups) - {NO_COLOR})} colour groups, {len(set(work_types) - {NO_WORK_TYPE})} work types")
    return []


def cmd_split(pipeline: CostumeCorePipeline, args) -> List[str]:
    pipeline.split(pipeline.load_records())
    return [pipeline.split_path]


def _split_or_create(pipeline: CostumeCorePipeline, records):
    if os.path.exists(pipeline.split_path):
        return pipeline.load_split()
    return pipeline.split(records)


def cmd_augment(pipeline: CostumeCorePipeline, args) -> List[str]:
    records = pipeline.load_records()
    pipeline.augment(records, _split_or_create(pipeline, records))
    return [pipeline.samples_path("train"), pipeline.samples_path("test")]


def cmd_build(pipeline: CostumeCorePipeline, args) -> List[str]:
    samples = load_samples(pipeline.samples_path("train"))
    written = []
    for attribute in pipeline.attributes:
        full, train_ds, val_ds = pipeline.build(samples, attribute)
        print(f"{attribute.value}: {len(full)} samples, {len(train_ds)} train / {len(val_ds)} validation after balancing")
        written += [pipeline.dataset_path(attribute, "train"), pipeline.dataset_path(attribute, "validation")]
    return written


def cmd_tune(pipeline: CostumeCorePipeline, args) -> List[str]:
    written = []
    for attribute in pipeline.attributes:
        result = pipeline.tune(attribute, pipeline.load_dataset(attribute, "train"),
                               pipeline.load_dataset(attribute, "validation"))
        print(f"== {attribute.value}")
        print(result.to_frame().to_string(index=False, float_format=lambda x: f"{x:g}"))
        best = result.best
        print(f"selected: learning_rate {best.learning_rate:g}, batch_size {best.batch_size}")
        written.append(pipeline.tuning_path(attribute))
    return written


def cmd_train(pipeline: CostumeCorePipeline, args) -> List[str]:
    written = []
    for attribute in pipeline.attributes:
        _, report = pipeline.train(attribute, pipeline.load_dataset(attribute, "train"),
                                   pipeline.load_dataset(attribute, "validation"))
        print(f"{attribute.value}: {report.stopped_epoch} epochs, best epoch {report.best_epoch}, "
              f"val_accuracy {report.val_accuracy[report.best_epoch - 1]:.4f}")
        written += [pipeline.model_path(attribute), pipeline.train_report_path(attribute)]
    return written


def cmd_evaluate(pipeline: CostumeCorePipeline, args) -> List[str]:
    records = pipeline.load_records()
    _, test_records = pipeline.load_split().partition(records)
    evaluator = pipeline.evaluate(test_records, pipeline.load_models(), trace=args.trace)
    evaluator.print_summary()
    written = [pipeline.path("predictions", "test.jsonl")]
    written += [pipeline.path("reports", f"{a.value}_report.json") for a in pipeline.attributes]

    if args.compare_stages:
        stages = {name: stage.run().reports for name, stage in stage_pipelines(pipeline).items()}
        stages["sentence tokenized"] = evaluator.reports
        table = comparison_table(stages)
    elif args.compare_whole_description:
        table = comparison_table({"whole description": whole_description_pipeline(pipeline).run().reports,
                                  "sentence tokenized": evaluator.reports})
    else:
        return written
    table.to_csv(pipeline.path("reports", "comparison.csv"), index=False)
    with open(pipeline.path("reports", "comparison.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write(table.to_string(index=False, float_format=lambda x: f"{x:.2f}") + "\n")
    print(table.to_string(index=False, float_format=lambda x: f"{x:.2f}"))
    written += [pipeline.path("reports", "comparison.csv"), pipeline.path("reports", "comparison.txt")]
    return written


def cmd_predict(pipeline: CostumeCorePipeline, args) -> List[str]:
    records = load_corpus(args.input or pipeline.cfg.corpus_path, require_labels=False)
    output = args.output or pipeline.path("predictions", "predictions.jsonl")
    pipeline.predict(records, pipeline.load_models(), output, trace=args.trace)
    print(f"Wrote {len(records)} predictions to {output}")
    return [output]


def cmd_report(pipeline: CostumeCorePipeline, args) -> List[str]:
    for attribute in pipeline.attributes:
        print(f"== {attribute.value}")
        distribution = pipeline.path("datasets", f"{attribute.value}_distribution.txt")
        if os.path.exists(distribution):
            with open(distribution, "r", encoding="utf-8") as f:
                print(f.read())
        if os.path.exists(pipeline.train_report_path(attribute)):
            report = TrainReport.from_dict(read_json(pipeline.train_report_path(attribute)))
            print(report.to_frame().to_string(index=False, float_format=lambda x: f"{x:.4f}"))
        evaluation = pipeline.path("reports", f"{attribute.value}_report.json")
        if os.path.exists(evaluation):
            print(load_report(evaluation).format_table())
        print()
    return []


def cmd_synth(pipeline: CostumeCorePipeline, args) -> List[str]:
    output = args.output or pipeline.cfg.corpus_path
    records = write_synthetic_corpus(output, n=args.descriptions, seed=args.seed)
    groups = {r.gold_color_group for r in records} - {NO_COLOR}
    work_types = {r.gold_work_type for r in records} - {NO_WORK_TYPE}
    print(f"Wrote {len(records)} descriptions to {output} ({len(groups)} colour groups, {len(work_types)} work types)")
    return [output]


COMMANDS = {
    "validate": cmd_validate, "split": cmd_split, "augment": cmd_augment, "build": cmd_build,
    "tune": cmd_tune, "train": cmd_train, "evaluate": cmd_evaluate, "predict": cmd_predict,
    "report": cmd_report, "synth": cmd_synth,
}


def run(subcommand: str, cfg: PipelineConfig, args: argparse.Namespace) -> int:
    """Run one subcommand and write its manifest; returns the exit status."""
    try:
        pipeline = CostumeCorePipeline(cfg)
        inputs = [cfg.corpus_path] if subcommand != "synth" else []
        if getattr(args, "config", None):
            inputs.append(args.config)
        artifacts = COMMANDS[subcommand](pipeline, args)
        pipeline.write_manifest(subcommand, inputs, artifacts)
        return EXIT_OK
    except (ValidationError, ParseError, ConfigError) as e:
        logger.error(f"{subcommand} failed: {str(e)}")
        return EXIT_INVALID
    except (CostumeCoreError, OSError, ValueError, RuntimeError) as e:
        logger.error(f"{subcommand} failed: {type(e).__name__}: {str(e)}")
        return EXIT_ERROR


def main(argv: Optional[Sequence[str]] = None) -> int:
    setup_logger()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_INVALID
    return run(args.subcommand, cfg, args)


if __name__ == "__main__":
    sys.exit(main())
