"""Run every stage end to end on one configuration.

    python scripts/run_pipeline.py [--config FILE] [--synth N] [--compare-whole-description | --compare-stages]
"""
import argparse
import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from config.settings import PipelineConfig  # noqa: E402
from evaluation.benchmark_datasets import write_synthetic_corpus  # noqa: E402
from evaluation.evaluator import comparison_table  # noqa: E402
from src.pipeline.costume_core import CostumeCorePipeline, stage_pipelines, whole_description_pipeline  # noqa: E402
from src.utils.logger import setup_logger  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description="End-to-end Costume Core run")
    parser.add_argument("--config", type=str, default=None, help="key=value configuration file")
    parser.add_argument("--synth", type=int, default=0, help="first write a synthetic corpus of this size")
    parser.add_argument("--synth-seed", type=int, default=7)
    parser.add_argument("--compare-whole-description", action="store_true")
    parser.add_argument("--compare-stages", action="store_true")
    args = parser.parse_args()

    logger = setup_logger()
    cfg = PipelineConfig.load(args.config)
    if args.synth:
        write_synthetic_corpus(cfg.corpus_path, n=args.synth, seed=args.synth_seed)

    pipeline = CostumeCorePipeline(cfg)
    evaluator = pipeline.run()
    evaluator.print_summary()

    if args.compare_stages:
        stages = {name: stage.run().reports for name, stage in stage_pipelines(pipeline).items()}
        stages["sentence tokenized"] = evaluator.reports
        print(comparison_table(stages).to_string(index=False, float_format=lambda x: f"{x:.2f}"))
    elif args.compare_whole_description:
        whole = whole_description_pipeline(pipeline).run()
        table = comparison_table({"whole description": whole.reports, "sentence tokenized": evaluator.reports})
        print(table.to_string(index=False, float_format=lambda x: f"{x:.2f}"))
    logger.info(f"Artifacts written to {cfg.out_dir}")


if __name__ == "__main__":
    main()
