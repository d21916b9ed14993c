from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging
import os
from dataclasses import replace

from tqdm import tqdm

from config.settings import PipelineConfig, config
from evaluation.evaluator import CostumeCoreEvaluator
from src.augment.back_translation import make_chains
from src.augment.cache import TranslationCache
from src.augment.providers import ProviderFactory, TranslationProvider
from src.core.corpus import CorpusSplit, DescriptionRecord, load_corpus, split_corpus
from src.core.preprocess import SentenceSample
from src.core.vocabulary import AttributeKind, LabelSet, load_lexicons
from src.data.dataset import (
    SentenceDataset,
    assert_disjoint,
    build_samples,
    load_samples,
    save_samples,
    split_train_validation,
    undersample_sentinel,
)
from src.models.classifier import MlpClassifier
from src.models.embedding import BackendFactory, EmbeddingBackend
from src.models.persistence import load_model, save_model
from src.models.trainer import Hyperparams, TrainReport, TuningResult, build_model, grid_search, train
from src.pipeline.inference import DescriptionPrediction, predict_description, prediction_record
from src.utils.errors import ValidationError
from src.utils.io import checksums, read_json, sha256_file, sha256_text, write_json, write_jsonl

logger = logging.getLogger(__name__)


class CostumeCorePipeline:
    """End-to-end orchestrator: split, augment, build, train, predict, evaluate.

    Every stage writes its artifacts under ``cfg.out_dir`` and can be run on
    its own from the artifacts of the stage before it.
    """

    def __init__(self, cfg: PipelineConfig, provider: Optional[TranslationProvider] = None,
                 backend: Optional[EmbeddingBackend] = None, cache: Optional[TranslationCache] = None):
        self.cfg = cfg
        self.chains = make_chains(cfg.chains)
        self.test_chains = self.chains if cfg.augment_test else ()
        self.provider = provider or ProviderFactory.create(cfg.provider, cfg.provider_seed, cfg.translation_endpoint)
        self.backend = backend or BackendFactory.create(cfg.backend, cfg.embedding_dim, cfg.hash_seed,
                                                        cfg.embedding_endpoint, cfg.alternate_sign,
                                                        cfg.ngram_decay)
        self.cache = cache if cache is not None else TranslationCache(cfg.cache_path or None)
        self.hyperparams = Hyperparams.from_config(cfg)
        self.color_lexicon, self.work_type_lexicon = load_lexicons(cfg.lexicon_dir)
        self.attributes = [AttributeKind.parse(a) for a in cfg.attributes]
        self.selected: Dict[str, Dict] = {}
        logger.info(f"Pipeline initialized: provider {self.provider.get_name()}, backend {self.backend.get_name()}, "
                    f"{len(self.chains)} chains, tokenize={cfg.tokenize}, augment_test={cfg.augment_test}, "
                    f"out_dir {cfg.out_dir}")

    # -- artifact paths ----------------------------------------------------

    def path(self, *parts: str) -> str:
        return os.path.join(self.cfg.out_dir, *parts)

    @property
    def split_path(self) -> str:
        return self.path("split.json")

    def samples_path(self, side: str) -> str:
        return self.path("samples", f"{side}.jsonl")

    def dataset_path(self, attribute: AttributeKind, side: str) -> str:
        return self.path("datasets", f"{attribute.value}_{side}.jsonl")

    def model_path(self, attribute: AttributeKind) -> str:
        return self.path("models", f"{attribute.value}.ccm")

    def train_report_path(self, attribute: AttributeKind) -> str:
        return self.path("models", f"{attribute.value}_train_report.json")

    def tuning_path(self, attribute: AttributeKind) -> str:
        return self.path("tuning", f"{attribute.value}.json")

    def label_set(self, attribute: AttributeKind) -> LabelSet:
        lexicon = self.color_lexicon if attribute is AttributeKind.COLOR else self.work_type_lexicon
        return lexicon.label_set()

    def lexicons(self) -> Dict[str, object]:
        return {"color_lexicon": self.color_lexicon, "work_type_lexicon": self.work_type_lexicon}

    # -- stages ------------------------------------------------------------

    def load_records(self, path: Optional[str] = None, require_labels: bool = True) -> List[DescriptionRecord]:
        return load_corpus(path or self.cfg.corpus_path, require_labels=require_labels,
                           color_lexicon=self.color_lexicon, work_type_lexicon=self.work_type_lexicon)

    def split(self, records: Sequence[DescriptionRecord]) -> CorpusSplit:
        corpus_split = split_corpus(records, self.cfg.split_ratio, self.cfg.split_seed, self.cfg.stratified_split)
        write_json(self.split_path, corpus_split.to_dict())
        logger.info(f"Split {len(records)} descriptions into {len(corpus_split.train_ids)} train / "
                    f"{len(corpus_split.test_ids)} test (seed {self.cfg.split_seed})")
        return corpus_split

    def load_split(self) -> CorpusSplit:
        return CorpusSplit.from_dict(read_json(self.split_path))

    def augment(self, records: Sequence[DescriptionRecord],
                corpus_split: CorpusSplit) -> Tuple[List[SentenceSample], List[SentenceSample]]:
        """Tokenize, annotate and back-translate both sides of the split."""
        train_records, test_records = corpus_split.partition(records)
        train_samples = build_samples(train_records, self.chains, self.provider, self.cache,
                                      self.cfg.tokenize, desc="Augmenting train", **self.lexicons())
        test_samples = build_samples(test_records, self.test_chains, self.provider, self.cache,
                                     self.cfg.tokenize, desc="Augmenting test", **self.lexicons())
        # leakage guard, checked after augmentation
        assert_disjoint({s.description_id for s in train_samples}, {s.description_id for s in test_samples})
        save_samples(train_samples, self.samples_path("train"))
        save_samples(test_samples, self.samples_path("test"))
        logger.info(f"Augmented {len(train_records)} train descriptions into {len(train_samples)} samples, "
                    f"{len(test_records)} test descriptions into {len(test_samples)} samples "
                    f"(cache hits {self.cache.hits}, misses {self.cache.misses})")
        return train_samples, test_samples

    def build(self, train_samples: Sequence[SentenceSample],
              attribute: AttributeKind) -> Tuple[SentenceDataset, SentenceDataset, SentenceDataset]:
        """Balance the sentinel class and split off validation data.

        Returns:
            Tuple of (unbalanced dataset, train dataset, validation dataset)
        """
        full = SentenceDataset.from_samples(train_samples, attribute, self.label_set(attribute),
                                            chains=len(self.chains), tokenize=self.cfg.tokenize)
        balanced = undersample_sentinel(full, self.cfg.balance_fraction, self.cfg.balance_seed)
        train_ds, val_ds = split_train_validation(balanced, self.cfg.validation_ratio, self.cfg.validation_seed)
        save_samples(train_ds.samples, self.dataset_path(attribute, "train"))
        save_samples(val_ds.samples, self.dataset_path(attribute, "validation"))
        with open(self.path("datasets", f"{attribute.value}_distribution.txt"), "w",
                  encoding="utf-8", newline="\n") as f:
            f.write(f"before balancing ({len(full)} samples)\n{full.distribution().to_table()}\n\n")
            f.write(f"after balancing ({len(balanced)} samples)\n{balanced.distribution().to_table()}\n")
        return full, train_ds, val_ds

    def load_dataset(self, attribute: AttributeKind, side: str) -> SentenceDataset:
        return SentenceDataset.from_samples(load_samples(self.dataset_path(attribute, side)), attribute,
                                           self.label_set(attribute))

    def tune(self, attribute: AttributeKind, train_ds: SentenceDataset,
             val_ds: SentenceDataset) -> TuningResult:
        """Grid search over learning rate and batch size, selected by validation loss."""
        result = grid_search(train_ds, val_ds, self.hyperparams, self.backend,
                             self.cfg.tune_learning_rates, self.cfg.tune_batch_sizes)
        write_json(self.tuning_path(attribute), result.to_dict())
        self.selected[attribute.value] = result.selected()
        return result

    def hyperparams_for(self, attribute: AttributeKind) -> Hyperparams:
        """Configured hyperparameters, with the grid-search pick if ``tune`` has written one."""
        if not os.path.isfile(self.tuning_path(attribute)):
            return self.hyperparams
        result = TuningResult.from_dict(read_json(self.tuning_path(attribute)))
        self.selected[attribute.value] = result.selected()
        logger.info(f"{attribute.value}: using tuned lr {result.best.learning_rate:g}, "
                    f"batch {result.best.batch_size}")
        return result.apply(self.hyperparams)

    def train(self, attribute: AttributeKind, train_ds: SentenceDataset, val_ds: SentenceDataset,
              hyperparams: Optional[Hyperparams] = None) -> Tuple[MlpClassifier, TrainReport]:
        hyperparams = hyperparams or self.hyperparams_for(attribute)
        model = build_model(train_ds, hyperparams, self.backend)
        model, report = train(model, train_ds, val_ds, hyperparams, self.backend)
        save_model(model, self.model_path(attribute))
        write_json(self.train_report_path(attribute), report.to_dict())
        logger.info(f"{attribute.value}: stopped at epoch {report.stopped_epoch}, best epoch {report.best_epoch} "
                    f"(val_loss {report.best_val_loss:.4f})")
        return model, report

    def load_models(self) -> Dict[AttributeKind, MlpClassifier]:
        models = {}
        for attribute in self.attributes:
            model = load_model(self.model_path(attribute))
            if model.backend_name != self.backend.get_name():
                raise ValidationError(f"{attribute.value} model was trained with backend {model.backend_name}, "
                                      f"not {self.backend.get_name()}")
            if model.label_set != self.label_set(attribute):
                raise ValidationError(f"{attribute.value} model was trained on other classes than the lexicons "
                                      f"in use (lexicon_dir {self.cfg.lexicon_dir or 'built-in'})")
            models[attribute] = model
        return models

    def predict(self, records: Sequence[DescriptionRecord], models: Mapping[AttributeKind, MlpClassifier],
                output_path: Optional[str] = None,
                trace: bool = False) -> Dict[AttributeKind, Dict[str, DescriptionPrediction]]:
        """Predict every description; optionally write one record per line."""
        by_attribute: Dict[AttributeKind, Dict[str, DescriptionPrediction]] = {a: {} for a in models}
        lines = []
        for record in tqdm(records, desc="Predicting", disable=not config.SHOW_PROGRESS or not records):
            predictions = predict_description(record, models, self.backend, self.test_chains, self.provider,
                                              self.cache, self.cfg.tokenize, **self.lexicons())
            for attribute, prediction in predictions.items():
                by_attribute[attribute][record.id] = prediction
            lines.append(prediction_record(record.id, predictions, trace))
        if output_path:
            write_jsonl(output_path, lines)
            logger.info(f"Wrote {len(lines)} predictions to {output_path}")
        return by_attribute

    def evaluate(self, test_records: Sequence[DescriptionRecord], models: Mapping[AttributeKind, MlpClassifier],
                 trace: bool = False):
        predictions = self.predict(test_records, models, self.path("predictions", "test.jsonl"), trace)
        evaluator = CostumeCoreEvaluator(test_records, self.color_lexicon)
        for attribute, by_id in predictions.items():
            evaluator.evaluate_attribute(attribute, by_id, models[attribute].label_set)
        evaluator.save_reports(self.path("reports"))
        return evaluator

    def run(self, trace: bool = False):
        """Every stage in order on ``cfg.corpus_path``; returns the evaluator."""
        records = self.load_records()
        corpus_split = self.split(records)
        train_samples, _ = self.augment(records, corpus_split)
        models = {}
        for attribute in self.attributes:
            _, train_ds, val_ds = self.build(train_samples, attribute)
            hyperparams = self.hyperparams
            if self.cfg.tune:
                hyperparams = self.tune(attribute, train_ds, val_ds).apply(self.hyperparams)
            models[attribute], _ = self.train(attribute, train_ds, val_ds, hyperparams)
        _, test_records = corpus_split.partition(records)
        return self.evaluate(test_records, models, trace)

    # -- reproducibility ---------------------------------------------------

    def seeds(self) -> Dict[str, int]:
        cfg = self.cfg
        return {"split_seed": cfg.split_seed, "provider_seed": cfg.provider_seed, "balance_seed": cfg.balance_seed,
                "validation_seed": cfg.validation_seed, "init_seed": cfg.init_seed,
                "shuffle_seed": cfg.shuffle_seed, "hash_seed": cfg.hash_seed}

    def write_manifest(self, subcommand: str, inputs: Sequence[str], artifacts: Sequence[str]) -> str:
        """Record what a run read and wrote, enough to reproduce it exactly."""
        path = self.path("manifests", f"{subcommand}.json")
        manifest = {
            "subcommand": subcommand,
            "config_sha256": sha256_text(self.cfg.to_text()),
            "config": self.cfg.to_text().splitlines(),
            "seeds": self.seeds(),
            "provider": self.provider.get_name(),
            "backend": self.backend.get_name(),
            "inputs": {p: sha256_file(p) for p in sorted(set(inputs)) if os.path.isfile(p)},
            "artifacts": checksums([p for p in artifacts if p != path]),
        }
        if self.selected:
            manifest["selected_hyperparams"] = dict(sorted(self.selected.items()))
        write_json(path, manifest)
        return path


def whole_description_pipeline(pipeline: CostumeCorePipeline) -> CostumeCorePipeline:
    """Same run without sentence tokenization, written to a sibling directory."""
    cfg = replace(pipeline.cfg, tokenize=False, out_dir=os.path.join(pipeline.cfg.out_dir, "whole_description"))
    return CostumeCorePipeline(cfg, pipeline.provider, pipeline.backend, pipeline.cache)


# Whole-description runs that isolate each improvement, in the order they were
# added; the sentence-tokenized run itself is the last stage.
COMPARISON_STAGES: Tuple[Tuple[str, str, Dict], ...] = (
    ("original descriptions", "stages/original", {"chains": (), "augment_test": False}),
    ("augmented training", "stages/augmented", {"augment_test": False}),
    ("test-set augmentation", "whole_description", {}),
)


def stage_pipelines(pipeline: CostumeCorePipeline) -> Dict[str, CostumeCorePipeline]:
    """Whole-description variants of ``pipeline``, keyed by stage name.

    Every stage shares the provider, backend and translation cache and writes
    under its own subdirectory of ``out_dir``.
    """
    stages = {}
    for name, subdir, overrides in COMPARISON_STAGES:
        cfg = replace(pipeline.cfg, tokenize=False, out_dir=os.path.join(pipeline.cfg.out_dir, *subdir.split("/")),
                      **overrides)
        stages[name] = CostumeCorePipeline(cfg, pipeline.provider, pipeline.backend, pipeline.cache)
    return stages
