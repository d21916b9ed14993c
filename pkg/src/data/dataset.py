"""Sentence-level training datasets: build, balance, split and batch."""
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split
from tqdm import tqdm

from config.settings import config
from src.augment.back_translation import AugmentationChain, augment_sentence
from src.augment.cache import TranslationCache
from src.augment.providers import TranslationProvider
from src.core.corpus import DescriptionRecord, partition_sizes
from src.core.preprocess import SentenceSample, sentence_samples
from src.core.vocabulary import AttributeKind, ColorLexicon, LabelSet, WorkTypeLexicon, label_set_for
from src.utils.errors import InvalidFraction, ParseError, TooFewDescriptions, ValidationError
from src.utils.io import iter_jsonl, write_jsonl

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassDistribution:
    counts: Dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, label: str) -> int:
        return self.counts.get(label, 0)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"label": list(self.counts), "count": list(self.counts.values())})
        frame["share"] = frame["count"] / max(self.total, 1)
        return frame

    def to_table(self) -> str:
        return self.to_frame().to_string(index=False, formatters={"share": "{:.3f}".format})


@dataclass(frozen=True)
class SentenceDataset:
    """Samples labelled for one attribute, with the seeds that produced them."""

    samples: Tuple[SentenceSample, ...]
    attribute: AttributeKind
    label_set: LabelSet
    provenance: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for sample in self.samples:
            label = sample.label_for(self.attribute)
            if label not in self.label_set.classes:
                raise ValidationError(f"sample {sample.key} has label {label!r} outside the {self.attribute.value} label set")

    @classmethod
    def from_samples(cls, samples: Iterable[SentenceSample], attribute,
                     label_set: Optional[LabelSet] = None, **provenance) -> "SentenceDataset":
        attribute = AttributeKind.parse(attribute)
        return cls(tuple(samples), attribute, label_set or label_set_for(attribute), dict(provenance))

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> List[str]:
        return [s.label_for(self.attribute) for s in self.samples]

    def label_indices(self) -> np.ndarray:
        index = {label: i for i, label in enumerate(self.label_set.classes)}
        return np.array([index[label] for label in self.labels()], dtype=np.int64)

    def texts(self) -> List[str]:
        return [s.text for s in self.samples]

    def description_ids(self) -> List[str]:
        """Distinct description ids in first-appearance order."""
        return list(dict.fromkeys(s.description_id for s in self.samples))

    def distribution(self) -> ClassDistribution:
        counter = Counter(self.labels())
        return ClassDistribution({label: counter.get(label, 0) for label in self.label_set.classes})

    def with_samples(self, samples: Iterable[SentenceSample], **provenance) -> "SentenceDataset":
        merged = dict(self.provenance)
        merged.update(provenance)
        return SentenceDataset(tuple(samples), self.attribute, self.label_set, merged)


# -- building ---------------------------------------------------------------

def build_samples(records: Sequence[DescriptionRecord], chains: Sequence[AugmentationChain],
                  provider: TranslationProvider, cache: Optional[TranslationCache] = None,
                  tokenize: bool = True, desc: str = "Augmenting",
                  color_lexicon: Optional[ColorLexicon] = None,
                  work_type_lexicon: Optional[WorkTypeLexicon] = None) -> List[SentenceSample]:
    """Tokenize, annotate and augment descriptions; order follows the input."""
    samples: List[SentenceSample] = []
    for record in tqdm(records, desc=desc, disable=not config.SHOW_PROGRESS or not records):
        for original in sentence_samples(record, tokenize, color_lexicon, work_type_lexicon):
            samples.extend(augment_sentence(original, chains, provider, cache,
                                            record.gold_color_group, record.gold_work_type,
                                            color_lexicon, work_type_lexicon))
    logger.info(f"Built {len(samples)} samples from {len(records)} descriptions "
                f"({len(chains)} augmentation chains, tokenize={tokenize})")
    return samples


def build_sentence_dataset(records: Sequence[DescriptionRecord], attribute,
                           chains: Sequence[AugmentationChain], provider: TranslationProvider,
                           cache: Optional[TranslationCache] = None, tokenize: bool = True) -> SentenceDataset:
    """Build the sentence-level dataset for one side of a corpus split."""
    samples = build_samples(records, chains, provider, cache, tokenize)
    return SentenceDataset.from_samples(samples, attribute, chains=len(chains), tokenize=tokenize)


def assert_disjoint(train_ids: Iterable[str], test_ids: Iterable[str]) -> None:
    """Leakage guard: no description may feed both sides.

    Raises:
        ValidationError: naming (some of) the leaking ids.
    """
    leaked = set(train_ids) & set(test_ids)
    if leaked:
        raise ValidationError(f"description ids on both sides of the split: {sorted(leaked)[:10]}")


# -- balancing ---------------------------------------------------------------

def sentinel_keep_count(n_sentinel: int, fraction: float) -> int:
    """round(fraction * n), halves rounded up."""
    return int(math.floor(fraction * n_sentinel + 0.5))


def undersample_sentinel(dataset: SentenceDataset, fraction: float = 0.15, seed: int = 7) -> SentenceDataset:
    """Keep a seeded uniform fraction of the sentinel class, all other samples.

    Raises:
        InvalidFraction: fraction outside (0, 1].
    """
    if not 0.0 < fraction <= 1.0:
        raise InvalidFraction(f"fraction must be in (0, 1], got {fraction}")

    rng = np.random.default_rng(seed)
    sentinel = dataset.label_set.sentinel
    labels = dataset.labels()
    sentinel_idx = np.array([i for i, label in enumerate(labels) if label == sentinel], dtype=np.int64)
    other_idx = np.array([i for i, label in enumerate(labels) if label != sentinel], dtype=np.int64)

    keep = sentinel_keep_count(len(sentinel_idx), fraction)
    chosen = rng.choice(sentinel_idx, size=keep, replace=False) if keep else np.array([], dtype=np.int64)
    retained = np.concatenate([other_idx, chosen]).astype(np.int64)
    order = retained[rng.permutation(len(retained))]

    logger.info(f"Undersampled {dataset.attribute.value} sentinel {sentinel!r}: "
                f"{len(sentinel_idx)} -> {keep} (fraction={fraction}); {len(other_idx)} other samples kept")
    return dataset.with_samples((dataset.samples[i] for i in order),
                                balance_fraction=fraction, balance_seed=seed)


# -- splitting and batching --------------------------------------------------

def split_train_validation(dataset: SentenceDataset, ratio: float = 0.8,
                           seed: int = 11) -> Tuple[SentenceDataset, SentenceDataset]:
    """Split by description id so every variant of a description stays together.

    Raises:
        TooFewDescriptions: fewer than two distinct descriptions.
    """
    ids = sorted(dataset.description_ids())
    if len(ids) < 2:
        raise TooFewDescriptions(f"need at least 2 descriptions for a validation split, got {len(ids)}")
    n_train, n_val = partition_sizes(len(ids), ratio)
    train_ids, val_ids = train_test_split(ids, train_size=n_train, test_size=n_val,
                                          random_state=seed, shuffle=True)
    train_ids, val_ids = set(train_ids), set(val_ids)
    train = [s for s in dataset.samples if s.description_id in train_ids]
    validation = [s for s in dataset.samples if s.description_id in val_ids]
    logger.info(f"Validation split: {len(train_ids)} / {len(val_ids)} descriptions, "
                f"{len(train)} / {len(validation)} samples")
    return (dataset.with_samples(train, validation_seed=seed, validation_side="train"),
            dataset.with_samples(validation, validation_seed=seed, validation_side="validation"))


def batch_indices(n: int, batch_size: int, epoch_seed: int) -> Iterator[np.ndarray]:
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.random.default_rng(epoch_seed).permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def batches(dataset: SentenceDataset, batch_size: int = 8, epoch_seed: int = 0) -> Iterator[List[SentenceSample]]:
    """Seeded shuffle of the dataset cut into batches; the last may be partial."""
    for idx in batch_indices(len(dataset), batch_size, epoch_seed):
        yield [dataset.samples[i] for i in idx]


# -- serialization ------------------------------------------------------------

def save_samples(samples: Iterable[SentenceSample], path: str) -> int:
    return write_jsonl(path, (s.to_dict() for s in samples))


def load_samples(path: str) -> List[SentenceSample]:
    samples = []
    for line_number, line in iter_jsonl(path):
        try:
            samples.append(SentenceSample.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise ParseError("malformed sample record", line_number, path) from None
    return samples
