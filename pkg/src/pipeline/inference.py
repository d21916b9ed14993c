"""Prediction for unseen descriptions.

Variants of a sentence are classified independently, merged per sentence by
majority vote, and sentences are fused into one label per description.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.augment.back_translation import AugmentationChain, augment_sentence
from src.augment.cache import TranslationCache
from src.augment.providers import TranslationProvider
from src.core.corpus import DescriptionRecord
from src.core.preprocess import SentenceSample, sentence_samples
from src.core.vocabulary import AttributeKind, ColorLexicon, LabelSet, WorkTypeLexicon, label_set_for
from src.models.classifier import MlpClassifier
from src.models.embedding import EmbeddingBackend
from src.utils.errors import InvalidK, MixedProvenance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VariantPrediction:
    description_id: str
    sentence_index: int
    variant_index: int
    probabilities: Tuple[float, ...]
    label: str
    label_index: int
    probability: float
    text: str = ""

    def to_dict(self) -> Dict:
        return {
            "variant_index": self.variant_index,
            "text": self.text,
            "label": self.label,
            "probability": self.probability,
            "probabilities": list(self.probabilities),
        }


@dataclass(frozen=True)
class SentencePrediction:
    description_id: str
    sentence_index: int
    label: str
    label_index: int
    probability: float
    mean_probabilities: Tuple[float, ...]
    variants: Tuple[VariantPrediction, ...]

    @property
    def text(self) -> str:
        originals = [v.text for v in self.variants if v.variant_index == 0]
        return originals[0] if originals else ""

    def to_dict(self) -> Dict:
        return {
            "sentence_index": self.sentence_index,
            "text": self.text,
            "label": self.label,
            "probability": self.probability,
            "variants": [v.to_dict() for v in self.variants],
        }


@dataclass(frozen=True)
class DescriptionPrediction:
    description_id: str
    attribute: AttributeKind
    label: str
    probability: float
    score: float
    supporting_sentence: Optional[int]
    ranked_labels: Tuple[str, ...]
    sentences: Tuple[SentencePrediction, ...]

    def variants(self) -> List[VariantPrediction]:
        """Every variant prediction behind this label, in sentence order."""
        return [v for s in self.sentences for v in s.variants]

    def to_dict(self, trace: bool = False) -> Dict:
        payload = {
            "label": self.label,
            "probability": self.probability,
            "score": self.score,
            "supporting_sentence": self.supporting_sentence,
            "ranked_labels": list(self.ranked_labels),
        }
        if trace:
            payload["sentences"] = [s.to_dict() for s in self.sentences]
        return payload


def top_k_labels(probabilities: Sequence[float], k: int, classes: Sequence[str]) -> List[str]:
    """The k most probable labels, ties in favour of the lower class index.

    Raises:
        InvalidK: k outside 1..len(classes).
    """
    if len(probabilities) != len(classes):
        raise ValueError(f"{len(probabilities)} probabilities for {len(classes)} classes")
    if not 1 <= k <= len(classes):
        raise InvalidK(f"k must be in 1..{len(classes)}, got {k}")
    order = np.argsort(-np.asarray(probabilities, dtype=np.float64), kind="stable")
    return [classes[i] for i in order[:k]]


def predict_variants(model: MlpClassifier, backend: EmbeddingBackend,
                     variants: Sequence[SentenceSample]) -> List[VariantPrediction]:
    """Classify each variant of a sentence independently."""
    if not variants:
        raise ValueError("predict_variants needs at least one variant")
    matrix = model.predict_proba(backend.embed_batch([v.text for v in variants]))
    predictions = []
    for sample, row in zip(variants, matrix):
        index = int(np.argmax(row))
        predictions.append(VariantPrediction(
            sample.description_id, sample.sentence_index, sample.variant_index,
            tuple(float(p) for p in row), model.label_set.label_at(index), index,
            float(row[index]), sample.text))
    return predictions


def aggregate_variants(predictions: Sequence[VariantPrediction]) -> SentencePrediction:
    """Majority vote over the variants of one sentence.

    The plurality label wins; a tie goes to the label whose voters have the
    higher mean probability, then to the lower class index. The sentence
    probability is the mean probability of the winning label's voters.

    Raises:
        MixedProvenance: predictions from more than one sentence.
    """
    if not predictions:
        raise ValueError("aggregate_variants needs at least one prediction")
    origins = {(p.description_id, p.sentence_index) for p in predictions}
    if len(origins) != 1:
        raise MixedProvenance(f"variants from several sentences: {sorted(origins)}")

    voters: Dict[int, List[float]] = defaultdict(list)
    labels: Dict[int, str] = {}
    for p in predictions:
        voters[p.label_index].append(p.probability)
        labels[p.label_index] = p.label

    winner = min(voters, key=lambda index: (-len(voters[index]), -float(np.mean(voters[index])), index))
    first = predictions[0]
    return SentencePrediction(
        first.description_id, first.sentence_index, labels[winner], winner,
        float(np.mean(voters[winner])),
        tuple(float(x) for x in np.mean([p.probabilities for p in predictions], axis=0)),
        tuple(sorted(predictions, key=lambda p: p.variant_index)))


def aggregate_description(sentences: Sequence[SentencePrediction], attribute,
                          label_set: Optional[LabelSet] = None) -> DescriptionPrediction:
    """Fuse sentence labels into one label for the description.

    Sentences labelled with the sentinel are set aside; among the remaining
    ones the label with the largest summed sentence probability wins, ties to
    the label seen first. With nothing left the description gets the sentinel.
    """
    attribute = AttributeKind.parse(attribute)
    label_set = label_set or label_set_for(attribute)
    sentinel = label_set.sentinel
    ordered = tuple(sorted(sentences, key=lambda s: s.sentence_index))
    if len({s.description_id for s in ordered}) > 1:
        raise MixedProvenance(f"sentences from several descriptions: {sorted({s.description_id for s in ordered})}")
    if len({s.sentence_index for s in ordered}) != len(ordered):
        raise MixedProvenance("duplicate sentence indices in one description")
    description_id = ordered[0].description_id if ordered else ""

    totals: Dict[str, float] = {}
    supporters: Dict[str, List[SentencePrediction]] = defaultdict(list)
    for sentence in ordered:
        if sentence.label == sentinel:
            continue
        totals[sentence.label] = totals.get(sentence.label, 0.0) + sentence.probability
        supporters[sentence.label].append(sentence)

    if totals:
        # dict order is first appearance, so max() keeps the earliest label on ties
        label = max(totals, key=lambda lbl: totals[lbl])
        score = totals[label]
        probability = score / len(supporters[label])
        supporting = supporters[label][0].sentence_index
    else:
        label = sentinel
        score = float(sum(s.probability for s in ordered))
        probability = score / len(ordered) if ordered else 1.0
        supporting = None

    if ordered:
        mean = np.mean([s.mean_probabilities for s in ordered], axis=0)
        rest = [lbl for lbl in top_k_labels(mean, len(label_set), label_set.classes) if lbl != label]
    else:
        rest = [lbl for lbl in label_set.classes if lbl != label]
    return DescriptionPrediction(description_id, attribute, label, probability, score,
                                 supporting, (label, *rest), ordered)


def predict_description(record: DescriptionRecord, models: Mapping[AttributeKind, MlpClassifier],
                        backend: EmbeddingBackend, chains: Sequence[AugmentationChain],
                        provider: TranslationProvider, cache: Optional[TranslationCache] = None,
                        tokenize: bool = True, color_lexicon: Optional[ColorLexicon] = None,
                        work_type_lexicon: Optional[WorkTypeLexicon] = None
                        ) -> Dict[AttributeKind, DescriptionPrediction]:
    """Tokenize, augment with ``chains`` and classify one description.

    With no chains every sentence is classified from its original text alone.
    """
    by_sentence: List[List[SentenceSample]] = [
        augment_sentence(original, chains, provider, cache)
        for original in sentence_samples(record, tokenize, color_lexicon, work_type_lexicon)
    ]
    results = {}
    for attribute, model in models.items():
        sentence_predictions = [
            aggregate_variants(predict_variants(model, backend, variants))
            for variants in by_sentence
        ]
        results[attribute] = aggregate_description(sentence_predictions, attribute, model.label_set)
        logger.debug(f"{record.id} {attribute.value}: {results[attribute].label} "
                     f"({results[attribute].probability:.3f})")
    return results


def prediction_record(description_id: str, predictions: Mapping[AttributeKind, DescriptionPrediction],
                      trace: bool = False) -> Dict:
    """One line of the prediction output file."""
    record: Dict = {"id": description_id}
    for attribute, prediction in predictions.items():
        record[attribute.value] = prediction.label
        record[f"{attribute.value}_probability"] = prediction.probability
        record[f"{attribute.value}_ranked"] = list(prediction.ranked_labels)
    if trace:
        record["trace"] = {attribute.value: prediction.to_dict(trace=True)["sentences"]
                           for attribute, prediction in predictions.items()}
    return record
