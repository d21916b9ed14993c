"""Description-level metrics: confusion matrix, per-class scores, top-k."""
from dataclasses import dataclass, field
from typing import AbstractSet, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from src.core.vocabulary import LabelSet
from src.utils.errors import InvalidK, LengthMismatch, UnknownLabel

TOP_K = (1, 2, 3)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts indexed ``[gold][predicted]`` in label-set order."""

    label_set: LabelSet
    counts: np.ndarray

    def __post_init__(self):
        n = len(self.label_set)
        if self.counts.shape != (n, n):
            raise ValueError(f"confusion matrix must be {n}x{n}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, pair) -> int:
        gold, predicted = pair
        return int(self.counts[self.label_set.index_of(gold), self.label_set.index_of(predicted)])

    def to_frame(self) -> pd.DataFrame:
        classes = list(self.label_set.classes)
        frame = pd.DataFrame(self.counts, index=classes, columns=classes)
        frame.index.name = "gold"
        return frame

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path)

    def to_dict(self) -> Dict:
        return {"label_set": self.label_set.to_dict(), "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "ConfusionMatrix":
        return cls(LabelSet.from_dict(payload["label_set"]), np.asarray(payload["counts"], dtype=np.int64))


@dataclass(frozen=True)
class ClassMetrics:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvaluationReport:
    attribute: str
    per_class: List[ClassMetrics]
    accuracy: float
    macro: Dict[str, float]
    weighted: Dict[str, float]
    total: int
    confusion: ConfusionMatrix
    top_k: Dict[int, float] = field(default_factory=dict)
    lenient_accuracy: Optional[float] = None

    def row(self, label: str) -> ClassMetrics:
        for metrics_row in self.per_class:
            if metrics_row.label == label:
                return metrics_row
        raise UnknownLabel(f"{label!r} is not a {self.attribute} class")

    def to_dict(self) -> Dict:
        return {
            "attribute": self.attribute,
            "total": self.total,
            "accuracy": self.accuracy,
            "macro": dict(self.macro),
            "weighted": dict(self.weighted),
            "top_k": {str(k): v for k, v in sorted(self.top_k.items())},
            "lenient_accuracy": self.lenient_accuracy,
            "per_class": [vars(r).copy() for r in self.per_class],
            "confusion": self.confusion.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "EvaluationReport":
        return cls(
            attribute=payload["attribute"],
            per_class=[ClassMetrics(**r) for r in payload["per_class"]],
            accuracy=payload["accuracy"],
            macro=dict(payload["macro"]),
            weighted=dict(payload["weighted"]),
            total=payload["total"],
            confusion=ConfusionMatrix.from_dict(payload["confusion"]),
            top_k={int(k): v for k, v in payload.get("top_k", {}).items()},
            lenient_accuracy=payload.get("lenient_accuracy"),
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([vars(r) for r in self.per_class],
                             columns=["label", "precision", "recall", "f1", "support"])
        summary = pd.DataFrame([
            {"label": "macro avg", **self.macro, "support": self.total},
            {"label": "weighted avg", **self.weighted, "support": self.total},
        ])
        return pd.concat([frame, summary], ignore_index=True)

    def format_table(self) -> str:
        """Aligned per-class table, rounded to 2 decimals for display only."""
        frame = self.to_frame()
        body = frame.to_string(index=False, float_format=lambda x: f"{x:.2f}")
        lines = [f"{self.attribute} ({self.total} descriptions)", body, f"accuracy: {self.accuracy:.2f}"]
        if self.top_k:
            lines.append("top-k: " + ", ".join(f"k={k} {v:.2f}" for k, v in sorted(self.top_k.items())))
        if self.lenient_accuracy is not None:
            lines.append(f"secondary-tolerant accuracy: {self.lenient_accuracy:.2f}")
        return "\n".join(lines)


def confusion(golds: Sequence[str], preds: Sequence[str], label_set: LabelSet) -> ConfusionMatrix:
    """Count (gold, predicted) pairs.

    Raises:
        LengthMismatch: golds and preds differ in length
        UnknownLabel: a label outside the label set
    """
    if len(golds) != len(preds):
        raise LengthMismatch(f"{len(golds)} gold labels but {len(preds)} predictions")
    counts = np.zeros((len(label_set), len(label_set)), dtype=np.int64)
    for gold, predicted in zip(golds, preds):
        counts[label_set.index_of(gold), label_set.index_of(predicted)] += 1
    return ConfusionMatrix(label_set, counts)


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    out = np.zeros_like(numerator, dtype=np.float64)
    np.divide(numerator, denominator, out=out, where=denominator > 0)
    return out


def metrics(matrix: ConfusionMatrix) -> EvaluationReport:
    """Precision, recall, F1 and support per class; zero denominators give 0."""
    counts = matrix.counts.astype(np.float64)
    tp = np.diag(counts)
    support = matrix.counts.sum(axis=1)
    precision = _safe_ratio(tp, counts.sum(axis=0))
    recall = _safe_ratio(tp, counts.sum(axis=1))
    f1 = _safe_ratio(2 * precision * recall, precision + recall)

    per_class = [
        ClassMetrics(label, float(p), float(r), float(f), int(s))
        for label, p, r, f, s in zip(matrix.label_set.classes, precision, recall, f1, support)
    ]
    total = matrix.total
    weights = support / total if total else np.zeros_like(precision)
    return EvaluationReport(
        attribute=matrix.label_set.attribute.value,
        per_class=per_class,
        accuracy=float(tp.sum() / total) if total else 0.0,
        macro={"precision": float(precision.mean()), "recall": float(recall.mean()), "f1": float(f1.mean())},
        weighted={"precision": float(weights @ precision), "recall": float(weights @ recall),
                  "f1": float(weights @ f1)},
        total=total,
        confusion=matrix,
    )


def top_k_accuracy(golds: Sequence[str], ranked: Sequence[Sequence[str]], k: int) -> float:
    """Fraction of items whose gold label is among the first k ranked labels.

    Raises:
        InvalidK: k < 1, or a ranked list shorter than k
        LengthMismatch: golds and ranked lists differ in length
    """
    if len(golds) != len(ranked):
        raise LengthMismatch(f"{len(golds)} gold labels but {len(ranked)} ranked lists")
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    if any(len(r) < k for r in ranked):
        raise InvalidK(f"every ranked list needs at least {k} labels")
    if not golds:
        return 0.0
    return sum(gold in r[:k] for gold, r in zip(golds, ranked)) / len(golds)


def lenient_accuracy(golds: Sequence[str], preds: Sequence[str],
                     accepted: Sequence[AbstractSet[str]]) -> float:
    """Accuracy that also accepts any label in ``accepted[i]``.

    Used for Color with the colour groups mentioned anywhere in the
    description, so predicting a secondary colour counts as correct.
    """
    if not len(golds) == len(preds) == len(accepted):
        raise LengthMismatch("golds, predictions and accepted sets must have the same length")
    if not golds:
        return 0.0
    hits = sum(p == g or p in extra for g, p, extra in zip(golds, preds, accepted))
    return hits / len(golds)


def evaluate_labels(golds: Sequence[str], preds: Sequence[str], ranked: Sequence[Sequence[str]],
                    label_set: LabelSet, accepted: Optional[Sequence[AbstractSet[str]]] = None) -> EvaluationReport:
    """Full report: confusion-derived metrics plus top-k for k up to 3."""
    report = metrics(confusion(golds, preds, label_set))
    report.top_k = {k: top_k_accuracy(golds, ranked, k) for k in TOP_K if k <= len(label_set)}
    if accepted is not None:
        report.lenient_accuracy = lenient_accuracy(golds, preds, accepted)
    return report
