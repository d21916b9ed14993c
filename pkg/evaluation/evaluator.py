from typing import Dict, List, Mapping, Optional, Sequence, Set
import logging
import os

import pandas as pd

from evaluation.metrics import EvaluationReport, evaluate_labels
from src.core.corpus import DescriptionRecord
from src.core.preprocess import normalize
from src.core.vocabulary import AttributeKind, ColorLexicon, LabelSet, default_color_lexicon, label_set_for
from src.pipeline.inference import DescriptionPrediction
from src.utils.errors import ValidationError
from src.utils.io import read_json, write_json

logger = logging.getLogger(__name__)


def gold_label(record: DescriptionRecord, attribute: AttributeKind) -> str:
    return record.gold_color_group if attribute is AttributeKind.COLOR else record.gold_work_type


def mentioned_color_groups(record: DescriptionRecord, lexicon: Optional[ColorLexicon] = None) -> Set[str]:
    """Every colour group named anywhere in the description."""
    lexicon = lexicon or default_color_lexicon()
    return {m.label for m in lexicon.find_mentions(normalize(record.text))}


class CostumeCoreEvaluator:
    """Score description-level predictions against gold labels."""

    def __init__(self, records: Sequence[DescriptionRecord], color_lexicon: Optional[ColorLexicon] = None):
        self.records = list(records)
        self.color_lexicon = color_lexicon or default_color_lexicon()
        self.reports: Dict[str, EvaluationReport] = {}

    def evaluate_attribute(self, attribute, predictions: Mapping[str, DescriptionPrediction],
                           label_set: Optional[LabelSet] = None) -> EvaluationReport:
        """Evaluate one attribute.

        Args:
            attribute: color or work_type
            predictions: DescriptionPrediction per description id

        Returns:
            EvaluationReport with top-k (k <= 3) and, for Color, the
            secondary-tolerant accuracy
        """
        attribute = AttributeKind.parse(attribute)
        missing = [r.id for r in self.records if r.id not in predictions]
        if missing:
            raise ValidationError(f"no {attribute.value} prediction for {len(missing)} descriptions, e.g. {missing[:5]}")

        golds = [gold_label(r, attribute) for r in self.records]
        preds = [predictions[r.id].label for r in self.records]
        ranked = [predictions[r.id].ranked_labels for r in self.records]
        label_set = label_set or label_set_for(attribute)
        accepted = None
        if attribute is AttributeKind.COLOR:
            accepted = [mentioned_color_groups(r, self.color_lexicon) for r in self.records]

        report = evaluate_labels(golds, preds, ranked, label_set, accepted)
        logger.info(f"{attribute.value}: accuracy {report.accuracy:.4f} over {report.total} descriptions "
                    f"(top-3 {report.top_k.get(3, float('nan')):.4f})")
        self.reports[attribute.value] = report
        return report

    def save_reports(self, out_dir: str, prefix: str = "") -> List[str]:
        """Write report JSON, the aligned table and the confusion CSV per attribute."""
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for attribute, report in self.reports.items():
            stem = os.path.join(out_dir, f"{prefix}{attribute}")
            write_json(f"{stem}_report.json", report.to_dict())
            with open(f"{stem}_report.txt", "w", encoding="utf-8", newline="\n") as f:
                f.write(report.format_table() + "\n")
            report.confusion.to_csv(f"{stem}_confusion.csv")
            written.extend([f"{stem}_report.json", f"{stem}_report.txt", f"{stem}_confusion.csv"])
        logger.info(f"Results saved to {out_dir}")
        return written

    def print_summary(self):
        """Print evaluation summary."""
        print("\n" + "=" * 60)
        print("EVALUATION SUMMARY")
        print("=" * 60)
        for attribute, report in self.reports.items():
            top3 = report.top_k.get(3)
            extra = f"  top-3 {top3:6.2%}" if top3 is not None else ""
            print(f"{attribute:12s}: accuracy {report.accuracy:6.2%}  weighted F1 {report.weighted['f1']:.2f}{extra}")
        print("=" * 60)


def load_report(path: str) -> EvaluationReport:
    return EvaluationReport.from_dict(read_json(path))


def comparison_table(stages: Mapping[str, Mapping[str, EvaluationReport]]) -> pd.DataFrame:
    """Top-1 and top-3 accuracy per stage and attribute.

    ``stages`` maps a stage name (e.g. "whole description", "sentence tokenized")
    to its reports keyed by attribute.
    """
    rows = []
    for stage, reports in stages.items():
        for attribute, report in reports.items():
            rows.append({"stage": stage, "attribute": attribute, "top1": report.accuracy,
                         "top3": report.top_k.get(3), "lenient": report.lenient_accuracy})
    return pd.DataFrame(rows, columns=["stage", "attribute", "top1", "top3", "lenient"])
