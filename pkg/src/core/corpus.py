"""Garment description records: loading, validation, saving and the 80/20 split."""
import json
import os
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from sklearn.model_selection import train_test_split

from src.core.preprocess import normalize
from src.core.vocabulary import (
    NO_COLOR,
    NO_WORK_TYPE,
    ColorLexicon,
    WorkTypeLexicon,
    default_color_lexicon,
    default_work_type_lexicon,
)
from src.utils.errors import ParseError, TooFewRecords, UnknownTerm, ValidationError
from src.utils.io import dumps_record, iter_jsonl

logger = logging.getLogger(__name__)

CORPUS_KEYS = ("id", "text", "color", "work_type")


@dataclass(frozen=True)
class DescriptionRecord:
    """One garment: its free-form description and gold Color / Work Type."""

    id: str
    text: str
    gold_color_term: str
    gold_color_group: str
    gold_work_type: str

    def to_dict(self) -> Dict[str, str]:
        return {
            "id": self.id,
            "text": self.text,
            "color": self.gold_color_term,
            "work_type": self.gold_work_type,
        }


def make_record(record_id: str, text: str, color: str, work_type: str,
                color_lexicon: Optional[ColorLexicon] = None,
                work_type_lexicon: Optional[WorkTypeLexicon] = None) -> DescriptionRecord:
    """Validate raw fields and derive the gold colour group.

    Raises:
        ValidationError: empty text or a gold label outside the lexicons.
    """
    color_lexicon = color_lexicon or default_color_lexicon()
    work_type_lexicon = work_type_lexicon or default_work_type_lexicon()

    record_id = str(record_id).strip()
    if not record_id:
        raise ValidationError("record id must be nonempty")
    if not normalize(text):
        raise ValidationError(f"record {record_id}: text is empty after normalization")

    color = " ".join(str(color).lower().split()) or NO_COLOR
    if color in (NO_COLOR, "no color", "no_color"):
        color_term, color_group = NO_COLOR, NO_COLOR
    else:
        try:
            color_term = color
            color_group = color_lexicon.map_term(color)
        except UnknownTerm:
            raise ValidationError(f"record {record_id}: unknown gold color {color!r}") from None

    work_type = " ".join(str(work_type).lower().split()) or NO_WORK_TYPE
    if work_type in (NO_WORK_TYPE, "no work type", "no-work-type"):
        work_type = NO_WORK_TYPE
    else:
        try:
            work_type = work_type_lexicon.map_term(work_type)
        except UnknownTerm:
            raise ValidationError(f"record {record_id}: unknown gold work type {work_type!r}") from None

    return DescriptionRecord(record_id, text, color_term, color_group, work_type)


def load_corpus(path: str, require_labels: bool = True,
                color_lexicon: Optional[ColorLexicon] = None,
                work_type_lexicon: Optional[WorkTypeLexicon] = None) -> List[DescriptionRecord]:
    """Load a line-delimited corpus file.

    Args:
        path: UTF-8 file, one ``{"id", "text", "color", "work_type"}`` object per line
        require_labels: when False, missing gold labels default to the sentinels
            (used for prediction over unlabeled descriptions)

    Raises:
        ParseError: a malformed line (with its line number)
        ValidationError: an unknown gold label or a duplicate id
    """
    records: List[DescriptionRecord] = []
    seen: Dict[str, int] = {}
    for line_number, line in iter_jsonl(path):
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON ({e.msg})", line_number, path) from None
        if not isinstance(payload, dict):
            raise ParseError("expected a JSON object", line_number, path)

        required = CORPUS_KEYS if require_labels else CORPUS_KEYS[:2]
        missing = [key for key in required if key not in payload]
        if missing:
            raise ParseError(f"missing keys {missing}", line_number, path)
        if not isinstance(payload["text"], str):
            raise ParseError("'text' must be a string", line_number, path)

        record_id = str(payload["id"])
        if record_id in seen:
            raise ValidationError(
                f"duplicate id {record_id!r} on lines {seen[record_id]} and {line_number}")
        seen[record_id] = line_number

        try:
            record = make_record(record_id, payload["text"],
                                 payload.get("color", NO_COLOR), payload.get("work_type", NO_WORK_TYPE),
                                 color_lexicon, work_type_lexicon)
        except ValidationError as e:
            raise ValidationError(f"{path}:{line_number}: {e}") from None
        records.append(record)

    logger.info(f"Loaded {len(records)} descriptions from {path}")
    return records


def save_corpus(records: Iterable[DescriptionRecord], path: str) -> int:
    """Write records in the corpus file format, keys in fixed order."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(dumps_record(record.to_dict()))
            f.write("\n")
            count += 1
    logger.info(f"Saved {count} descriptions to {path}")
    return count


@dataclass(frozen=True)
class CorpusSplit:
    train_ids: FrozenSet[str]
    test_ids: FrozenSet[str]
    seed: int
    ratio: float

    def partition(self, records: Sequence[DescriptionRecord]) -> Tuple[List[DescriptionRecord], List[DescriptionRecord]]:
        """Split records into (train, test), keeping the input order on each side."""
        train = [r for r in records if r.id in self.train_ids]
        test = [r for r in records if r.id in self.test_ids]
        return train, test

    def to_dict(self) -> Dict:
        return {
            "seed": self.seed,
            "ratio": self.ratio,
            "train_ids": sorted(self.train_ids),
            "test_ids": sorted(self.test_ids),
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "CorpusSplit":
        return cls(frozenset(payload["train_ids"]), frozenset(payload["test_ids"]),
                   int(payload["seed"]), float(payload["ratio"]))


def partition_sizes(n: int, ratio: float) -> Tuple[int, int]:
    """Number of (train, test) items for ``n`` items; both sides nonempty."""
    n_train = min(max(int(round(ratio * n)), 1), n - 1)
    return n_train, n - n_train


def split_corpus(records: Sequence[DescriptionRecord], ratio: float = 0.8, seed: int = 42,
                 stratified: bool = False) -> CorpusSplit:
    """Shuffle-split whole descriptions into train and test sides.

    Raises:
        TooFewRecords: fewer than two records.
        ValueError: ratio outside (0, 1).
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    if len(records) < 2:
        raise TooFewRecords(f"need at least 2 records to split, got {len(records)}")

    ids = [r.id for r in records]
    n_train, n_test = partition_sizes(len(ids), ratio)

    stratify = None
    if stratified:
        groups = [r.gold_color_group for r in records]
        counts = {g: groups.count(g) for g in set(groups)}
        if min(counts.values()) >= 2 and len(counts) <= min(n_train, n_test):
            stratify = groups
        else:
            logger.warning("Stratified split impossible for this corpus; falling back to a uniform shuffle split")

    train_ids, test_ids = train_test_split(ids, train_size=n_train, test_size=n_test,
                                           random_state=seed, shuffle=True, stratify=stratify)
    logger.info(f"Split {len(ids)} descriptions into {len(train_ids)} train / {len(test_ids)} test (seed={seed})")
    return CorpusSplit(frozenset(train_ids), frozenset(test_ids), seed, ratio)
