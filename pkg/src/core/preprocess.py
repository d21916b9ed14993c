"""Text normalization, sentence tokenization and sentence-level re-annotation."""
import logging
import re
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from src.core.vocabulary import (
    NO_COLOR,
    NO_WORK_TYPE,
    AttributeKind,
    ColorLexicon,
    WorkTypeLexicon,
    default_color_lexicon,
    default_work_type_lexicon,
)

logger = logging.getLogger(__name__)

# Accession numbers: digit groups joined by at least two periods (65.3.35).
# Decimals such as "2.5" are left alone.
_ACCESSION_RE = re.compile(r"(?<![\w.])\d+(?:\.\d+){2,}(?![\w])")
_WHITESPACE_RE = re.compile(r"\s+")
_SPACE_BEFORE_PUNCT_RE = re.compile(r" +([.,;:!?])")

_BOUNDARY_RE = re.compile(r"[.!?]+(?=\s|$)")
ABBREVIATIONS = frozenset({"approx", "ca", "no", "st", "mr", "mrs", "ms", "dr", "e.g", "i.e", "vs"})


@dataclass(frozen=True)
class SentenceSample:
    """One sentence (original or back-translated) with its derived labels."""

    description_id: str
    sentence_index: int
    variant_index: int
    text: str
    color_label: str = NO_COLOR
    work_type_label: str = NO_WORK_TYPE

    @property
    def key(self) -> Tuple[str, int, int]:
        return (self.description_id, self.sentence_index, self.variant_index)

    def label_for(self, attribute) -> str:
        if AttributeKind.parse(attribute) is AttributeKind.COLOR:
            return self.color_label
        return self.work_type_label

    def to_dict(self) -> Dict:
        return {
            "description_id": self.description_id,
            "sentence_index": self.sentence_index,
            "variant_index": self.variant_index,
            "text": self.text,
            "color": self.color_label,
            "work_type": self.work_type_label,
        }

    @classmethod
    def from_dict(cls, payload: Dict) -> "SentenceSample":
        return cls(str(payload["description_id"]), int(payload["sentence_index"]),
                   int(payload["variant_index"]), payload["text"],
                   payload.get("color", NO_COLOR), payload.get("work_type", NO_WORK_TYPE))


def normalize(text: str) -> str:
    """Lowercase, drop accession-number tokens and collapse whitespace."""
    if not text:
        return ""
    text = text.lower()
    # Repeat to a fixed point: removing an id can expose a new one
    while True:
        cleaned = _tidy(_ACCESSION_RE.sub(" ", _tidy(text)))
        if cleaned == text:
            return cleaned
        text = cleaned


def _tidy(text: str) -> str:
    text = _WHITESPACE_RE.sub(" ", text).strip()
    text = _SPACE_BEFORE_PUNCT_RE.sub(r"\1", text)
    # A leading delimiter is what is left of "65.3.35. text"
    return text.lstrip(".,;: ").strip()


def _is_abbreviation(text: str, end: int) -> bool:
    start = text.rfind(" ", 0, end) + 1
    return text[start:end].strip("(") in ABBREVIATIONS


def tokenize_sentences(text: str) -> List[str]:
    """Split normalized text on '.', '!' or '?' followed by a space or the end.

    Terminal delimiters are dropped; abbreviations such as "approx." do not
    end a sentence.
    """
    sentences = []
    start = 0
    for match in _BOUNDARY_RE.finditer(text):
        if match.group(0) == "." and _is_abbreviation(text, match.start()) and match.end() < len(text):
            continue
        sentence = text[start:match.start()].strip()
        if sentence:
            sentences.append(sentence)
        start = match.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def strip_terminal(sentence: str) -> str:
    return sentence.rstrip(" .!?").strip()


def annotate_sentence(sentence: str, gold_color_group: str, gold_work_type: str,
                      color_lexicon: Optional[ColorLexicon] = None,
                      work_type_lexicon: Optional[WorkTypeLexicon] = None) -> Tuple[str, str]:
    """Label a sentence with the description's gold labels when it mentions them.

    A sentence gets the gold colour group if any term of that group occurs in
    it (group-level match), and the gold work type if any of its surface forms
    occurs. Otherwise it gets the sentinel. Non-gold classes are never emitted.
    """
    color_lexicon = color_lexicon or default_color_lexicon()
    work_type_lexicon = work_type_lexicon or default_work_type_lexicon()

    color_label = NO_COLOR
    if gold_color_group != NO_COLOR:
        if any(m.label == gold_color_group for m in color_lexicon.find_mentions(sentence)):
            color_label = gold_color_group

    work_type_label = NO_WORK_TYPE
    if gold_work_type != NO_WORK_TYPE:
        if any(m.label == gold_work_type for m in work_type_lexicon.find_mentions(sentence)):
            work_type_label = gold_work_type

    return color_label, work_type_label


def relabel(sample: SentenceSample, gold_color_group: str, gold_work_type: str,
            color_lexicon: Optional[ColorLexicon] = None,
            work_type_lexicon: Optional[WorkTypeLexicon] = None) -> SentenceSample:
    color_label, work_type_label = annotate_sentence(
        sample.text, gold_color_group, gold_work_type, color_lexicon, work_type_lexicon)
    return replace(sample, color_label=color_label, work_type_label=work_type_label)


def sentence_samples(record, tokenize: bool = True,
                     color_lexicon: Optional[ColorLexicon] = None,
                     work_type_lexicon: Optional[WorkTypeLexicon] = None) -> List[SentenceSample]:
    """Tokenize and annotate one description into variant-0 samples.

    With ``tokenize=False`` the whole normalized description becomes a single
    sample carrying the description's gold labels unchanged, or no sample at
    all when only terminal punctuation is left.
    """
    text = normalize(record.text)
    if not tokenize:
        whole = strip_terminal(text)
        if not whole:
            return []
        return [SentenceSample(record.id, 0, 0, whole, record.gold_color_group, record.gold_work_type)]

    samples = []
    for index, sentence in enumerate(tokenize_sentences(text)):
        color_label, work_type_label = annotate_sentence(
            sentence, record.gold_color_group, record.gold_work_type, color_lexicon, work_type_lexicon)
        samples.append(SentenceSample(record.id, index, 0, sentence, color_label, work_type_label))
    logger.debug(f"Description {record.id}: {len(samples)} sentences")
    return samples
