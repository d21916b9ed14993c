"""Controlled-vocabulary label sets and term lexicons for Color and Work Type."""
import csv
import logging
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

from src.utils.errors import ConfigError, ParseError, UnknownLabel, UnknownTerm

logger = logging.getLogger(__name__)

NO_COLOR = "no-color"
NO_WORK_TYPE = "no_work_type"

# Editable copies of the built-in tables
SHIPPED_LEXICON_DIR = os.path.normpath(os.path.join(os.path.dirname(__file__), "..", "..", "data", "lexicons"))


class AttributeKind(Enum):
    COLOR = "color"
    WORK_TYPE = "work_type"

    @property
    def sentinel(self) -> str:
        return NO_COLOR if self is AttributeKind.COLOR else NO_WORK_TYPE

    @classmethod
    def parse(cls, value) -> "AttributeKind":
        if isinstance(value, cls):
            return value
        normalized = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        if normalized == "worktype":
            normalized = "work_type"
        return cls(normalized)


# Costume Core colour grouping. "gold" appears twice under metallic in the
# published table; a mapping keeps it once.
COLOR_GROUPS: Dict[str, str] = {
    "black": "black",
    "blue": "blue", "navy blue": "blue", "teal": "blue",
    "brown": "brown", "tan": "brown",
    "gray": "gray", "silver": "gray",
    "green": "green", "turquoise": "green",
    "gold": "metallic", "metallic": "metallic",
    "yellow": "yellow", "amber": "yellow",
    "coral": "orange", "orange": "orange", "brass": "orange",
    "fuchsia": "pink", "pink": "pink",
    "lavender": "purple", "purple": "purple",
    "burgundy": "red", "maroon": "red", "red": "red", "rust": "red",
    "beige": "white", "cream": "white", "white": "white", "clear": "white",
}

COLOR_SPELLING_VARIANTS: Dict[str, str] = {
    "grey": "gray",
    "navy": "navy blue",
    "creme": "cream",
    "fuschia": "fuchsia",
}

WORK_TYPE_LABELS: Tuple[str, ...] = (
    "accessories", "blouses", "cape", "coats", "crinolines", "dress",
    "jacket", "kimono", "shirt", "shorts", "suit", "sweater",
)

# Naive singular/plural pairs. "short" is deliberately absent: it is the
# adjective in "short brown ... cape".
WORK_TYPE_SURFACE_FORMS: Dict[str, str] = {
    "accessory": "accessories", "accessories": "accessories",
    "blouse": "blouses", "blouses": "blouses",
    "cape": "cape", "capes": "cape",
    "coat": "coats", "coats": "coats",
    "crinoline": "crinolines", "crinolines": "crinolines",
    "dress": "dress", "dresses": "dress",
    "jacket": "jacket", "jackets": "jacket",
    "kimono": "kimono", "kimonos": "kimono",
    "shirt": "shirt", "shirts": "shirt",
    "shorts": "shorts",
    "suit": "suit", "suits": "suit",
    "sweater": "sweater", "sweaters": "sweater",
}


@dataclass(frozen=True)
class LabelSet:
    """Ordered class labels of one attribute, including its sentinel."""

    attribute: AttributeKind
    classes: Tuple[str, ...]
    sentinel_index: int

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("a label set needs at least two classes")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError(f"duplicate class labels in {self.classes}")
        sentinel = self.attribute.sentinel
        if self.classes.count(sentinel) != 1 or self.classes[self.sentinel_index] != sentinel:
            raise ValueError(f"sentinel {sentinel!r} must appear exactly once at index {self.sentinel_index}")

    @property
    def sentinel(self) -> str:
        return self.classes[self.sentinel_index]

    def __len__(self) -> int:
        return len(self.classes)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    @property
    def _index(self) -> Dict[str, int]:
        return {label: i for i, label in enumerate(self.classes)}

    def index_of(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise UnknownLabel(f"{label!r} is not a {self.attribute.value} class") from None

    def label_at(self, index: int) -> str:
        return self.classes[index]

    def to_dict(self) -> Dict:
        return {
            "attribute": self.attribute.value,
            "classes": list(self.classes),
            "sentinel_index": self.sentinel_index,
        }

    @classmethod
    def from_dict(cls, payload: Mapping) -> "LabelSet":
        return cls(AttributeKind.parse(payload["attribute"]),
                   tuple(payload["classes"]), int(payload["sentinel_index"]))


class Mention(NamedTuple):
    term: str
    label: str
    span: Tuple[int, int]


class _TermMatcher:
    """Longest-match-first, left-to-right scanner over a surface-form table."""

    def __init__(self, surface_to_label: Mapping[str, str]):
        self.surface_to_label = dict(surface_to_label)
        # Longer alternatives first so "navy blue" wins over "blue" at the
        # same start position; regex alternation takes the first that fits.
        alternatives = sorted(self.surface_to_label, key=lambda t: (-len(t), t))
        body = "|".join(re.escape(term).replace(r"\ ", r"\s+") for term in alternatives)
        self.pattern = re.compile(rf"(?<![a-z0-9])(?:{body})(?![a-z0-9])")

    def scan(self, sentence: str) -> List[Mention]:
        mentions = []
        for match in self.pattern.finditer(sentence):
            term = " ".join(match.group(0).split())
            mentions.append(Mention(term, self.surface_to_label[term], (match.start(), match.end())))
        return mentions


@dataclass(frozen=True)
class ColorLexicon:
    """Raw colour term -> colour group, plus spelling variants."""

    term_to_group: Mapping[str, str] = field(default_factory=lambda: dict(COLOR_GROUPS))
    spelling_variants: Mapping[str, str] = field(default_factory=lambda: dict(COLOR_SPELLING_VARIANTS))

    def __post_init__(self):
        for variant, canonical in self.spelling_variants.items():
            if canonical not in self.term_to_group:
                raise ValueError(f"spelling variant {variant!r} points to unknown term {canonical!r}")
        surface = dict(self.term_to_group)
        surface.update({v: self.term_to_group[c] for v, c in self.spelling_variants.items()})
        object.__setattr__(self, "_matcher", _TermMatcher(surface))

    @property
    def groups(self) -> Tuple[str, ...]:
        return tuple(sorted(set(self.term_to_group.values()))) + (NO_COLOR,)

    def label_set(self) -> LabelSet:
        groups = self.groups
        return LabelSet(AttributeKind.COLOR, groups, len(groups) - 1)

    def canonical(self, term: str) -> str:
        key = " ".join(term.lower().split())
        key = self.spelling_variants.get(key, key)
        if key not in self.term_to_group:
            raise UnknownTerm(term, "color")
        return key

    def map_term(self, term: str) -> str:
        return self.term_to_group[self.canonical(term)]

    def find_mentions(self, sentence: str) -> List[Mention]:
        return self._matcher.scan(sentence)


@dataclass(frozen=True)
class WorkTypeLexicon:
    """Work-type labels and their singular/plural surface forms."""

    labels: Tuple[str, ...] = WORK_TYPE_LABELS
    surface_forms: Mapping[str, str] = field(default_factory=lambda: dict(WORK_TYPE_SURFACE_FORMS))

    def __post_init__(self):
        for surface, label in self.surface_forms.items():
            if label not in self.labels:
                raise ValueError(f"surface form {surface!r} maps to unknown label {label!r}")
        object.__setattr__(self, "_matcher", _TermMatcher(self.surface_forms))

    def label_set(self) -> LabelSet:
        classes = tuple(self.labels) + (NO_WORK_TYPE,)
        return LabelSet(AttributeKind.WORK_TYPE, classes, len(classes) - 1)

    def map_term(self, term: str) -> str:
        key = " ".join(term.lower().split())
        if key in self.labels:
            return key
        if key not in self.surface_forms:
            raise UnknownTerm(term, "work type")
        return self.surface_forms[key]

    def find_mentions(self, sentence: str) -> List[Mention]:
        return self._matcher.scan(sentence)


# -- file form ---------------------------------------------------------------

def read_term_table(path: str) -> Dict[str, str]:
    """Read ``term<TAB>target`` rows; '#' lines are comments."""
    table: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f, delimiter="\t")
        for line_number, row in enumerate(reader, start=1):
            if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2 or not row[1].strip():
                raise ParseError("expected 'term<TAB>group'", line_number, path)
            term = " ".join(row[0].lower().split())
            target = " ".join(row[1].lower().split())
            if term in table and table[term] != target:
                raise ParseError(f"term {term!r} mapped to both {table[term]!r} and {target!r}",
                                 line_number, path)
            table[term] = target
    return table


def load_color_lexicon(lexicon_dir: str = SHIPPED_LEXICON_DIR) -> ColorLexicon:
    groups = read_term_table(os.path.join(lexicon_dir, "color_groups.tsv"))
    variants_path = os.path.join(lexicon_dir, "color_spelling_variants.tsv")
    variants = read_term_table(variants_path) if os.path.exists(variants_path) else {}
    logger.debug(f"Loaded {len(groups)} colour terms and {len(variants)} spelling variants from {lexicon_dir}")
    return ColorLexicon(groups, variants)


def load_work_type_lexicon(lexicon_dir: str = SHIPPED_LEXICON_DIR) -> WorkTypeLexicon:
    forms = read_term_table(os.path.join(lexicon_dir, "work_types.tsv"))
    labels = tuple(sorted(set(forms.values())))
    logger.debug(f"Loaded {len(forms)} work-type surface forms ({len(labels)} labels) from {lexicon_dir}")
    return WorkTypeLexicon(labels, forms)


@lru_cache(maxsize=None)
def default_color_lexicon() -> ColorLexicon:
    return ColorLexicon()


@lru_cache(maxsize=None)
def default_work_type_lexicon() -> WorkTypeLexicon:
    return WorkTypeLexicon()


def label_set_for(attribute) -> LabelSet:
    attribute = AttributeKind.parse(attribute)
    if attribute is AttributeKind.COLOR:
        return default_color_lexicon().label_set()
    return default_work_type_lexicon().label_set()


def load_lexicons(lexicon_dir: str = "") -> Tuple[ColorLexicon, WorkTypeLexicon]:
    """Colour and Work Type lexicons read from ``lexicon_dir``; the built-in tables when it is empty.

    Raises:
        ConfigError: the directory or one of its tables is missing.
        ParseError: a table row is malformed.
    """
    if not lexicon_dir:
        return default_color_lexicon(), default_work_type_lexicon()
    for name in ("color_groups.tsv", "work_types.tsv"):
        if not os.path.isfile(os.path.join(lexicon_dir, name)):
            raise ConfigError("lexicon_dir", f"{name} not found in {lexicon_dir}")
    color, work = load_color_lexicon(lexicon_dir), load_work_type_lexicon(lexicon_dir)
    logger.info(f"Using lexicons from {lexicon_dir}: {len(color.term_to_group)} colour terms, "
                f"{len(work.labels)} work types")
    return color, work


# -- operations --------------------------------------------------------------

def map_color_term(term: str, lexicon: Optional[ColorLexicon] = None) -> str:
    """Map a raw Costume Core colour term (or spelling variant) to its group.

    Raises:
        UnknownTerm: the term is not in the lexicon.
    """
    return (lexicon or default_color_lexicon()).map_term(term)


def find_mentions(sentence: str, attribute, lexicon=None) -> List[Mention]:
    """All non-overlapping lexicon mentions in a normalized sentence.

    Returns:
        ``Mention(term, label, (start, end))`` tuples, left to right.
    """
    attribute = AttributeKind.parse(attribute)
    if lexicon is None:
        lexicon = default_color_lexicon() if attribute is AttributeKind.COLOR else default_work_type_lexicon()
    return lexicon.find_mentions(sentence)
