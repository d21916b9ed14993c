from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from src.core.corpus import DescriptionRecord, make_record, save_corpus
from src.core.vocabulary import (
    NO_COLOR,
    NO_WORK_TYPE,
    ColorLexicon,
    default_color_lexicon,
)

logger = logging.getLogger(__name__)

# Share of descriptions per colour group; white dominates as in museum holdings.
COLOR_GROUP_WEIGHTS: Dict[str, float] = {
    "white": 0.20, "black": 0.11, "blue": 0.10, "brown": 0.08, "red": 0.08,
    "green": 0.07, "pink": 0.07, "purple": 0.06, "gray": 0.06, "yellow": 0.06,
    "metallic": 0.05, "orange": 0.06,
}

# Surface forms used when writing a garment of each work type.
WORK_TYPE_PHRASES: Dict[str, Tuple[str, ...]] = {
    "dress": ("dress",),
    "coats": ("coat",),
    "jacket": ("jacket",),
    "blouses": ("blouse",),
    "cape": ("cape",),
    "suit": ("suit",),
    "shirt": ("shirt",),
    "sweater": ("sweater",),
    "kimono": ("kimono",),
    "shorts": ("shorts",),
    "crinolines": ("crinoline",),
    "accessories": ("accessories",),
}

WORK_TYPE_WEIGHTS: Dict[str, float] = {
    "dress": 0.22, "coats": 0.10, "jacket": 0.09, "blouses": 0.09, "cape": 0.07,
    "suit": 0.07, "shirt": 0.07, "sweater": 0.06, "kimono": 0.05, "shorts": 0.06,
    "crinolines": 0.05, "accessories": 0.07,
}

WEARERS = ("woman's", "girl's", "man's", "child's", "lady's", "")
STYLES = ("evening", "day", "formal", "fitted", "pleated", "long", "short", "sleeveless",
          "embroidered", "tailored", "beaded", "quilted", "")
MATERIALS = ("silk", "cotton", "wool", "velvet", "organza", "satin", "linen", "taffeta",
             "chiffon", "crepe", "brocade", "jersey", "tweed", "voile")
TRIM_MATERIALS = ("velvet", "satin", "silk", "lace", "braid", "ribbon", "piping", "cord")
PARTS = ("collar", "cuffs", "bodice", "sleeves", "hem", "waistband", "lapels", "yoke", "neckline")
LOCATIONS = ("waist", "neckline", "shoulder", "hem", "center front", "back")
PATTERN_WORDS = ("multicolored", "printed floral", "plaid", "striped", "paisley print")
NON_GARMENTS = ("fabric sample", "textile fragment", "swatch", "sewing pattern")

PLAIN_DETAILS = (
    "{part} trimmed in lace and floral embroidery.",
    "fastens at the center front with {count} covered buttons.",
    "{part} finished with narrow pleats.",
    "hand stitched seams throughout.",
    "{part} gathered into a fitted band.",
    "pockets set into the side seams.",
)

SECONDARY_DETAILS = (
    "{part} trimmed in {secondary} {trim}.",
    "lined with {secondary} {material}.",
    "{secondary} {trim} bow at the {location}.",
    "{part} and {part2} of {secondary} {material}.",
    "{secondary} {trim} {part} with tiny stitches.",
)

NEUTRAL_SENTENCES = (
    "Worn by the donor's mother at her wedding in {year}.",
    "Label reads made in paris.",
    "Purchased at a department store in {year}.",
    "Donated by the family of the original owner.",
    "Shows minor wear at the seams.",
    "Catalogued as {accession}.",
    "Part of a collection assembled in the {decade}s.",
    "Small repair near the left side seam.",
)

REPEATS = (
    "The {primary} {material} shows light wear.",
    "Matching {primary} {material} belt included.",
)


def _capitalize(sentence: str) -> str:
    return sentence[:1].upper() + sentence[1:]


class SyntheticCorpusGenerator:
    """Seeded generator of labelled garment descriptions.

    Each description reads "<wearer> <style> <colour> <material> <garment>."
    followed by a detail sentence (about half the time naming a secondary colour
    from another group) and a neutral provenance sentence. A few records have
    no colour or no work type at all.
    """

    def __init__(self, seed: int = 7, secondary_rate: float = 0.55, repeat_rate: float = 0.3,
                 no_color_rate: float = 0.04, no_work_type_rate: float = 0.04,
                 color_lexicon: Optional[ColorLexicon] = None):
        self.seed = seed
        self.secondary_rate = secondary_rate
        self.repeat_rate = repeat_rate
        self.no_color_rate = no_color_rate
        self.no_work_type_rate = no_work_type_rate
        self.color_lexicon = color_lexicon or default_color_lexicon()
        self._terms_by_group: Dict[str, List[str]] = {}
        for term, group in sorted(self.color_lexicon.term_to_group.items()):
            self._terms_by_group.setdefault(group, []).append(term)

    @staticmethod
    def accession_id(i: int) -> str:
        return f"{50 + i // 100}.{i // 10 % 10 + 1}.{i + 1}"

    def _pick(self, rng: np.random.Generator, options: Sequence[str]) -> str:
        return options[int(rng.integers(len(options)))]

    def _weighted(self, rng: np.random.Generator, weights: Dict[str, float]) -> str:
        keys = list(weights)
        p = np.array([weights[k] for k in keys], dtype=np.float64)
        return keys[int(rng.choice(len(keys), p=p / p.sum()))]

    def _color_term(self, rng: np.random.Generator, group: str) -> str:
        return self._pick(rng, self._terms_by_group[group])

    def generate_one(self, i: int, rng: np.random.Generator) -> DescriptionRecord:
        no_color = rng.random() < self.no_color_rate
        no_work_type = rng.random() < self.no_work_type_rate
        group = self._weighted(rng, COLOR_GROUP_WEIGHTS)
        term = self._color_term(rng, group)
        work_type = self._weighted(rng, WORK_TYPE_WEIGHTS)
        garment = self._pick(rng, NON_GARMENTS) if no_work_type else self._pick(rng, WORK_TYPE_PHRASES[work_type])
        material = self._pick(rng, MATERIALS)
        wearer = self._pick(rng, WEARERS)
        style = self._pick(rng, STYLES)
        colour_words = self._pick(rng, PATTERN_WORDS) if no_color else term
        words = [wearer, style, colour_words, material, garment]
        if garment == "shorts":
            words.insert(0, "pair of")
        sentences = [_capitalize(" ".join(w for w in words if w)) + "."]
        fields = {
            "part": self._pick(rng, PARTS), "part2": self._pick(rng, PARTS),
            "trim": self._pick(rng, TRIM_MATERIALS), "material": self._pick(rng, MATERIALS),
            "location": self._pick(rng, LOCATIONS), "count": str(int(rng.integers(3, 13))),
        }
        if not no_color and rng.random() < self.secondary_rate:
            other_groups = [g for g in COLOR_GROUP_WEIGHTS if g != group]
            secondary = self._color_term(rng, self._pick(rng, other_groups))
            template = self._pick(rng, SECONDARY_DETAILS)
            if fields["part2"] == fields["part"]:
                fields["part2"] = "pockets"
            detail = template.format(secondary=secondary, **fields)
        else:
            detail = self._pick(rng, PLAIN_DETAILS).format(**fields)
        sentences.append(_capitalize(detail))

        if not no_color and rng.random() < self.repeat_rate:
            sentences.append(_capitalize(self._pick(rng, REPEATS).format(primary=term, material=material)))
        year = int(rng.integers(1880, 1991))
        sentences.append(self._pick(rng, NEUTRAL_SENTENCES).format(
            year=year, decade=year // 10 * 10, accession=f"{year}.{int(rng.integers(1, 40))}.{int(rng.integers(1, 200))}"))

        return make_record(self.accession_id(i), " ".join(sentences),
                           NO_COLOR if no_color else term,
                           NO_WORK_TYPE if no_work_type else work_type,
                           color_lexicon=self.color_lexicon)

    def generate(self, n: int) -> List[DescriptionRecord]:
        """``n`` descriptions; the same seed always yields the same corpus."""
        if n < 1:
            raise ValueError(f"n must be positive, got {n}")
        rng = np.random.default_rng(self.seed)
        records = [self.generate_one(i, rng) for i in range(n)]
        groups = {r.gold_color_group for r in records} - {NO_COLOR}
        work_types = {r.gold_work_type for r in records} - {NO_WORK_TYPE}
        logger.info(f"Generated {n} synthetic descriptions (seed {self.seed}): "
                    f"{len(groups)} colour groups, {len(work_types)} work types")
        return records


def write_synthetic_corpus(path: str, n: int = 400, seed: int = 7) -> List[DescriptionRecord]:
    records = SyntheticCorpusGenerator(seed=seed).generate(n)
    save_corpus(records, path)
    logger.info(f"Synthetic corpus written to {path}")
    return records
