"""Back-translation of sentences through pivot languages."""
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from src.augment.cache import TranslationCache
from src.augment.providers import TranslationProvider
from src.core.preprocess import SentenceSample, annotate_sentence, normalize, strip_terminal
from src.core.vocabulary import ColorLexicon, WorkTypeLexicon
from src.utils.errors import AugmentationError, EmptyTranslation

logger = logging.getLogger(__name__)

SOURCE_LANGUAGE = "en"
PIVOT_LANGUAGES = ("fr", "de", "es")


@dataclass(frozen=True)
class AugmentationChain:
    chain_id: int
    pivot: str

    def __post_init__(self):
        if self.chain_id < 1:
            raise ValueError(f"chain_id must be >= 1, got {self.chain_id}")
        if self.pivot not in PIVOT_LANGUAGES:
            raise ValueError(f"unsupported pivot language {self.pivot!r}")


DEFAULT_CHAINS: Tuple[AugmentationChain, ...] = tuple(
    AugmentationChain(i, pivot) for i, pivot in enumerate(PIVOT_LANGUAGES, start=1))


def make_chains(pivots: Sequence[str]) -> Tuple[AugmentationChain, ...]:
    if len(set(pivots)) != len(pivots):
        raise ValueError(f"duplicate pivot languages in {list(pivots)}")
    return tuple(AugmentationChain(i, pivot) for i, pivot in enumerate(pivots, start=1))


def _cached_translate(text: str, source: str, target: str, provider: TranslationProvider,
                      cache: Optional[TranslationCache]) -> str:
    name = provider.get_name()
    if cache is not None:
        hit = cache.get(name, source, target, text)
        if hit is not None:
            return hit
    translated = provider.translate(text, source, target)
    if not translated or not translated.strip():
        raise EmptyTranslation(f"{name} returned empty text for {source}->{target}")
    if cache is not None:
        cache.put(name, source, target, text, translated)
    return translated


def back_translate(sentence: str, chain: AugmentationChain, provider: TranslationProvider,
                   cache: Optional[TranslationCache] = None) -> str:
    """English -> pivot -> English through one chain; both hops cached.

    Raises:
        ProviderUnavailable: the provider failed (never skipped silently)
        EmptyTranslation: the provider returned empty text
    """
    if not sentence or not sentence.strip():
        raise EmptyTranslation("cannot back-translate an empty sentence", chain_id=chain.chain_id)
    pivot_text = _cached_translate(sentence, SOURCE_LANGUAGE, chain.pivot, provider, cache)
    return _cached_translate(pivot_text, chain.pivot, SOURCE_LANGUAGE, provider, cache)


def augment_sentence(sample: SentenceSample, chains: Sequence[AugmentationChain],
                     provider: TranslationProvider, cache: Optional[TranslationCache] = None,
                     gold_color_group: Optional[str] = None, gold_work_type: Optional[str] = None,
                     color_lexicon: Optional[ColorLexicon] = None,
                     work_type_lexicon: Optional[WorkTypeLexicon] = None) -> List[SentenceSample]:
    """Expand an original sentence into itself plus one variant per chain.

    Each variant is re-annotated against the description's gold labels, so a
    variant that lost the gold term falls back to the sentinel. Without gold
    labels (prediction time) variants inherit the sentinels.
    """
    if sample.variant_index != 0:
        raise ValueError(f"only original sentences (variant 0) can be augmented, got variant {sample.variant_index}")

    variants = [sample]
    for chain in chains:
        try:
            raw = back_translate(sample.text, chain, provider, cache)
        except AugmentationError as e:
            logger.error(f"Back-translation failed for {sample.description_id}/{sample.sentence_index} "
                         f"via {chain.pivot}: {e.message}")
            raise e.with_chain(chain.chain_id) from e
        text = strip_terminal(normalize(raw))
        if not text:
            raise EmptyTranslation("back-translation normalized to empty text", chain_id=chain.chain_id)

        variant = replace(sample, variant_index=chain.chain_id, text=text)
        if gold_color_group is not None and gold_work_type is not None:
            color_label, work_type_label = annotate_sentence(
                text, gold_color_group, gold_work_type, color_lexicon, work_type_lexicon)
            variant = replace(variant, color_label=color_label, work_type_label=work_type_label)
        variants.append(variant)
    return variants
