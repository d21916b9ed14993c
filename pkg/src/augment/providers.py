"""Translation providers used by back-translation augmentation."""
import hashlib
import logging
import time
from abc import ABC, abstractmethod
from typing import Dict, List, Optional

import numpy as np
import requests

from config.settings import config
from src.core.vocabulary import default_color_lexicon, default_work_type_lexicon
from src.utils.errors import EmptyTranslation, ProviderUnavailable

logger = logging.getLogger(__name__)


class TranslationProvider(ABC):
    """Abstract base class for translation providers."""

    @abstractmethod
    def translate(self, text: str, source: str, target: str) -> str:
        """Translate ``text`` from ``source`` to ``target`` language code."""
        pass

    @abstractmethod
    def get_name(self) -> str:
        """Get provider name (part of the translation cache key)."""
        pass


class IdentityProvider(TranslationProvider):
    """Returns its input unchanged; back-translation becomes a no-op."""

    def translate(self, text: str, source: str, target: str) -> str:
        return text

    def get_name(self) -> str:
        return "identity"


# Per-pivot word substitutions, applied on the hop into the pivot language.
# They mimic the lexical drift back-translation introduces ("studs" coming
# back as "rivets", "cuffs" as "fists"). Colour and work-type terms are not
# in these tables; the only colour swaps stay inside one colour group.
PIVOT_SYNONYMS: Dict[str, Dict[str, str]] = {
    "fr": {
        "formal": "ceremonial", "long": "lengthy", "trimmed": "garnished",
        "collar": "neckline", "sleeves": "arms", "buttons": "knobs",
        "lace": "lacework", "fabric": "cloth", "lined": "doubled",
        "cream": "white", "embroidery": "embroideries", "waist": "size",
        "front": "facade", "small": "little",
    },
    "de": {
        "stud": "rivet", "studs": "rivets", "buttonholes": "eyelets",
        "floral": "flowery", "design": "pattern", "detailing": "details",
        "pleated": "folded", "evening": "night",
        "hem": "seam", "tan": "brown", "fitted": "tailored",
        "ribbon": "band", "panel": "field",
    },
    "es": {
        "stud": "nail", "bib": "bath", "cuffs": "fists", "lined": "coated",
        "formal": "elegant", "narrow": "thin", "bodice": "body",
        "beige": "cream", "neckline": "neck", "shoulder": "shoulders",
        "worn": "used", "velvet": "velour", "decorated": "adorned",
        "large": "big",
    },
}


def _stable_seed(*parts: str) -> int:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class OfflineProvider(TranslationProvider):
    """Deterministic stand-in for a translation service.

    The hop into a pivot language substitutes words from a per-pivot synonym
    table; the hop back to English applies at most one adjacent word swap and
    may drop one adjective-like word. Every decision is drawn from a generator
    seeded by (seed, languages, text), so identical requests always produce
    identical output.
    """

    def __init__(self, seed: int = 13, substitution_rate: float = 0.5,
                 swap_rate: float = 0.5, drop_rate: float = 0.25):
        self.seed = seed
        self.substitution_rate = substitution_rate
        self.swap_rate = swap_rate
        self.drop_rate = drop_rate
        color = default_color_lexicon()
        work = default_work_type_lexicon()
        self._protected = set()
        for term in list(color.term_to_group) + list(color.spelling_variants) + list(work.surface_forms):
            self._protected.update(term.split())

    def get_name(self) -> str:
        return f"offline-{self.seed}"

    def _rng(self, text: str, source: str, target: str) -> np.random.Generator:
        return np.random.default_rng(_stable_seed(str(self.seed), source, target, text))

    def translate(self, text: str, source: str, target: str) -> str:
        if not text.strip():
            raise EmptyTranslation("cannot translate empty text")
        rng = self._rng(text, source, target)
        words = text.split()
        if source == "en" and target in PIVOT_SYNONYMS:
            return " ".join(self._substitute(words, PIVOT_SYNONYMS[target], rng))
        if target == "en":
            return " ".join(self._reorder(words, rng))
        return text

    def _substitute(self, words: List[str], table: Dict[str, str], rng) -> List[str]:
        out = []
        for word in words:
            core = word.rstrip(",;:")
            tail = word[len(core):]
            draw = rng.random()
            if core in table and draw < self.substitution_rate:
                out.append(table[core] + tail)
            else:
                out.append(word)
        return out

    def _reorder(self, words: List[str], rng) -> List[str]:
        words = list(words)
        swap_draw, drop_draw = rng.random(), rng.random()
        free = [i for i, w in enumerate(words)
                if w.strip(",;:") not in self._protected and w.isalpha() and len(w) > 3]
        if len(words) > 3 and drop_draw < self.drop_rate and free:
            del words[free[int(rng.integers(len(free)))]]
        if len(words) > 2 and swap_draw < self.swap_rate:
            i = int(rng.integers(len(words) - 1))
            if words[i].isalpha() and words[i + 1].isalpha():
                words[i], words[i + 1] = words[i + 1], words[i]
        return words


class EndpointProvider(TranslationProvider):
    """HTTP client for a translation service.

    Request: ``POST {"text", "source", "target"}``; response: ``{"text": ...}``.
    Failures are retried with exponential backoff, then surfaced.
    """

    def __init__(self, url: str, timeout: Optional[float] = None,
                 max_retries: Optional[int] = None, backoff: Optional[float] = None,
                 session: Optional[requests.Session] = None):
        """Initialize the endpoint provider.

        Args:
            url: Translation endpoint URL
            timeout: Request timeout in seconds
            max_retries: Total attempts per request
            backoff: Initial sleep between attempts, doubled each retry
        """
        if not url:
            raise ProviderUnavailable("no translation endpoint configured (TRANSLATION_ENDPOINT)")
        self.url = url
        self.timeout = config.REQUEST_TIMEOUT if timeout is None else timeout
        self.max_retries = config.MAX_RETRIES if max_retries is None else max_retries
        self.backoff = config.RETRY_BACKOFF if backoff is None else backoff
        self.session = session or requests.Session()
        logger.info(f"Translation endpoint provider initialized: {url}")

    def get_name(self) -> str:
        return f"endpoint:{self.url}"

    def translate(self, text: str, source: str, target: str) -> str:
        payload = {"text": text, "source": source, "target": target}
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries):
            try:
                response = self.session.post(self.url, json=payload, timeout=self.timeout)
                response.raise_for_status()
                body = response.json()
                if not isinstance(body, dict):
                    raise ValueError(f"expected a JSON object, got {type(body).__name__}")
                translated = body.get("text", "")
                if not isinstance(translated, str) or not translated.strip():
                    raise EmptyTranslation(f"provider returned empty text for {source}->{target}")
                return translated
            except (requests.exceptions.RequestException, ValueError) as e:
                last_error = e
                logger.warning(f"Translation request failed (attempt {attempt + 1}/{self.max_retries}): {str(e)}")
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise ProviderUnavailable(f"translation endpoint {self.url} unavailable: {last_error}")


class ProviderFactory:
    """Factory for creating translation providers."""

    @staticmethod
    def create(name: str, seed: int = 13, endpoint: str = "") -> TranslationProvider:
        if name == "offline":
            return OfflineProvider(seed=seed)
        if name == "identity":
            return IdentityProvider()
        if name == "endpoint":
            return EndpointProvider(endpoint or config.TRANSLATION_ENDPOINT)
        raise ValueError(f"Unknown translation provider: {name}")
