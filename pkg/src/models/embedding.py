"""Sentence embedding backends."""
import logging
import re
import time
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Tuple

import numpy as np
import requests
from sklearn.utils import murmurhash3_32

from config.settings import config
from src.utils.errors import BackendUnavailable

logger = logging.getLogger(__name__)


class EmbeddingBackend(ABC):
    """Maps a sentence to a fixed-length real vector of dimension m."""

    dimension: int

    @abstractmethod
    def embed(self, text: str) -> np.ndarray:
        pass

    @abstractmethod
    def get_name(self) -> str:
        pass

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        """Embed many texts; rows follow the input order."""
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.vstack([self.embed(text) for text in texts])


_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z]+)?|[^\sa-z0-9]")


class HashingEmbedder(EmbeddingBackend):
    """Feature-hashed bag of word n-grams, L2-normalized.

    Same hashing scheme as a HashingVectorizer with ``alternate_sign=True``
    and ``norm='l2'``, with a configurable hash seed: the bucket is
    ``|h| mod m`` and the count carries the sign of ``h``. An n-gram of order
    n counts ``ngram_decay ** (n - 1)``.

    Non-whitespace input always yields a unit vector (if signed collisions
    cancel out exactly, the unsigned counts are used); empty input yields the
    zero vector.
    """

    def __init__(self, dimension: int = 512, ngram_orders: Tuple[int, ...] = (1, 2), seed: int = 0,
                 alternate_sign: bool = True, ngram_decay: float = 0.35):
        if dimension < 1:
            raise ValueError(f"dimension must be positive, got {dimension}")
        if not 0.0 < ngram_decay <= 1.0:
            raise ValueError(f"ngram_decay must be in (0, 1], got {ngram_decay}")
        self.dimension = dimension
        self.ngram_orders = tuple(ngram_orders)
        self.seed = seed
        self.alternate_sign = alternate_sign
        self.ngram_decay = ngram_decay

    def get_name(self) -> str:
        orders = "".join(str(n) for n in self.ngram_orders)
        name = f"hashing-{self.dimension}-n{orders}-s{self.seed}"
        if self.alternate_sign:
            name += "-signed"
        if self.ngram_decay != 1.0:
            name += f"-d{self.ngram_decay:g}"
        return name

    def features(self, text: str) -> List[str]:
        return [gram for gram, _ in self.weighted_features(text)]

    def weighted_features(self, text: str) -> List[Tuple[str, float]]:
        tokens = _TOKEN_RE.findall(text.lower())
        weighted = []
        for n in self.ngram_orders:
            weight = self.ngram_decay ** (n - 1)
            weighted.extend((" ".join(tokens[i:i + n]), weight) for i in range(len(tokens) - n + 1))
        return weighted

    def _bucket(self, gram: str) -> Tuple[int, float]:
        h = murmurhash3_32(gram, seed=self.seed)
        return abs(h) % self.dimension, (-1.0 if self.alternate_sign and h < 0 else 1.0)

    def embed(self, text: str) -> np.ndarray:
        grams = self.weighted_features(text)
        vector = np.zeros(self.dimension, dtype=np.float64)
        magnitudes = np.zeros(self.dimension, dtype=np.float64)
        for gram, weight in grams:
            index, sign = self._bucket(gram)
            vector[index] += sign * weight
            magnitudes[index] += weight
        norm = np.linalg.norm(vector)
        if norm < 1e-12 and grams:
            vector, norm = magnitudes, np.linalg.norm(magnitudes)
        if norm > 0:
            vector /= norm
        return vector


class EndpointEmbedder(EmbeddingBackend):
    """Client for an external sentence-encoder service.

    Request: ``POST {"texts": [...]}``; response: ``{"embeddings": [[...], ...]}``.
    """

    def __init__(self, url: str, dimension: int, timeout: Optional[float] = None,
                 max_retries: Optional[int] = None, session: Optional[requests.Session] = None):
        if not url:
            raise BackendUnavailable("no embedding endpoint configured (EMBEDDING_ENDPOINT)")
        self.url = url
        self.dimension = dimension
        self.timeout = config.REQUEST_TIMEOUT if timeout is None else timeout
        self.max_retries = config.MAX_RETRIES if max_retries is None else max_retries
        self.session = session or requests.Session()
        self.request_cache = {}
        logger.info(f"Embedding endpoint backend initialized: {url} (m={dimension})")

    def get_name(self) -> str:
        return f"endpoint:{self.url}"

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        missing = [t for t in dict.fromkeys(texts) if t not in self.request_cache]
        if missing:
            for text, vector in zip(missing, self._request(missing)):
                self.request_cache[text] = vector
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.vstack([self.request_cache[t] for t in texts])

    def _request(self, texts: List[str]) -> List[np.ndarray]:
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries):
            try:
                response = self.session.post(self.url, json={"texts": texts}, timeout=self.timeout)
                response.raise_for_status()
                body = response.json()
                if not isinstance(body, dict):
                    raise ValueError(f"expected a JSON object, got {type(body).__name__}")
                rows = np.asarray(body["embeddings"], dtype=np.float64)
                if rows.shape != (len(texts), self.dimension):
                    raise BackendUnavailable(
                        f"embedding service returned shape {rows.shape}, expected {(len(texts), self.dimension)}")
                return list(rows)
            except (requests.exceptions.RequestException, ValueError, KeyError) as e:
                last_error = e
                logger.warning(f"Embedding request failed (attempt {attempt + 1}/{self.max_retries}): {str(e)}")
                if attempt + 1 < self.max_retries:
                    time.sleep(config.RETRY_BACKOFF * (2 ** attempt))
        raise BackendUnavailable(f"embedding endpoint {self.url} unavailable: {last_error}")


class BackendFactory:
    """Factory for creating embedding backends."""

    @staticmethod
    def create(name: str, dimension: int = 512, seed: int = 0, endpoint: str = "",
               alternate_sign: bool = True, ngram_decay: float = 0.35) -> EmbeddingBackend:
        if name == "hashing":
            return HashingEmbedder(dimension=dimension, seed=seed, alternate_sign=alternate_sign,
                                   ngram_decay=ngram_decay)
        if name == "endpoint":
            return EndpointEmbedder(endpoint or config.EMBEDDING_ENDPOINT, dimension)
        raise ValueError(f"Unknown embedding backend: {name}")


def embed(backend: EmbeddingBackend, text: str) -> np.ndarray:
    """Embed one text with ``backend``.

    Raises:
        BackendUnavailable: the external encoder failed.
    """
    return backend.embed(text)
