"""Persistent translation cache keyed by (provider, source, target, content hash)."""
import json
import logging
import os
import threading
from typing import Dict, Optional, Tuple

from src.utils.errors import ParseError
from src.utils.io import dumps_record, iter_jsonl, sha256_text

logger = logging.getLogger(__name__)

CacheKey = Tuple[str, str, str, str]


class TranslationCache:
    """Append-only cache of translations, optionally backed by a file.

    Every ``put`` appends one line to the backing file; writes are serialized
    with a lock so concurrent translators can share one cache.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = path or None
        self.entries: Dict[CacheKey, str] = {}
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()
        if self.path and os.path.exists(self.path):
            self._load()

    @staticmethod
    def make_key(provider: str, source: str, target: str, text: str) -> CacheKey:
        return (provider, source, target, sha256_text(text))

    def _load(self) -> None:
        for line_number, line in iter_jsonl(self.path):
            try:
                row = json.loads(line)
                key = (row["provider"], row["source"], row["target"], row["hash"])
                self.entries[key] = row["text"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ParseError("malformed translation cache entry", line_number, self.path) from None
        logger.info(f"Loaded {len(self.entries)} cached translations from {self.path}")

    def get(self, provider: str, source: str, target: str, text: str) -> Optional[str]:
        value = self.entries.get(self.make_key(provider, source, target, text))
        if value is None:
            self.misses += 1
        else:
            self.hits += 1
        return value

    def put(self, provider: str, source: str, target: str, text: str, translated: str) -> None:
        key = self.make_key(provider, source, target, text)
        with self._lock:
            if key in self.entries:
                return
            self.entries[key] = translated
            if self.path:
                os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
                with open(self.path, "a", encoding="utf-8", newline="\n") as f:
                    f.write(dumps_record({
                        "provider": key[0], "source": key[1], "target": key[2],
                        "hash": key[3], "text": translated,
                    }))
                    f.write("\n")

    def __len__(self) -> int:
        return len(self.entries)
