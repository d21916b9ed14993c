# Configuration module

import io
import os
from dataclasses import dataclass, fields, replace
from typing import Dict, Mapping, Optional, Tuple, get_args

from dotenv import dotenv_values, load_dotenv

from src.utils.errors import ConfigError

load_dotenv()


def _env_bool(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


class Config:
    # Logging
    LOG_LEVEL = os.getenv("COSTUME_LOG_LEVEL", "INFO")
    LOG_FILE = os.getenv("COSTUME_LOG_FILE", "logs/costume_core.log")
    SHOW_PROGRESS = _env_bool("COSTUME_SHOW_PROGRESS", True)

    # External services (only used with the endpoint provider/backend)
    TRANSLATION_ENDPOINT = os.getenv("TRANSLATION_ENDPOINT", "")
    EMBEDDING_ENDPOINT = os.getenv("EMBEDDING_ENDPOINT", "")
    REQUEST_TIMEOUT = float(os.getenv("COSTUME_REQUEST_TIMEOUT", "10"))
    MAX_RETRIES = 3
    RETRY_BACKOFF = 0.5  # seconds, doubled per attempt


config = Config()


ENV_PREFIX = "COSTUME_"

# Allowed hyperparameter search space (inclusive)
LEARNING_RATE_RANGE = (1e-05, 1e-02)
BATCH_SIZE_RANGE = (4, 128)


@dataclass(frozen=True)
class PipelineConfig:
    """Every parameter of one reproducible pipeline run.

    The file form is flat ``key=value`` text. Precedence is
    defaults < file < ``COSTUME_<KEY>`` environment variables < CLI flags.
    """

    corpus_path: str = "data/corpus.jsonl"
    attributes: Tuple[str, ...] = ("color", "work_type")
    # Directory with color_groups.tsv, color_spelling_variants.tsv and work_types.tsv;
    # empty uses the built-in tables
    lexicon_dir: str = ""

    # Corpus split
    split_ratio: float = 0.8
    split_seed: int = 42
    stratified_split: bool = False

    # Augmentation
    chains: Tuple[str, ...] = ("fr", "de", "es")
    provider: str = "offline"
    provider_seed: int = 13
    translation_endpoint: str = ""
    cache_path: str = ""

    # Balancing and validation split
    balance_fraction: float = 0.15
    balance_seed: int = 7
    validation_ratio: float = 0.8
    validation_seed: int = 11

    # Hyperparameters
    batch_size: int = 8
    learning_rate: float = 0.001
    beta_1: float = 0.9
    beta_2: float = 0.99
    epsilon: float = 1e-7
    max_epochs: int = 20
    patience: int = 3
    hidden_1: int = 256
    hidden_2: int = 64
    init_seed: int = 0
    shuffle_seed: int = 1

    # Grid search over learning rate and batch size
    tune: bool = False
    tune_learning_rates: Tuple[float, ...] = (1e-05, 1e-04, 1e-03, 1e-02)
    tune_batch_sizes: Tuple[int, ...] = (4, 8, 16, 32, 64, 128)

    # Embedding
    backend: str = "hashing"
    embedding_endpoint: str = ""
    embedding_dim: int = 512
    hash_seed: int = 0
    alternate_sign: bool = True
    ngram_decay: float = 0.35

    tokenize: bool = True
    augment_test: bool = True
    out_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio", f"must be in (0, 1), got {self.split_ratio}")
        if not 0.0 < self.validation_ratio < 1.0:
            raise ConfigError("validation_ratio", f"must be in (0, 1), got {self.validation_ratio}")
        if not 0.0 < self.balance_fraction <= 1.0:
            raise ConfigError("balance_fraction", f"must be in (0, 1], got {self.balance_fraction}")
        for name in ("batch_size", "max_epochs", "hidden_1", "hidden_2", "embedding_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be a positive integer, got {getattr(self, name)}")
        if self.patience < 0:
            raise ConfigError("patience", f"must be >= 0, got {self.patience}")
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ConfigError("learning_rate", "learning_rate and epsilon must be positive")
        self._check_search_space()
        for name in ("beta_1", "beta_2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(name, f"must be in (0, 1), got {getattr(self, name)}")
        unknown = set(self.attributes) - {"color", "work_type"}
        if not self.attributes or unknown:
            raise ConfigError("attributes", f"expected color and/or work_type, got {','.join(self.attributes)}")
        bad_pivots = set(self.chains) - {"fr", "de", "es"}
        if bad_pivots:
            raise ConfigError("chains", f"unsupported pivot languages: {sorted(bad_pivots)}")
        if self.provider not in ("offline", "identity", "endpoint"):
            raise ConfigError("provider", f"expected offline, identity or endpoint, got {self.provider}")
        if self.backend not in ("hashing", "endpoint"):
            raise ConfigError("backend", f"expected hashing or endpoint, got {self.backend}")
        if not 0.0 < self.ngram_decay <= 1.0:
            raise ConfigError("ngram_decay", f"must be in (0, 1], got {self.ngram_decay}")

    def _check_search_space(self) -> None:
        lr_low, lr_high = LEARNING_RATE_RANGE
        bs_low, bs_high = BATCH_SIZE_RANGE
        if not lr_low <= self.learning_rate <= lr_high:
            raise ConfigError("learning_rate", f"{self.learning_rate:g} outside [{lr_low:g}, {lr_high:g}]")
        if not bs_low <= self.batch_size <= bs_high:
            raise ConfigError("batch_size", f"{self.batch_size} outside [{bs_low}, {bs_high}]")
        if not self.tune_learning_rates or any(not lr_low <= v <= lr_high for v in self.tune_learning_rates):
            raise ConfigError("tune_learning_rates", f"expected values in [{lr_low:g}, {lr_high:g}], "
                                                     f"got {self.tune_learning_rates}")
        if not self.tune_batch_sizes or any(not bs_low <= v <= bs_high for v in self.tune_batch_sizes):
            raise ConfigError("tune_batch_sizes", f"expected values in [{bs_low}, {bs_high}], "
                                                  f"got {self.tune_batch_sizes}")

    # -- file form ---------------------------------------------------------

    @classmethod
    def from_mapping(cls, values: Mapping[str, Optional[str]],
                     base: Optional["PipelineConfig"] = None) -> "PipelineConfig":
        """Apply string-valued overrides on top of ``base`` (or the defaults)."""
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        updates = {}
        for key, raw in values.items():
            name = key.strip().lower()
            if name not in known:
                raise ConfigError(name, "unknown configuration key")
            if raw is None:
                raise ConfigError(name, "missing value")
            updates[name] = _coerce(name, known[name].type, raw, getattr(base, name))
        return replace(base, **updates)

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        return cls.from_mapping(dotenv_values(stream=io.StringIO(text)))

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        if not os.path.exists(path):
            raise ConfigError("config", f"file not found: {path}")
        return cls.from_mapping(dotenv_values(path))

    @classmethod
    def load(cls, path: Optional[str] = None, environ: Optional[Mapping[str, str]] = None,
             overrides: Optional[Mapping[str, str]] = None) -> "PipelineConfig":
        """Resolve defaults, file, environment and flag overrides in that order."""
        cfg = cls.from_file(path) if path else cls()
        environ = os.environ if environ is None else environ
        known = {f.name for f in fields(cls)}
        env_values = {
            key[len(ENV_PREFIX):].lower(): value
            for key, value in environ.items()
            if key.startswith(ENV_PREFIX) and key[len(ENV_PREFIX):].lower() in known
        }
        if env_values:
            cfg = cls.from_mapping(env_values, base=cfg)
        if overrides:
            cfg = cls.from_mapping(overrides, base=cfg)
        return cfg

    def to_dict(self) -> Dict[str, object]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name}={value!r}" if isinstance(value, float) else f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    def save(self, path: str) -> None:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_text())


def _coerce(name: str, annotation, raw: str, current):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            lowered = raw.lower()
            if lowered not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return lowered in ("1", "true", "yes", "on")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, tuple):
            element = (get_args(annotation) or (str,))[0]
            return tuple(element(part.strip()) for part in raw.split(",") if part.strip())
        return raw
    except ValueError:
        raise ConfigError(name, f"invalid value {raw!r}") from None
