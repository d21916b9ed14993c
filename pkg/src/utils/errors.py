"""Exception hierarchy shared by every stage of the pipeline.

Each error also derives from the built-in it refines, so ``except ValueError``
and ``except RuntimeError`` keep catching them.
"""
from typing import Optional


class CostumeCoreError(Exception):
    """Root of all pipeline errors."""


# Vocabulary / corpus

class UnknownTerm(CostumeCoreError, KeyError):
    def __init__(self, term: str, vocabulary: str = "color"):
        self.term = term
        self.vocabulary = vocabulary
        super().__init__(f"unknown {vocabulary} term: {term!r}")

    def __str__(self) -> str:
        return self.args[0]


class ParseError(CostumeCoreError, ValueError):
    def __init__(self, message: str, line_number: Optional[int] = None, source: str = ""):
        self.line_number = line_number
        self.source = source
        where = f"{source}:{line_number}: " if line_number is not None else ""
        super().__init__(f"{where}{message}")


class ValidationError(CostumeCoreError, ValueError):
    pass


class TooFewRecords(CostumeCoreError, ValueError):
    pass


class TooFewDescriptions(CostumeCoreError, ValueError):
    pass


class InvalidFraction(CostumeCoreError, ValueError):
    pass


class InvalidK(CostumeCoreError, ValueError):
    pass


# Augmentation

class AugmentationError(CostumeCoreError, RuntimeError):
    def __init__(self, message: str, chain_id: Optional[int] = None):
        self.chain_id = chain_id
        self.message = message
        prefix = f"chain {chain_id}: " if chain_id is not None else ""
        super().__init__(f"{prefix}{message}")

    def with_chain(self, chain_id: int) -> "AugmentationError":
        return type(self)(self.message, chain_id=chain_id)


class ProviderUnavailable(AugmentationError):
    pass


class EmptyTranslation(AugmentationError):
    pass


# Model

class BackendUnavailable(CostumeCoreError, RuntimeError):
    pass


class DimensionMismatch(CostumeCoreError, ValueError):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected vector of dimension {expected}, got {actual}")


class NonFiniteLoss(CostumeCoreError, RuntimeError):
    pass


class EmptyDataset(CostumeCoreError, ValueError):
    pass


class FormatVersionMismatch(CostumeCoreError, ValueError):
    def __init__(self, found: int, supported: int):
        self.found = found
        self.supported = supported
        super().__init__(f"model file format version {found} is not supported (this build reads version {supported})")


class CorruptFile(CostumeCoreError, ValueError):
    pass


# Inference / evaluation

class MixedProvenance(CostumeCoreError, ValueError):
    pass


class LengthMismatch(CostumeCoreError, ValueError):
    pass


class UnknownLabel(CostumeCoreError, ValueError):
    pass


# CLI

class ConfigError(CostumeCoreError, ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")
