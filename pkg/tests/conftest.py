"""Shared fixtures: small records, datasets and models."""
import os

import numpy as np
import pytest

# Keep tqdm quiet under pytest; read when config.settings is first imported.
os.environ.setdefault("COSTUME_SHOW_PROGRESS", "false")

from src.core.corpus import make_record  # noqa: E402
from src.core.preprocess import SentenceSample  # noqa: E402
from src.core.vocabulary import AttributeKind, LabelSet, label_set_for  # noqa: E402
from src.data.dataset import SentenceDataset  # noqa: E402
from src.models.classifier import MlpClassifier  # noqa: E402
from src.models.embedding import HashingEmbedder  # noqa: E402

FORMAL_DRESS_TEXT = ("White and cream formal dress. Fully covered in netting and lace. "
                     "Cream taffeta, white netting with cream flocked and floral design.")

# What a translation service returned for the first sentence of FORMAL_DRESS_TEXT
FORMAL_DRESS_VARIANTS = (
    "formal white dress and cream",
    "white and cream formal dress",
    "white dress and cream",
    "white and cream formal dress",
)


class ScriptedProvider:
    """Returns canned back-translations and counts calls."""

    def __init__(self, replies=None, name="scripted"):
        self.replies = dict(replies or {})
        self.name = name
        self.calls = 0

    def get_name(self):
        return self.name

    def translate(self, text, source, target):
        self.calls += 1
        if target == "en":
            return self.replies.get((source, text), text)
        return text


@pytest.fixture
def formal_dress():
    return make_record("65.3.35", FORMAL_DRESS_TEXT, "white", "dress")


@pytest.fixture
def color_labels() -> LabelSet:
    return label_set_for(AttributeKind.COLOR)


@pytest.fixture
def small_label_set() -> LabelSet:
    return LabelSet(AttributeKind.COLOR, ("white", "pink", "red", "no-color"), 3)


@pytest.fixture
def small_model(small_label_set) -> MlpClassifier:
    return MlpClassifier.initialize(8, (6, 5), small_label_set, seed=3)


@pytest.fixture
def backend() -> HashingEmbedder:
    return HashingEmbedder(dimension=64, seed=0)


def make_samples(description_id, labels, variants=1, attribute=AttributeKind.COLOR):
    """One sample per (sentence, variant); ``labels`` holds one label per sentence."""
    samples = []
    for index, label in enumerate(labels):
        for variant in range(variants):
            text = f"{description_id} sentence {index} variant {variant} {label}"
            if attribute is AttributeKind.COLOR:
                samples.append(SentenceSample(description_id, index, variant, text, color_label=label))
            else:
                samples.append(SentenceSample(description_id, index, variant, text, work_type_label=label))
    return samples


def color_dataset(n_descriptions=10, per_description=("white", "no-color", "no-color"), variants=1):
    samples = []
    for d in range(n_descriptions):
        samples.extend(make_samples(f"d{d:03d}", per_description, variants))
    return SentenceDataset.from_samples(samples, AttributeKind.COLOR)


def separable_dataset(n_per_class=12):
    """Colour sentences whose colour word alone decides the label."""
    colours = ("white", "red", "blue", "green")
    samples = []
    rng = np.random.default_rng(0)
    fillers = ("silk dress", "wool coat", "cotton shirt", "velvet cape", "linen suit", "satin blouse")
    for c, colour in enumerate(colours):
        for i in range(n_per_class):
            filler = fillers[int(rng.integers(len(fillers)))]
            samples.append(SentenceSample(f"{colour}-{i}", 0, 0, f"{colour} {filler}", color_label=colour))
    return SentenceDataset.from_samples(samples, AttributeKind.COLOR)
