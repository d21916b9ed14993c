from collections import Counter

import pytest

from conftest import color_dataset, make_samples
from src.augment.back_translation import DEFAULT_CHAINS
from src.augment.providers import IdentityProvider
from src.core.preprocess import SentenceSample
from src.core.vocabulary import AttributeKind
from src.data.dataset import (
    SentenceDataset,
    batches,
    build_sentence_dataset,
    load_samples,
    save_samples,
    sentinel_keep_count,
    split_train_validation,
    undersample_sentinel,
)
from src.utils.errors import InvalidFraction, ParseError, TooFewDescriptions, ValidationError


class TestBuild:

    def test_formal_dress_gives_twelve_samples(self, formal_dress):
        dataset = build_sentence_dataset([formal_dress], AttributeKind.COLOR, DEFAULT_CHAINS, IdentityProvider())
        assert len(dataset) == 12
        assert dataset.labels() == ["white"] * 4 + ["no-color"] * 4 + ["white"] * 4
        assert [s.variant_index for s in dataset.samples[:4]] == [0, 1, 2, 3]

    def test_work_type_labels(self, formal_dress):
        dataset = build_sentence_dataset([formal_dress], "work_type", DEFAULT_CHAINS, IdentityProvider())
        assert dataset.distribution()["dress"] == 4
        assert dataset.distribution()["no_work_type"] == 8

    def test_label_outside_label_set(self):
        with pytest.raises(ValidationError):
            SentenceDataset.from_samples([SentenceSample("d", 0, 0, "x", color_label="magenta")], "color")

    def test_description_ids_first_appearance(self):
        dataset = SentenceDataset.from_samples(make_samples("b", ["white"]) + make_samples("a", ["red"]), "color")
        assert dataset.description_ids() == ["b", "a"]


class TestUndersample:

    @pytest.mark.parametrize("n, fraction, expected", [(20, 0.15, 3), (37, 0.15, 6), (10, 0.25, 3), (0, 0.15, 0)])
    def test_keep_count(self, n, fraction, expected):
        assert sentinel_keep_count(n, fraction) == expected

    def test_sentinel_reduced_others_untouched(self):
        dataset = color_dataset(n_descriptions=37, per_description=("white", "red", "no-color"))
        others = Counter(s.key for s in dataset.samples if s.color_label != "no-color")
        for seed in range(20):
            balanced = undersample_sentinel(dataset, 0.15, seed)
            kept_sentinel = [s for s in balanced.samples if s.color_label == "no-color"]
            assert len(kept_sentinel) == 6
            assert Counter(s.key for s in balanced.samples if s.color_label != "no-color") == others
            assert set(kept_sentinel) <= set(dataset.samples)

    def test_seeded(self):
        dataset = color_dataset(n_descriptions=30)
        assert undersample_sentinel(dataset, 0.15, 4).samples == undersample_sentinel(dataset, 0.15, 4).samples

    def test_fraction_one_keeps_everything(self):
        dataset = color_dataset(n_descriptions=12)
        balanced = undersample_sentinel(dataset, 1.0, 3)
        assert Counter(balanced.samples) == Counter(dataset.samples)

    @pytest.mark.parametrize("fraction", [0.0, -0.1, 1.5])
    def test_invalid_fraction(self, fraction):
        with pytest.raises(InvalidFraction):
            undersample_sentinel(color_dataset(), fraction, 0)

    def test_provenance_recorded(self):
        balanced = undersample_sentinel(color_dataset(), 0.5, 9)
        assert balanced.provenance["balance_seed"] == 9
        assert balanced.provenance["balance_fraction"] == 0.5


class TestValidationSplit:

    def test_eight_two_by_description(self):
        dataset = color_dataset(n_descriptions=10, variants=4)
        train, validation = split_train_validation(dataset, 0.8, seed=11)
        assert (len(train.description_ids()), len(validation.description_ids())) == (8, 2)
        assert not set(train.description_ids()) & set(validation.description_ids())
        assert len(train) + len(validation) == len(dataset)

    def test_variants_stay_together(self):
        dataset = color_dataset(n_descriptions=10, variants=4)
        train, validation = split_train_validation(dataset, 0.8, seed=3)
        for side in (train, validation):
            counts = Counter(s.description_id for s in side.samples)
            assert set(counts.values()) == {12}

    def test_deterministic(self):
        dataset = color_dataset(n_descriptions=10)
        assert split_train_validation(dataset, 0.8, 5) == split_train_validation(dataset, 0.8, 5)

    def test_too_few_descriptions(self):
        with pytest.raises(TooFewDescriptions):
            split_train_validation(color_dataset(n_descriptions=1))


class TestBatches:

    def test_sizes(self):
        dataset = color_dataset(n_descriptions=10, per_description=("white", "no-color"))
        assert [len(b) for b in batches(dataset, 8, epoch_seed=0)] == [8, 8, 4]

    def test_every_sample_exactly_once(self):
        dataset = color_dataset(n_descriptions=10, per_description=("white", "no-color"))
        for seed in range(5):
            seen = [s for batch in batches(dataset, 8, seed) for s in batch]
            assert Counter(seen) == Counter(dataset.samples)

    def test_epoch_seed_controls_order(self):
        dataset = color_dataset(n_descriptions=10, per_description=("white", "no-color"))
        assert list(map(tuple, batches(dataset, 8, 1))) == list(map(tuple, batches(dataset, 8, 1)))
        assert list(map(tuple, batches(dataset, 8, 1))) != list(map(tuple, batches(dataset, 8, 2)))

    def test_invalid_batch_size(self):
        with pytest.raises(ValueError):
            list(batches(color_dataset(), 0))


class TestSerialization:

    def test_round_trip(self, tmp_path):
        dataset = color_dataset(n_descriptions=3, variants=2)
        path = str(tmp_path / "samples.jsonl")
        assert save_samples(dataset.samples, path) == len(dataset)
        assert tuple(load_samples(path)) == dataset.samples

    def test_malformed(self, tmp_path):
        path = tmp_path / "samples.jsonl"
        path.write_text('{"description_id": "d"}\n', encoding="utf-8")
        with pytest.raises(ParseError):
            load_samples(str(path))
