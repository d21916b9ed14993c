import pytest

from conftest import FORMAL_DRESS_VARIANTS
from src.core.corpus import DescriptionRecord, make_record
from src.core.preprocess import (
    SentenceSample,
    annotate_sentence,
    normalize,
    relabel,
    sentence_samples,
    tokenize_sentences,
)


class TestNormalize:

    @pytest.mark.parametrize("raw, expected", [
        ("Woman's   Dress.\n 65.3.35", "woman's dress."),
        ("65.3.35. Pink silk dress", "pink silk dress"),
        ("Hem measures 2.5 inches.", "hem measures 2.5 inches."),
        ("Red coat , lined .", "red coat, lined."),
        ("", ""),
        ("   ", ""),
    ])
    def test_examples(self, raw, expected):
        assert normalize(raw) == expected

    def test_idempotent(self):
        text = "Gift of 1984.12.3. 65.3.35 Blue  silk   evening gown."
        assert normalize(normalize(text)) == normalize(text)


class TestTokenize:

    def test_three_delimiters(self):
        assert tokenize_sentences("a. b? c!") == ["a", "b", "c"]

    def test_no_trailing_delimiter(self):
        assert tokenize_sentences("red dress. blue trim") == ["red dress", "blue trim"]

    def test_abbreviation_does_not_split(self):
        assert tokenize_sentences("approx. 3 inches long. lined in silk.") == ["approx. 3 inches long", "lined in silk"]

    def test_decimal_does_not_split(self):
        assert tokenize_sentences("hem of 2.5 inches. red.") == ["hem of 2.5 inches", "red"]

    def test_empty(self):
        assert tokenize_sentences("") == []

    def test_formal_dress(self, formal_dress):
        assert tokenize_sentences(normalize(formal_dress.text)) == [
            "white and cream formal dress",
            "fully covered in netting and lace",
            "cream taffeta, white netting with cream flocked and floral design",
        ]


class TestAnnotate:

    def test_formal_dress_sentences(self, formal_dress):
        samples = sentence_samples(formal_dress)
        assert [(s.color_label, s.work_type_label) for s in samples] == [
            ("white", "dress"),
            ("no-color", "no_work_type"),
            ("white", "no_work_type"),
        ]
        assert [s.sentence_index for s in samples] == [0, 1, 2]
        assert all(s.variant_index == 0 for s in samples)

    def test_variants_all_mention_white(self):
        for text in FORMAL_DRESS_VARIANTS:
            assert annotate_sentence(text, "white", "dress") == ("white", "dress")

    def test_group_level_match(self):
        assert annotate_sentence("burgundy velvet trim", "red", "dress") == ("red", "no_work_type")

    def test_non_gold_labels_never_emitted(self):
        # a pink sentence in a white garment's description is not pink
        assert annotate_sentence("pink silk sash", "white", "dress") == ("no-color", "no_work_type")

    def test_sentinel_gold(self):
        assert annotate_sentence("white dress", "no-color", "no_work_type") == ("no-color", "no_work_type")

    def test_relabel(self):
        sample = SentenceSample("d1", 0, 2, "cream coat")
        relabelled = relabel(sample, "white", "coats")
        assert (relabelled.color_label, relabelled.work_type_label) == ("white", "coats")
        assert relabelled.key == ("d1", 0, 2)


class TestSentenceSamples:

    def test_whole_description_mode(self, formal_dress):
        samples = sentence_samples(formal_dress, tokenize=False)
        assert len(samples) == 1
        assert samples[0].color_label == "white"
        assert samples[0].work_type_label == "dress"
        assert samples[0].text.startswith("white and cream formal dress. fully covered")
        assert not samples[0].text.endswith(".")

    @pytest.mark.parametrize("text", ["...", " ?! ", ". . ."])
    def test_punctuation_only_whole_description_has_no_sample(self, text):
        record = DescriptionRecord("p1", text, "no-color", "no-color", "no_work_type")
        assert sentence_samples(record, tokenize=False) == []

    def test_accession_number_removed(self):
        record = make_record("r1", "65.3.35 Red wool coat.", "red", "coats")
        samples = sentence_samples(record)
        assert [s.text for s in samples] == ["red wool coat"]

    def test_sample_dict_round_trip(self):
        sample = SentenceSample("d1", 1, 3, "white netting", "white", "no_work_type")
        assert SentenceSample.from_dict(sample.to_dict()) == sample
