import pytest
import requests

from conftest import FORMAL_DRESS_VARIANTS, ScriptedProvider
from evaluation.benchmark_datasets import SyntheticCorpusGenerator
from src.augment.back_translation import (
    DEFAULT_CHAINS,
    AugmentationChain,
    augment_sentence,
    back_translate,
    make_chains,
)
from src.augment.cache import TranslationCache
from src.augment.providers import EndpointProvider, IdentityProvider, OfflineProvider, ProviderFactory
from src.core.preprocess import SentenceSample, sentence_samples
from src.data.dataset import build_samples
from src.utils.errors import EmptyTranslation, ParseError, ProviderUnavailable


class FailingProvider(ScriptedProvider):
    """Fails every request through one pivot language."""

    def __init__(self, pivot, error=ProviderUnavailable("service down")):
        super().__init__(name="failing")
        self.pivot = pivot
        self.error = error

    def translate(self, text, source, target):
        if self.pivot in (source, target):
            raise self.error
        return super().translate(text, source, target)


class FakeResponse:
    def __init__(self, payload, status=200):
        self.payload = payload
        self.status = status

    def raise_for_status(self):
        if self.status >= 400:
            raise requests.exceptions.HTTPError(f"{self.status}")

    def json(self):
        return self.payload


class FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def post(self, url, json=None, timeout=None):
        self.requests.append(json)
        response = self.responses.pop(0)
        if isinstance(response, Exception):
            raise response
        return response


@pytest.fixture(scope="module")
def records():
    return SyntheticCorpusGenerator(seed=5).generate(40)


class TestChains:

    def test_default_chains(self):
        assert [(c.chain_id, c.pivot) for c in DEFAULT_CHAINS] == [(1, "fr"), (2, "de"), (3, "es")]

    def test_invalid_chain(self):
        with pytest.raises(ValueError):
            AugmentationChain(0, "fr")
        with pytest.raises(ValueError):
            AugmentationChain(1, "it")

    def test_duplicate_pivots(self):
        with pytest.raises(ValueError):
            make_chains(["fr", "fr"])


class TestAugmentSentence:

    def test_identity_provider(self):
        sample = SentenceSample("d1", 0, 0, "red wool coat", "red", "coats")
        variants = augment_sentence(sample, DEFAULT_CHAINS, IdentityProvider(), None, "red", "coats")
        assert [v.variant_index for v in variants] == [0, 1, 2, 3]
        assert all(v.text == "red wool coat" for v in variants)
        assert all((v.color_label, v.work_type_label) == ("red", "coats") for v in variants)

    def test_formal_dress_variants_reannotated(self, formal_dress):
        first = sentence_samples(formal_dress)[0]
        provider = ScriptedProvider({
            ("fr", first.text): "Formal white dress and cream.",
            ("de", first.text): "White and cream formal dress.",
            ("es", first.text): "White dress and cream.",
        })
        variants = augment_sentence(first, DEFAULT_CHAINS, provider, None,
                                    formal_dress.gold_color_group, formal_dress.gold_work_type)
        assert sorted(v.text for v in variants) == sorted(FORMAL_DRESS_VARIANTS)
        assert [v.color_label for v in variants] == ["white"] * 4
        assert [v.work_type_label for v in variants] == ["dress"] * 4

    def test_variant_losing_term_falls_back_to_sentinel(self):
        sample = SentenceSample("d1", 0, 0, "red wool coat", "red", "coats")
        provider = ScriptedProvider({("de", "red wool coat"): "a woollen garment"})
        variants = augment_sentence(sample, DEFAULT_CHAINS, provider, None, "red", "coats")
        assert (variants[2].color_label, variants[2].work_type_label) == ("no-color", "no_work_type")
        assert variants[1].color_label == "red"

    def test_without_gold_labels_variants_are_sentinel(self):
        sample = SentenceSample("d1", 0, 0, "red wool coat")
        variants = augment_sentence(sample, DEFAULT_CHAINS, IdentityProvider())
        assert {v.color_label for v in variants} == {"no-color"}

    def test_only_originals_are_augmented(self):
        with pytest.raises(ValueError):
            augment_sentence(SentenceSample("d1", 0, 1, "red coat"), DEFAULT_CHAINS, IdentityProvider())

    def test_failure_names_the_chain(self):
        sample = SentenceSample("d1", 0, 0, "red wool coat")
        with pytest.raises(ProviderUnavailable) as excinfo:
            augment_sentence(sample, DEFAULT_CHAINS, FailingProvider("de"))
        assert excinfo.value.chain_id == 2

    def test_empty_translation(self):
        sample = SentenceSample("d1", 0, 0, "red wool coat")
        provider = ScriptedProvider({("es", "red wool coat"): "   "})
        with pytest.raises(EmptyTranslation) as excinfo:
            augment_sentence(sample, DEFAULT_CHAINS, provider)
        assert excinfo.value.chain_id == 3


class TestOfflineProvider:

    def test_deterministic(self, records):
        a, b = OfflineProvider(seed=13), OfflineProvider(seed=13)
        for record in records[:10]:
            for sample in sentence_samples(record):
                for chain in DEFAULT_CHAINS:
                    assert back_translate(sample.text, chain, a) == back_translate(sample.text, chain, b)

    def test_seed_changes_output(self, records):
        texts = [s.text for r in records for s in sentence_samples(r)]
        first = [back_translate(t, DEFAULT_CHAINS[0], OfflineProvider(seed=1)) for t in texts]
        second = [back_translate(t, DEFAULT_CHAINS[0], OfflineProvider(seed=2)) for t in texts]
        assert first != second

    def test_colour_and_work_type_labels_survive(self, records):
        provider = OfflineProvider(seed=13)
        for record in records:
            for original in sentence_samples(record):
                variants = augment_sentence(original, DEFAULT_CHAINS, provider, None,
                                            record.gold_color_group, record.gold_work_type)
                assert {v.color_label for v in variants} == {original.color_label}
                assert {v.work_type_label for v in variants} == {original.work_type_label}

    def test_empty_text(self):
        with pytest.raises(EmptyTranslation):
            OfflineProvider().translate("  ", "en", "fr")


class TestCache:

    def test_second_pass_makes_no_provider_calls(self, records):
        cache = TranslationCache()
        first = ScriptedProvider(name="scripted")
        build_samples(records[:10], DEFAULT_CHAINS, first, cache)
        assert first.calls > 0

        second = ScriptedProvider(name="scripted")
        build_samples(records[:10], DEFAULT_CHAINS, second, cache)
        assert second.calls == 0

    def test_file_backed_cache_reloads(self, tmp_path, records):
        path = str(tmp_path / "cache.jsonl")
        provider = OfflineProvider(seed=13)
        before = build_samples(records[:5], DEFAULT_CHAINS, provider, TranslationCache(path))

        counting = ScriptedProvider(name=provider.get_name())
        after = build_samples(records[:5], DEFAULT_CHAINS, counting, TranslationCache(path))
        assert counting.calls == 0
        assert after == before

    def test_key_includes_provider(self):
        cache = TranslationCache()
        cache.put("a", "en", "fr", "red coat", "manteau rouge")
        assert cache.get("b", "en", "fr", "red coat") is None
        assert cache.get("a", "en", "fr", "red coat") == "manteau rouge"
        assert (cache.hits, cache.misses) == (1, 1)

    def test_malformed_cache_file(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text('{"provider": "a"}\n', encoding="utf-8")
        with pytest.raises(ParseError):
            TranslationCache(str(path))


class TestSampleCounts:

    def test_three_chains_quadruple_the_samples(self, records):
        originals = sum(len(sentence_samples(r)) for r in records)
        assert len(build_samples(records, DEFAULT_CHAINS, IdentityProvider())) == 4 * originals

    def test_no_chains(self, records):
        originals = sum(len(sentence_samples(r)) for r in records)
        assert len(build_samples(records, (), IdentityProvider())) == originals


class TestEndpointProvider:

    def test_success(self):
        session = FakeSession([FakeResponse({"text": "manteau rouge"})])
        provider = EndpointProvider("http://translate.local", session=session, backoff=0)
        assert provider.translate("red coat", "en", "fr") == "manteau rouge"
        assert session.requests == [{"text": "red coat", "source": "en", "target": "fr"}]

    def test_retries_then_raises(self):
        session = FakeSession([requests.exceptions.ConnectionError("refused")] * 3)
        provider = EndpointProvider("http://translate.local", max_retries=3, backoff=0, session=session)
        with pytest.raises(ProviderUnavailable):
            provider.translate("red coat", "en", "fr")
        assert len(session.requests) == 3

    def test_recovers_after_transient_error(self):
        session = FakeSession([FakeResponse({}, status=503), FakeResponse({"text": "roter Mantel"})])
        provider = EndpointProvider("http://translate.local", max_retries=2, backoff=0, session=session)
        assert provider.translate("red coat", "en", "de") == "roter Mantel"

    @pytest.mark.parametrize("payload", [["manteau rouge"], "manteau rouge", None])
    def test_non_object_response_is_unavailable(self, payload):
        session = FakeSession([FakeResponse(payload)] * 2)
        provider = EndpointProvider("http://translate.local", max_retries=2, backoff=0, session=session)
        with pytest.raises(ProviderUnavailable):
            provider.translate("red coat", "en", "fr")
        assert len(session.requests) == 2

    def test_requires_url(self):
        with pytest.raises(ProviderUnavailable):
            EndpointProvider("")

    def test_factory(self):
        assert ProviderFactory.create("identity").get_name() == "identity"
        assert ProviderFactory.create("offline", seed=4).get_name() == "offline-4"
        with pytest.raises(ValueError):
            ProviderFactory.create("babel")
