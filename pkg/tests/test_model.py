import json
import math
import struct

import numpy as np
import pytest

from conftest import separable_dataset
from src.core.preprocess import SentenceSample
from src.core.vocabulary import AttributeKind, label_set_for
from src.data.dataset import SentenceDataset
from src.models.classifier import (
    MlpClassifier,
    argmax,
    evaluate_batch,
    forward,
    loss_and_gradients,
    softmax,
)
from src.models.embedding import BackendFactory, EndpointEmbedder, HashingEmbedder
from src.models.optimizer import AdamState, adam_step
from src.models.persistence import MAGIC, decode_model, encode_model, load_model, save_model
from src.models.trainer import (
    Hyperparams,
    TrainReport,
    TuningResult,
    TuningTrial,
    build_model,
    embed_dataset,
    grid_search,
    train,
)
from src.utils.errors import (
    BackendUnavailable,
    CorruptFile,
    DimensionMismatch,
    EmptyDataset,
    FormatVersionMismatch,
    NonFiniteLoss,
    ValidationError,
)


def _perturbed(model, seed=0):
    """Same shapes, random biases so no hidden unit sits on the ReLU kink."""
    rng = np.random.default_rng(seed)
    params = [p + rng.normal(scale=0.1, size=p.shape) for p in model.parameters()]
    model.set_parameters(params)
    return model


def _rotated(dataset):
    """Same sentences, every label moved to the next colour: a validation set training cannot fit."""
    order = ("white", "red", "blue", "green")
    samples = [SentenceSample(s.description_id, 0, 0, s.text, color_label=order[(order.index(s.color_label) + 1) % 4])
               for s in dataset.samples]
    return SentenceDataset.from_samples(samples, AttributeKind.COLOR)


class TestForward:

    def test_softmax_is_a_distribution(self, small_model):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            p = forward(small_model, rng.normal(scale=5.0, size=8))
            assert p.shape == (4,)
            assert np.all(p >= 0) and np.all(p <= 1)
            assert abs(p.sum() - 1.0) < 1e-9

    def test_softmax_stable_for_large_logits(self):
        p = softmax(np.array([1000.0, 0.0, -1000.0]))
        np.testing.assert_allclose(p, [1.0, 0.0, 0.0], atol=1e-12)

    def test_zero_weights_give_uniform_output(self, small_label_set):
        model = MlpClassifier.initialize(8, (6, 5), small_label_set)
        model.set_parameters([np.zeros_like(p) for p in model.parameters()])
        np.testing.assert_allclose(forward(model, np.ones(8)), 0.25)
        loss, _ = loss_and_gradients(model, np.ones((3, 8)), [0, 1, 2])
        assert loss == pytest.approx(math.log(4), abs=1e-9)

    def test_confident_correct_prediction_has_near_zero_loss(self, small_label_set):
        model = MlpClassifier.initialize(8, (6, 5), small_label_set)
        params = [np.zeros_like(p) for p in model.parameters()]
        params[5] = np.array([50.0, 0.0, 0.0, 0.0])
        model.set_parameters(params)
        loss, _ = loss_and_gradients(model, np.ones((2, 8)), [0, 0])
        assert loss < 1e-12

    def test_matches_naive_matmul(self, small_model):
        model = _perturbed(small_model, seed=2)
        x = np.random.default_rng(3).normal(size=8)
        a = list(x)
        for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
            z = [sum(a[i] * w[i][j] for i in range(len(a))) + b[j] for j in range(w.shape[1])]
            a = [max(v, 0.0) for v in z] if layer < 2 else z
        exp = [math.exp(v - max(a)) for v in a]
        expected = [e / sum(exp) for e in exp]
        np.testing.assert_allclose(forward(model, x), expected, rtol=1e-10)

    def test_dimension_mismatch(self, small_model):
        with pytest.raises(DimensionMismatch) as excinfo:
            forward(small_model, np.ones(7))
        assert (excinfo.value.expected, excinfo.value.actual) == (8, 7)

    def test_argmax_tie_goes_to_lower_index(self):
        assert argmax(np.array([0.4, 0.4, 0.2])) == 0

    def test_layer_dims(self, small_model):
        assert small_model.layer_dims == [8, 6, 5, 4]
        assert [p.shape for p in small_model.parameters()] == [(8, 6), (6,), (6, 5), (5,), (5, 4), (4,)]

    def test_seeded_initialization(self, small_label_set):
        a = MlpClassifier.initialize(8, (6, 5), small_label_set, seed=5)
        b = MlpClassifier.initialize(8, (6, 5), small_label_set, seed=5)
        for p, q in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(p, q)
        assert np.all(np.abs(a.weights[0]) <= 1 / math.sqrt(8))


class TestGradients:

    def test_matches_central_differences(self, small_model):
        model = _perturbed(small_model)
        rng = np.random.default_rng(4)
        X = rng.normal(size=(8, 8))
        y = rng.integers(0, 4, size=8)
        _, analytic = loss_and_gradients(model, X, y)

        step = 1e-5
        params = model.parameters()
        numeric = []
        for k, p in enumerate(params):
            g = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                shifted = [q.copy() for q in params]
                shifted[k][idx] += step
                model.set_parameters(shifted)
                plus, _ = loss_and_gradients(model, X, y)
                shifted[k][idx] -= 2 * step
                model.set_parameters(shifted)
                minus, _ = loss_and_gradients(model, X, y)
                g[idx] = (plus - minus) / (2 * step)
            numeric.append(g)
        model.set_parameters(params)

        # elementwise relative error, with an absolute floor for gradients near zero
        for k, (a, n) in enumerate(zip(analytic, numeric)):
            scale = np.maximum(np.abs(a) + np.abs(n), 1e-4)
            worst = np.unravel_index(np.argmax(np.abs(a - n) / scale), a.shape)
            assert np.all(np.abs(a - n) / scale < 1e-4), (k, worst, a[worst], n[worst])

    def test_non_finite_loss(self, small_model):
        params = small_model.parameters()
        params[0] = np.full_like(params[0], np.nan)
        small_model.set_parameters(params)
        with pytest.raises(NonFiniteLoss):
            loss_and_gradients(small_model, np.ones((2, 8)), [0, 1])

    def test_invalid_labels(self, small_model):
        with pytest.raises(ValueError):
            loss_and_gradients(small_model, np.ones((2, 8)), [0, 4])


class TestAdam:

    def test_first_step_is_learning_rate_times_sign(self):
        g = np.array([0.5, -2.0, 3.0])
        p = np.zeros(3)
        state = AdamState.for_parameters([p])
        (updated,) = adam_step(state, [p], [g], learning_rate=0.001)
        np.testing.assert_allclose(updated, -0.001 * np.sign(g), atol=1e-9)
        assert state.step == 1

    def test_zero_gradient_leaves_parameters(self):
        p = np.array([1.0, -1.0])
        state = AdamState.for_parameters([p])
        (updated,) = adam_step(state, [p], [np.zeros(2)])
        np.testing.assert_array_equal(updated, p)

    def test_minimizes_a_quadratic(self):
        w = np.array([3.0])
        state = AdamState.for_parameters([w])
        values = [float(w[0] ** 2)]
        for _ in range(5):
            (w,) = adam_step(state, [w], [2 * w], learning_rate=0.1)
            values.append(float(w[0] ** 2))
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_full_batch_loss_decreases(self, small_model):
        model = _perturbed(small_model, seed=6)
        rng = np.random.default_rng(7)
        X = rng.normal(size=(16, 8))
        y = rng.integers(0, 4, size=16)
        state = AdamState.for_parameters(model.parameters())
        losses = []
        for _ in range(6):
            loss, grads = loss_and_gradients(model, X, y)
            losses.append(loss)
            model.set_parameters(adam_step(state, model.parameters(), grads, learning_rate=0.001))
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_misaligned_inputs(self):
        state = AdamState.for_parameters([np.zeros(2)])
        with pytest.raises(ValueError):
            adam_step(state, [np.zeros(2)], [np.zeros(3)])


class TestTrain:

    @pytest.fixture
    def hashing(self):
        return HashingEmbedder(dimension=256, seed=0)

    def test_separable_set_is_learned(self, hashing):
        dataset = separable_dataset()
        hyper = Hyperparams(learning_rate=0.01, max_epochs=60, patience=60, hidden=(32, 16))
        model, report = train(build_model(dataset, hyper, hashing), dataset, dataset, hyper, hashing)
        _, accuracy = evaluate_batch(model, embed_dataset(dataset, hashing), dataset.label_indices())
        assert accuracy == 1.0
        assert report.stopped_epoch <= 60

    @pytest.mark.parametrize("patience", [0, 1, 2])
    def test_early_stopping(self, hashing, patience):
        dataset = separable_dataset()
        hyper = Hyperparams(learning_rate=0.01, max_epochs=40, patience=patience, hidden=(32, 16))
        _, report = train(build_model(dataset, hyper, hashing), dataset, _rotated(dataset), hyper, hashing)
        assert report.stopped_epoch < 40
        assert report.stopped_epoch - report.best_epoch == max(patience, 1)
        best = report.val_loss[report.best_epoch - 1]
        assert all(v >= best for v in report.val_loss[report.best_epoch:])

    def test_best_weights_restored(self, hashing):
        dataset = separable_dataset()
        validation = _rotated(dataset)
        hyper = Hyperparams(learning_rate=0.01, max_epochs=40, patience=2, hidden=(32, 16))
        model, report = train(build_model(dataset, hyper, hashing), dataset, validation, hyper, hashing)
        val_loss, _ = evaluate_batch(model, embed_dataset(validation, hashing), validation.label_indices())
        assert val_loss == pytest.approx(report.best_val_loss, rel=1e-12)

    def test_deterministic_and_input_untouched(self, hashing):
        dataset = separable_dataset(n_per_class=4)
        hyper = Hyperparams(max_epochs=5, hidden=(8, 8))
        initial = build_model(dataset, hyper, hashing)
        before = [p.copy() for p in initial.parameters()]
        a, report_a = train(initial, dataset, dataset, hyper, hashing)
        b, report_b = train(initial, dataset, dataset, hyper, hashing)
        for p, q in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(p, q)
        for p, r in zip(initial.parameters(), before):
            np.testing.assert_array_equal(p, r)
        assert report_a == report_b

    def test_empty_validation(self, hashing):
        dataset = separable_dataset(n_per_class=2)
        empty = dataset.with_samples([])
        hyper = Hyperparams(hidden=(4, 4))
        with pytest.raises(EmptyDataset):
            train(build_model(dataset, hyper, hashing), dataset, empty, hyper, hashing)

    def test_label_set_mismatch(self, hashing):
        dataset = separable_dataset(n_per_class=2)
        hyper = Hyperparams(hidden=(4, 4))
        model = MlpClassifier.initialize(256, (4, 4), label_set_for("work_type"))
        with pytest.raises(ValidationError):
            train(model, dataset, dataset, hyper, hashing)

    def test_report_round_trip(self):
        report = TrainReport()
        report.record(1.0, 0.5, 1.1, 0.4)
        report.record(0.8, 0.6, 1.0, 0.5)
        report.best_epoch = 2
        assert TrainReport.from_dict(report.to_dict()) == report
        assert list(report.to_frame()["epoch"]) == [1, 2]
        assert report.best_val_loss == 1.0

    def test_invalid_hyperparams(self):
        with pytest.raises(ValueError):
            Hyperparams(batch_size=0)
        with pytest.raises(ValueError):
            Hyperparams(patience=-1)


class TestGridSearch:

    @pytest.fixture
    def hashing(self):
        return HashingEmbedder(dimension=64, seed=0)

    def test_visits_every_point_and_picks_lowest_loss(self, hashing):
        dataset = separable_dataset(n_per_class=4)
        hyper = Hyperparams(max_epochs=3, patience=3, hidden=(8, 4))
        result = grid_search(dataset, dataset, hyper, hashing, learning_rates=(0.01, 0.001), batch_sizes=(8, 4))
        assert [(t.batch_size, t.learning_rate) for t in result.trials] == [
            (4, 0.001), (4, 0.01), (8, 0.001), (8, 0.01)]
        assert result.best.best_val_loss == min(t.best_val_loss for t in result.trials)
        tuned = result.apply(hyper)
        assert (tuned.learning_rate, tuned.batch_size) == (result.best.learning_rate, result.best.batch_size)
        assert tuned.hidden == hyper.hidden

    def test_each_trial_matches_a_plain_training_run(self, hashing):
        dataset = separable_dataset(n_per_class=4)
        hyper = Hyperparams(max_epochs=2, hidden=(8, 4))
        result = grid_search(dataset, dataset, hyper, hashing, learning_rates=(0.005,), batch_sizes=(16,))
        single = Hyperparams(batch_size=16, learning_rate=0.005, max_epochs=2, hidden=(8, 4))
        _, report = train(build_model(dataset, single, hashing), dataset, dataset, single, hashing)
        assert result.trials[0].best_val_loss == report.best_val_loss

    def test_ties_go_to_the_earliest_point(self):
        result = TuningResult([TuningTrial(0.001, 4, 0.5, 2, 5), TuningTrial(0.01, 4, 0.5, 1, 4),
                               TuningTrial(0.001, 8, 0.7, 3, 6)])
        assert (result.best.learning_rate, result.best.batch_size) == (0.001, 4)

    def test_diverged_trial_is_never_selected(self, hashing, monkeypatch):
        import src.models.trainer as trainer_module

        real_train = trainer_module.train

        def diverging(model, train_ds, val_ds, hyperparams, backend):
            if hyperparams.learning_rate == 0.01:
                raise NonFiniteLoss("cross-entropy loss is nan")
            return real_train(model, train_ds, val_ds, hyperparams, backend)

        monkeypatch.setattr(trainer_module, "train", diverging)
        dataset = separable_dataset(n_per_class=2)
        result = grid_search(dataset, dataset, Hyperparams(max_epochs=1, hidden=(4, 4)), hashing,
                             learning_rates=(0.001, 0.01), batch_sizes=(4,))
        assert math.isinf(result.trials[1].best_val_loss)
        assert result.best.learning_rate == 0.001

    def test_round_trip(self):
        result = TuningResult([TuningTrial(0.0001, 32, 0.25, 7, 10), TuningTrial(0.001, 32, 0.125, 4, 7)])
        payload = json.loads(json.dumps(result.to_dict()))
        assert payload["selected"] == {"learning_rate": 0.001, "batch_size": 32, "best_val_loss": 0.125}
        assert TuningResult.from_dict(payload) == result
        assert list(result.to_frame()["batch_size"]) == [32, 32]

    def test_empty_grid(self, hashing):
        dataset = separable_dataset(n_per_class=2)
        with pytest.raises(ValueError):
            grid_search(dataset, dataset, Hyperparams(), hashing, learning_rates=(), batch_sizes=(4,))
        with pytest.raises(EmptyDataset):
            TuningResult().best


class TestPersistence:

    def test_round_trip(self, tmp_path, small_model):
        model = _perturbed(small_model)
        path = str(tmp_path / "color.ccm")
        save_model(model, path)
        loaded = load_model(path)
        for p, q in zip(model.parameters(), loaded.parameters()):
            np.testing.assert_array_equal(p, q)
        assert loaded.label_set == model.label_set
        assert loaded.backend_name == model.backend_name
        x = np.random.default_rng(0).normal(size=8)
        np.testing.assert_array_equal(forward(loaded, x), forward(model, x))

    def test_saving_twice_gives_identical_bytes(self, tmp_path, small_model):
        a = save_model(small_model, str(tmp_path / "a.ccm"))
        b = save_model(small_model, str(tmp_path / "b.ccm"))
        assert a == b
        assert (tmp_path / "a.ccm").read_bytes() == (tmp_path / "b.ccm").read_bytes()

    def test_truncated_file(self, small_model):
        blob = encode_model(small_model)
        for cut in (3, len(MAGIC) + 2, len(blob) // 2, len(blob) - 1):
            with pytest.raises(CorruptFile):
                decode_model(blob[:cut])

    def test_bad_magic(self, small_model):
        with pytest.raises(CorruptFile):
            decode_model(b"XXXXXX" + encode_model(small_model)[6:])

    def test_checksum_mismatch(self, small_model):
        blob = bytearray(encode_model(small_model))
        blob[-1] ^= 0xFF
        with pytest.raises(CorruptFile):
            decode_model(bytes(blob))

    def test_future_format_version(self, small_model):
        blob = encode_model(small_model)
        offset = len(MAGIC)
        (length,) = struct.unpack_from("<I", blob, offset)
        header = json.loads(blob[offset + 4:offset + 4 + length])
        header["format_version"] = 2
        new_header = json.dumps(header, sort_keys=True).encode("utf-8")
        rewritten = MAGIC + struct.pack("<I", len(new_header)) + new_header + blob[offset + 4 + length:]
        with pytest.raises(FormatVersionMismatch) as excinfo:
            decode_model(rewritten)
        assert (excinfo.value.found, excinfo.value.supported) == (2, 1)


class FakeResponse:
    def __init__(self, payload):
        self.payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self.payload


class FakeSession:
    def __init__(self, dimension):
        self.dimension = dimension
        self.calls = 0

    def post(self, url, json=None, timeout=None):
        self.calls += 1
        return FakeResponse({"embeddings": [[float(len(t))] * self.dimension for t in json["texts"]]})


class TestEmbedding:

    def test_hashing_vectors_are_unit_length(self):
        backend = HashingEmbedder(dimension=64)
        for text in ("white dress", ".", "navy blue silk evening gown with cream lace"):
            assert np.linalg.norm(backend.embed(text)) == pytest.approx(1.0)

    def test_empty_text_is_zero(self):
        backend = HashingEmbedder(dimension=64)
        np.testing.assert_array_equal(backend.embed(""), np.zeros(64))
        np.testing.assert_array_equal(backend.embed("   "), np.zeros(64))

    def test_deterministic_and_batched(self):
        backend = HashingEmbedder(dimension=32, seed=3)
        texts = ["red coat", "blue cape", "red coat"]
        batch = backend.embed_batch(texts)
        assert batch.shape == (3, 32)
        np.testing.assert_array_equal(batch[0], HashingEmbedder(dimension=32, seed=3).embed("red coat"))
        np.testing.assert_array_equal(batch[0], batch[2])
        assert backend.embed_batch([]).shape == (0, 32)

    def test_features_include_bigrams(self):
        assert HashingEmbedder().features("white silk dress") == [
            "white", "silk", "dress", "white silk", "silk dress"]

    def test_name_encodes_settings(self):
        assert HashingEmbedder(dimension=512, seed=0).get_name() == "hashing-512-n12-s0-signed-d0.35"
        assert BackendFactory.create("hashing", 128, 4).get_name() == "hashing-128-n12-s4-signed-d0.35"
        unsigned = HashingEmbedder(dimension=64, alternate_sign=False, ngram_decay=1.0)
        assert unsigned.get_name() == "hashing-64-n12-s0"

    @pytest.mark.parametrize("text", [
        "woman's pleated purple organza shirt",
        "navy blue silk evening gown with cream lace",
        "pockets set into the side seams",
    ])
    def test_matches_sklearn_hashing_vectorizer(self, text):
        from sklearn.feature_extraction.text import HashingVectorizer

        vectorizer = HashingVectorizer(n_features=512, ngram_range=(1, 2), alternate_sign=True, norm="l2",
                                       token_pattern=r"[a-z0-9]+(?:'[a-z]+)?|[^\sa-z0-9]")
        expected = vectorizer.transform([text]).toarray()[0]
        backend = HashingEmbedder(dimension=512, seed=0, ngram_decay=1.0)
        np.testing.assert_allclose(backend.embed(text), expected, atol=1e-12)

    def test_bigrams_are_down_weighted(self):
        backend = HashingEmbedder(dimension=512, ngram_decay=0.35)
        weights = dict(backend.weighted_features("purple organza shirt"))
        assert weights["purple"] == 1.0
        assert weights["purple organza"] == pytest.approx(0.35)

    def test_term_unigram_outweighs_bigrams(self):
        # 5 unigrams and 4 bigrams, no collisions at m=512
        backend = HashingEmbedder(dimension=512, seed=0)
        vector = backend.embed("woman's pleated purple organza shirt")
        assert np.count_nonzero(vector) == 9
        norm = math.sqrt(5 + 4 * 0.35 ** 2)
        assert vector[220] == pytest.approx(1 / norm)
        assert vector[319] == pytest.approx(0.35 / norm)
        assert vector[272] == pytest.approx(-1 / norm)

    def test_cancelled_collisions_fall_back_to_counts(self, monkeypatch):
        backend = HashingEmbedder(dimension=8, ngram_orders=(1,))
        buckets = {"red": (3, 1.0), "coat": (3, -1.0)}
        monkeypatch.setattr(backend, "_bucket", lambda gram: buckets[gram])
        vector = backend.embed("red coat")
        assert np.linalg.norm(vector) == pytest.approx(1.0)
        assert vector[3] == pytest.approx(1.0)

    def test_rejects_bad_decay(self):
        with pytest.raises(ValueError):
            HashingEmbedder(ngram_decay=0.0)
        with pytest.raises(ValueError):
            HashingEmbedder(ngram_decay=1.5)

    def test_endpoint_backend_caches_requests(self):
        session = FakeSession(4)
        backend = EndpointEmbedder("http://encoder.local", 4, session=session)
        first = backend.embed_batch(["a", "bb", "a"])
        assert first.shape == (3, 4)
        np.testing.assert_array_equal(first[1], [2.0] * 4)
        backend.embed("bb")
        assert session.calls == 1

    def test_endpoint_backend_rejects_non_object_response(self):
        class ListSession:
            def post(self, url, json=None, timeout=None):
                return FakeResponse([[0.0] * 4])

        backend = EndpointEmbedder("http://encoder.local", 4, max_retries=1, session=ListSession())
        with pytest.raises(BackendUnavailable):
            backend.embed("red coat")

    def test_endpoint_backend_requires_url(self):
        with pytest.raises(BackendUnavailable):
            EndpointEmbedder("", 4)
