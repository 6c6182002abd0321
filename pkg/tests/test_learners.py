"""Tests for the gradient-descent learners and their persistence format."""

import json

import numpy as np
import pytest

from evifuse.exceptions import ClassMismatchError, NonFiniteLossError, ParseError
from evifuse.learners import (
    LEARNER_KINDS,
    LearnerConfig,
    MlpClassifier,
    SoftmaxClassifier,
    _mlp_loss_grad,
    _softmax_loss_grad,
    load_model,
    predict_scores,
    save_model,
    softmax,
    train,
)

from _oracles import central_diff_grad


def blobs(n=60, d=4, classes=3, seed=0, spread=0.4):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=2.0, size=(classes, d))
    y = np.arange(n) % classes
    X = centers[y] + spread * rng.standard_normal((n, d))
    return X, y


def relative_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / scale


class TestLearnerConfig:
    def test_defaults(self):
        config = LearnerConfig()
        assert config.learner_kind == "softmax_linear"
        assert "mlp_1hidden" in LEARNER_KINDS

    def test_validation(self):
        with pytest.raises(ValueError):
            LearnerConfig(learner_kind="cnn")
        with pytest.raises(ValueError):
            LearnerConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            LearnerConfig(epochs=-1)
        with pytest.raises(ValueError):
            LearnerConfig(batch_size=0)
        with pytest.raises(ValueError):
            LearnerConfig(hidden_units=0)
        with pytest.raises(ValueError):
            LearnerConfig(l2_penalty=-0.1)


class TestSoftmax:
    def test_known_value(self):
        probs = softmax(np.array([[2.0, 0.0, 0.0]]))
        assert probs[0, 0] == pytest.approx(0.7869860421615985)
        assert probs[0, 1] == pytest.approx(0.10650697891920075)

    def test_rows_sum_to_one(self):
        probs = softmax(np.random.default_rng(0).normal(size=(5, 4)))
        assert np.allclose(probs.sum(axis=1), 1.0)

    def test_large_logits_stay_finite(self):
        probs = softmax(np.array([[1000.0, 0.0], [-1000.0, 0.0]]))
        assert np.all(np.isfinite(probs))
        assert probs[0, 0] == pytest.approx(1.0)


class TestGradients:
    def test_softmax_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((7, 5))
        onehot = np.eye(3)[rng.integers(0, 3, 7)]
        w = rng.standard_normal((5, 3)) * 0.5
        b = rng.standard_normal(3) * 0.5
        _, d_w, d_b = _softmax_loss_grad(w, b, X, onehot, l2=0.01)

        def loss_at(vec):
            wv = vec[:15].reshape(5, 3)
            bv = vec[15:]
            return _softmax_loss_grad(wv, bv, X, onehot, l2=0.01)[0]

        numeric = central_diff_grad(loss_at, np.concatenate([w.ravel(), b]))
        analytic = np.concatenate([d_w.ravel(), d_b])
        assert relative_error(analytic, numeric) < 1e-7

    def test_mlp_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((6, 4))
        onehot = np.eye(2)[rng.integers(0, 2, 6)]
        shapes = [(4, 3), (3,), (3, 2), (2,)]
        sizes = [int(np.prod(s)) for s in shapes]
        flat = rng.standard_normal(sum(sizes)) * 0.5

        def unpack(vec):
            params, at = [], 0
            for shape, size in zip(shapes, sizes):
                params.append(vec[at : at + size].reshape(shape))
                at += size
            return params

        _, grads = _mlp_loss_grad(unpack(flat), X, onehot, l2=0.01)
        numeric = central_diff_grad(
            lambda v: _mlp_loss_grad(unpack(v), X, onehot, l2=0.01)[0], flat
        )
        analytic = np.concatenate([g.ravel() for g in grads])
        assert relative_error(analytic, numeric) < 1e-7


class TestTraining:
    def test_zero_epochs_predict_uniformly(self):
        X, y = blobs()
        for kind in LEARNER_KINDS:
            model = train(X, y, LearnerConfig(learner_kind=kind, epochs=0))
            probs = model.predict_proba(X)
            assert np.allclose(probs, 1.0 / 3.0)

    def test_learns_separable_blobs(self):
        X, y = blobs(seed=3)
        for kind in LEARNER_KINDS:
            config = LearnerConfig(
                learner_kind=kind, epochs=300, learning_rate=0.1, batch_size=16
            )
            model = train(X, y, config)
            assert (model.predict(X) == y).mean() >= 0.95
            log = model.training_log_
            assert log[-1] < log[0]

    def test_same_seed_reproduces_the_model(self):
        X, y = blobs()
        config = LearnerConfig(learner_kind="mlp_1hidden", epochs=20, seed=9)
        a = train(X, y, config)
        b = train(X, y, config)
        for wa, wb in zip(a.weights_, b.weights_):
            assert np.array_equal(wa, wb)
        c = train(X, y, LearnerConfig(learner_kind="mlp_1hidden", epochs=20, seed=10))
        assert any(not np.array_equal(wa, wc) for wa, wc in zip(a.weights_, c.weights_))

    def test_label_outside_frame_rejected(self):
        X, y = blobs()
        model = SoftmaxClassifier(n_classes=2)
        with pytest.raises(ClassMismatchError):
            model.fit(X, y)

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_diverging_loss_raises(self):
        X = np.array([[1e4, -1e4], [-1e4, 1e4]] * 4)
        y = np.array([0, 1] * 4)
        with pytest.raises(NonFiniteLossError) as err:
            train(X, y, LearnerConfig(learning_rate=1e8, epochs=80, seed=0))
        assert err.value.epoch == 37

    def test_predict_scores_wraps_probabilities(self):
        X, y = blobs()
        model = train(X, y, LearnerConfig(epochs=10))
        sm = predict_scores(model, X, classifier_id="toy")
        assert sm.classifier_id == "toy"
        assert sm.n_samples == X.shape[0]
        assert np.allclose(sm.scores.sum(axis=1), 1.0)
        default_id = predict_scores(model, X)
        assert default_id.classifier_id == "softmax_linear"


class TestPersistence:
    def test_round_trip_preserves_predictions(self, tmp_path):
        X, y = blobs()
        for kind in LEARNER_KINDS:
            model = train(X, y, LearnerConfig(learner_kind=kind, epochs=30))
            path = tmp_path / f"{kind}.json"
            save_model(model, path)
            clone = load_model(path)
            assert np.array_equal(model.predict_proba(X), clone.predict_proba(X))

    def test_payload_schema(self, tmp_path):
        X, y = blobs()
        model = train(X, y, LearnerConfig(epochs=5, seed=4))
        path = tmp_path / "model.json"
        save_model(model, path)
        payload = json.loads(path.read_text())
        assert set(payload) == {
            "learner_kind",
            "input_width",
            "class_count",
            "weights",
            "seed",
        }
        assert payload["learner_kind"] == "softmax_linear"
        assert payload["input_width"] == 4
        assert payload["class_count"] == 3
        assert payload["seed"] == 4

    def test_corrupt_payload_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            json.dumps(
                {
                    "learner_kind": "tree",
                    "input_width": 2,
                    "class_count": 2,
                    "weights": [[[0.0]], [0.0]],
                    "seed": 0,
                }
            )
        )
        with pytest.raises(ParseError):
            load_model(path)

    def test_unfitted_model_cannot_be_saved(self, tmp_path):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            save_model(SoftmaxClassifier(), tmp_path / "x.json")