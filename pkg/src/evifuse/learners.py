"""Compact per-channel classifiers trained with mini-batch gradient descent."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ClassMismatchError, NonFiniteLossError, ParseError
from .fusion import ScoreMatrix

LEARNER_KINDS = ("softmax_linear", "mlp_1hidden")


@dataclass(frozen=True)
class LearnerConfig:
    """Hyper-parameters shared by every per-channel learner."""

    learner_kind: str = "softmax_linear"
    hidden_units: int = 32
    learning_rate: float = 0.005
    epochs: int = 200
    batch_size: int = 128
    l2_penalty: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.learner_kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.learner_kind!r}")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be at least 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs cannot be negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.l2_penalty < 0.0:
            raise ValueError("l2_penalty cannot be negative")


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y] = 1.0
    return out


def _cross_entropy(probs: np.ndarray, onehot: np.ndarray) -> float:
    return float(-(onehot * np.log(np.maximum(probs, 1e-300))).sum() / probs.shape[0])


def _softmax_loss_grad(weights, bias, X, onehot, l2):
    """Mean cross-entropy plus an L2 term on the weights, with gradients."""
    probs = softmax(X @ weights + bias)
    loss = _cross_entropy(probs, onehot) + 0.5 * l2 * float((weights**2).sum())
    delta = (probs - onehot) / X.shape[0]
    return loss, X.T @ delta + l2 * weights, delta.sum(axis=0)


def _mlp_loss_grad(params, X, onehot, l2):
    """Forward/backward pass of a one-hidden-layer tanh network."""
    w1, b1, w2, b2 = params
    hidden = np.tanh(X @ w1 + b1)
    probs = softmax(hidden @ w2 + b2)
    loss = _cross_entropy(probs, onehot) + 0.5 * l2 * float((w1**2).sum() + (w2**2).sum())
    delta = (probs - onehot) / X.shape[0]
    d_w2 = hidden.T @ delta + l2 * w2
    d_b2 = delta.sum(axis=0)
    back = (delta @ w2.T) * (1.0 - hidden**2)
    d_w1 = X.T @ back + l2 * w1
    d_b1 = back.sum(axis=0)
    return loss, (d_w1, d_b1, d_w2, d_b2)


class _GradientDescentMixin:
    def _validate_fit_args(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D samples-by-features array")
        if y.shape != (X.shape[0],):
            raise ValueError("y must have one label per sample")
        if np.any(y < 0):
            raise ValueError("labels must be non-negative class indices")
        n_classes = self.n_classes if self.n_classes is not None else int(y.max()) + 1
        if int(y.max()) >= n_classes:
            raise ClassMismatchError(
                f"label {int(y.max())} outside the {n_classes}-class frame"
            )
        return X, y, n_classes

    def _epochs(self, X, onehot, step):
        rng = np.random.default_rng(self.seed)
        n = X.shape[0]
        log = []
        for epoch in range(self.epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            batches = 0
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                epoch_loss += step(X[idx], onehot[idx])
                batches += 1
            mean = epoch_loss / batches
            if not np.isfinite(mean):
                raise NonFiniteLossError(epoch, mean)
            log.append(mean)
        return log

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class SoftmaxClassifier(_GradientDescentMixin, ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression with a zero-initialized output layer."""

    def __init__(
        self,
        learning_rate: float = 0.005,
        epochs: int = 200,
        batch_size: int = 128,
        l2_penalty: float = 1e-4,
        seed: int = 0,
        n_classes: int | None = None,
    ):
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.l2_penalty = l2_penalty
        self.seed = seed
        self.n_classes = n_classes

    def fit(self, X, y):
        X, y, n_classes = self._validate_fit_args(X, y)
        onehot = _one_hot(y, n_classes)
        self.coef_ = np.zeros((X.shape[1], n_classes))
        self.intercept_ = np.zeros(n_classes)
        self.classes_ = np.arange(n_classes)

        def step(xb, yb):
            loss, d_w, d_b = _softmax_loss_grad(
                self.coef_, self.intercept_, xb, yb, self.l2_penalty
            )
            self.coef_ -= self.learning_rate * d_w
            self.intercept_ -= self.learning_rate * d_b
            return loss

        self.training_log_ = self._epochs(X, onehot, step)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "coef_")
        X = np.asarray(X, dtype=float)
        return softmax(X @ self.coef_ + self.intercept_)


class MlpClassifier(_GradientDescentMixin, ClassifierMixin, BaseEstimator):
    """One-hidden-layer tanh network; the output layer starts at zero."""

    def __init__(
        self,
        hidden_units: int = 32,
        learning_rate: float = 0.005,
        epochs: int = 200,
        batch_size: int = 128,
        l2_penalty: float = 1e-4,
        seed: int = 0,
        n_classes: int | None = None,
    ):
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.l2_penalty = l2_penalty
        self.seed = seed
        self.n_classes = n_classes

    def fit(self, X, y):
        X, y, n_classes = self._validate_fit_args(X, y)
        onehot = _one_hot(y, n_classes)
        init = np.random.default_rng(self.seed)
        d = X.shape[1]
        self.weights_ = [
            init.normal(scale=1.0 / np.sqrt(max(d, 1)), size=(d, self.hidden_units)),
            np.zeros(self.hidden_units),
            np.zeros((self.hidden_units, n_classes)),
            np.zeros(n_classes),
        ]
        self.classes_ = np.arange(n_classes)

        def step(xb, yb):
            loss, grads = _mlp_loss_grad(self.weights_, xb, yb, self.l2_penalty)
            for w, g in zip(self.weights_, grads):
                w -= self.learning_rate * g
            return loss

        self.training_log_ = self._epochs(X, onehot, step)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "weights_")
        X = np.asarray(X, dtype=float)
        w1, b1, w2, b2 = self.weights_
        return softmax(np.tanh(X @ w1 + b1) @ w2 + b2)


def train(features, labels, config: LearnerConfig):
    """Fit the classifier named by the config on one feature matrix."""
    common = dict(
        learning_rate=config.learning_rate,
        epochs=config.epochs,
        batch_size=config.batch_size,
        l2_penalty=config.l2_penalty,
        seed=config.seed,
    )
    if config.learner_kind == "softmax_linear":
        model = SoftmaxClassifier(**common)
    else:
        model = MlpClassifier(hidden_units=config.hidden_units, **common)
    return model.fit(features, labels)


def predict_scores(model, features, classifier_id: str | None = None, class_labels=None) -> ScoreMatrix:
    """Wrap a fitted model's class probabilities as a score matrix."""
    if classifier_id is None:
        classifier_id = _kind_of(model)
    return ScoreMatrix(classifier_id, model.predict_proba(features), class_labels)


def _kind_of(model) -> str:
    if isinstance(model, SoftmaxClassifier):
        return "softmax_linear"
    if isinstance(model, MlpClassifier):
        return "mlp_1hidden"
    raise ValueError(f"unsupported model type {type(model).__name__}")


def save_model(model, path):
    """Serialize a fitted model to JSON; weights round-trip exactly."""
    kind = _kind_of(model)
    check_is_fitted(model, "classes_")
    if kind == "softmax_linear":
        weights = [model.coef_.tolist(), model.intercept_.tolist()]
        input_width = model.coef_.shape[0]
    else:
        weights = [w.tolist() for w in model.weights_]
        input_width = model.weights_[0].shape[0]
    payload = {
        "learner_kind": kind,
        "input_width": input_width,
        "class_count": int(model.classes_.size),
        "weights": weights,
        "seed": int(model.seed),
    }
    Path(path).write_text(json.dumps(payload))


def load_model(path):
    """Rebuild a fitted model from its JSON form."""
    payload = json.loads(Path(path).read_text())
    kind = payload["learner_kind"]
    n_classes = int(payload["class_count"])
    weights = [np.asarray(w, dtype=float) for w in payload["weights"]]
    if kind == "softmax_linear":
        model = SoftmaxClassifier(seed=int(payload["seed"]), n_classes=n_classes)
        model.coef_, model.intercept_ = weights
    elif kind == "mlp_1hidden":
        model = MlpClassifier(
            hidden_units=weights[0].shape[1],
            seed=int(payload["seed"]),
            n_classes=n_classes,
        )
        model.weights_ = weights
    else:
        raise ParseError(f"unknown learner kind {kind!r}")
    if weights[0].shape[0] != int(payload["input_width"]):
        raise ParseError("input width disagrees with the stored weights")
    model.classes_ = np.arange(n_classes)
    model.training_log_ = []
    return model


def load_external_scores(path, frame) -> ScoreMatrix:
    """Read a score CSV and validate it against a frame of discernment."""
    from .io import read_score_csv

    return read_score_csv(path, frame)
