"""Empirical information measures and information-driven ensemble selection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import EmptyInputError, EmptyPoolError, InvalidWeightsError, LengthMismatchError
from .fusion import FusionConfig, ScoreMatrix, _fuse_core, _fusion_core, boes_from_scores


def _as_labels(x, name: str = "labels") -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise EmptyInputError(f"{name} is empty")
    return arr


def _codes(x: np.ndarray) -> tuple[np.ndarray, int]:
    values, inverse = np.unique(x, return_inverse=True)
    return inverse, len(values)


def _entropy_from_codes(codes: np.ndarray, n_values: int) -> float:
    p = np.bincount(codes, minlength=n_values) / codes.size
    p = p[p > 0.0]
    return float(-(p * np.log2(p)).sum())


def _joint_codes(*vectors: np.ndarray) -> tuple[np.ndarray, int]:
    combined, radix = _codes(vectors[0])
    for v in vectors[1:]:
        codes, n = _codes(v)
        combined = combined * n + codes
        radix *= n
    return combined, radix


def entropy(x) -> float:
    """Shannon entropy of an empirical label distribution, in bits."""
    return _entropy_from_codes(*_codes(_as_labels(x, "x")))


def _check_same_length(*vectors: np.ndarray):
    lengths = {v.size for v in vectors}
    if len(lengths) > 1:
        raise LengthMismatchError(f"vectors have different lengths {sorted(lengths)}")


def mutual_information(x, y) -> float:
    """Empirical mutual information between two label vectors, in bits."""
    x = _as_labels(x, "x")
    y = _as_labels(y, "y")
    _check_same_length(x, y)
    h_xy = _entropy_from_codes(*_joint_codes(x, y))
    return entropy(x) + entropy(y) - h_xy


def conditional_mi(x, y, z) -> float:
    """Mutual information between x and y given z, in bits."""
    x = _as_labels(x, "x")
    y = _as_labels(y, "y")
    z = _as_labels(z, "z")
    _check_same_length(x, y, z)
    h_xz = _entropy_from_codes(*_joint_codes(x, z))
    h_yz = _entropy_from_codes(*_joint_codes(y, z))
    h_z = entropy(z)
    h_xyz = _entropy_from_codes(*_joint_codes(x, y, z))
    return h_xz + h_yz - h_z - h_xyz


def joint_mi(x, w, y) -> float:
    """Mutual information between the pair (x, w) and y, in bits."""
    return conditional_mi(x, y, w) + mutual_information(w, y)


def rank_classifiers(predictions: Sequence, y, with_scores: bool = False):
    """Order classifiers by relevance first, then by joint informativeness.

    The first pick maximizes mutual information with the target, the second
    maximizes it conditioned on the first, and every later pick maximizes the
    worst-case joint information with the already ranked classifiers.  Ties
    break toward the lower classifier index.
    """
    predictions = [_as_labels(p, f"predictions[{i}]") for i, p in enumerate(predictions)]
    if not predictions:
        raise EmptyPoolError("no classifiers to rank")
    y = _as_labels(y, "y")
    _check_same_length(*predictions, y)
    remaining = list(range(len(predictions)))
    order: list[int] = []
    scores: list[float] = []

    def take(candidate_scores):
        best = max(range(len(remaining)), key=lambda i: (candidate_scores[i], -remaining[i]))
        scores.append(float(candidate_scores[best]))
        order.append(remaining.pop(best))

    take([mutual_information(predictions[i], y) for i in remaining])
    if remaining:
        first = predictions[order[0]]
        take([conditional_mi(predictions[i], y, first) for i in remaining])
    while remaining:
        take(
            [
                min(joint_mi(predictions[i], predictions[j], y) for j in order)
                for i in remaining
            ]
        )
    if with_scores:
        return order, scores
    return order


@dataclass(frozen=True)
class RankingResult:
    """Ranked classifier order plus the prefix and theta chosen on validation."""

    order: tuple[int, ...]
    scores: tuple[float, ...]
    selected_size: int
    selected_theta: float
    validation_accuracy: float

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "selected_size": self.selected_size,
            "selected_theta": self.selected_theta,
            "validation_accuracy": self.validation_accuracy,
        }


def select_ensemble(
    matrices: Sequence[ScoreMatrix],
    y,
    theta_grid: Sequence[float],
    config: FusionConfig | None = None,
    order: Sequence[int] | None = None,
) -> RankingResult:
    """Pick the ensemble prefix size and theta with the best fused accuracy.

    Classifiers are ranked first (unless ``order`` is supplied), then every
    prefix of the ranking is fused across the theta grid.  Ties prefer the
    smaller prefix, then the smaller theta.  Grid cells where the fusion
    weights degenerate score zero.
    """
    matrices = list(matrices)
    if not matrices:
        raise EmptyPoolError("no score matrices to select from")
    y = _as_labels(y, "y")
    if y.size != matrices[0].n_samples:
        raise LengthMismatchError("labels do not match the score row count")
    thetas = sorted(float(t) for t in theta_grid)
    if not thetas:
        raise ValueError("theta grid is empty")
    sigma = config.sigma if config is not None else 2.0
    epsilon = config.epsilon if config is not None else 1e-12
    if order is None:
        predictions = [np.argmax(sm.scores, axis=1) for sm in matrices]
        order, scores = rank_classifiers(predictions, y, with_scores=True)
    else:
        order = list(order)
        if sorted(order) != list(range(len(matrices))):
            raise ValueError("order must be a permutation of the classifier indices")
        scores = []
    ranked = [matrices[i] for i in order]
    frame = ranked[0].frame()
    y_arr = np.asarray(y)
    best = (-1.0, 0, 0.0)
    for size in range(1, len(ranked) + 1):
        cores = [
            _fusion_core(
                boes_from_scores([sm.scores[row] for sm in ranked[:size]], frame),
                sigma,
                epsilon,
            )
            for row in range(y_arr.size)
        ]
        for theta in thetas:
            correct = 0
            failed = False
            for row, core in enumerate(cores):
                try:
                    fused, _ = _fuse_core(core, theta, epsilon)
                except InvalidWeightsError:
                    failed = True
                    break
                if int(np.argmax(fused.singleton_masses())) == int(y_arr[row]):
                    correct += 1
            accuracy = 0.0 if failed else correct / y_arr.size
            if accuracy > best[0]:
                best = (accuracy, size, theta)
    return RankingResult(
        order=tuple(order),
        scores=tuple(scores),
        selected_size=best[1],
        selected_theta=best[2],
        validation_accuracy=best[0],
    )
