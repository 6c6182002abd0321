"""Spectral channel engineering and least-angle frequency selection."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import lars_path
from sklearn.utils.validation import check_is_fitted

from .exceptions import LengthMismatchError, TooFewSamplesError

LOG_FLOOR = 1e-12
CHANNEL_NAMES = (
    "x1",
    "x2",
    "x1_plus_x2",
    "x1_times_x2",
    "x1_sq",
    "x2_sq",
    "log_x1",
    "log_x2",
)


@dataclass(frozen=True)
class SpectrumDataset:
    """Aligned spectra for a set of samples over a shared frequency axis."""

    frequencies: np.ndarray
    channels: dict[str, np.ndarray]
    labels: np.ndarray
    sample_ids: tuple[str, ...]

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        if freqs.ndim != 1 or freqs.size == 0:
            raise ValueError("frequencies must be a non-empty 1-D array")
        if np.any(np.diff(freqs) <= 0.0):
            raise ValueError("frequencies must be strictly increasing")
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        # ids may repeat: oversampling duplicates minority rows verbatim
        ids = tuple(str(s) for s in self.sample_ids)
        if len(ids) != labels.size:
            raise LengthMismatchError("sample ids do not match the label count")
        channels = {}
        for name, matrix in self.channels.items():
            matrix = np.asarray(matrix, dtype=float)
            if matrix.shape != (labels.size, freqs.size):
                raise ValueError(
                    f"channel {name!r} has shape {matrix.shape}, "
                    f"expected {(labels.size, freqs.size)}"
                )
            if not np.all(np.isfinite(matrix)):
                raise ValueError(f"channel {name!r} contains non-finite values")
            channels[str(name)] = matrix
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def n_samples(self) -> int:
        return self.labels.size

    @property
    def n_frequencies(self) -> int:
        return self.frequencies.size

    def subset(self, indices) -> "SpectrumDataset":
        indices = np.asarray(indices, dtype=int)
        return SpectrumDataset(
            frequencies=self.frequencies,
            channels={k: v[indices] for k, v in self.channels.items()},
            labels=self.labels[indices],
            sample_ids=tuple(self.sample_ids[i] for i in indices),
        )

    def slice_bins(self, start: int, stop: int) -> "SpectrumDataset":
        if not 0 <= start < stop <= self.n_frequencies:
            raise ValueError(f"invalid bin range [{start}, {stop})")
        return SpectrumDataset(
            frequencies=self.frequencies[start:stop],
            channels={k: v[:, start:stop] for k, v in self.channels.items()},
            labels=self.labels,
            sample_ids=self.sample_ids,
        )


def generate_channels(x1, x2) -> dict[str, np.ndarray]:
    """Derive the eight fixed spectral channels from two raw spectra."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise ValueError("raw channels must share one shape")
    return {
        "x1": x1.copy(),
        "x2": x2.copy(),
        "x1_plus_x2": x1 + x2,
        "x1_times_x2": x1 * x2,
        "x1_sq": x1**2,
        "x2_sq": x2**2,
        "log_x1": np.log10(np.maximum(x1, LOG_FLOOR)),
        "log_x2": np.log10(np.maximum(x2, LOG_FLOOR)),
    }


def normalize_minmax(x, stats: tuple[float, float] | None = None):
    """Affine-map a channel into [-1, 1] using global min/max statistics.

    Returns the scaled matrix and the (min, max) pair actually used, so the
    same map can be replayed on held-out data.
    """
    x = np.asarray(x, dtype=float)
    if stats is None:
        stats = (float(x.min()), float(x.max()))
    lo, hi = stats
    if hi <= lo:
        return np.zeros_like(x), (lo, hi)
    return 2.0 * (x - lo) / (hi - lo) - 1.0, (lo, hi)


@dataclass(frozen=True)
class LarsPath:
    """A piecewise-linear regularization path over standardized features."""

    knots: tuple[tuple[float, np.ndarray], ...]
    entry_order: tuple[int, ...]
    final_active: tuple[int, ...]
    excluded: tuple[int, ...] = ()

    def coef_at(self, lam: float) -> np.ndarray:
        """Interpolate coefficients at a penalty level along the path."""
        lambdas = np.array([k[0] for k in self.knots])
        betas = np.stack([k[1] for k in self.knots])
        if lam >= lambdas[0]:
            return np.zeros_like(betas[0])
        out = np.empty(betas.shape[1])
        for j in range(betas.shape[1]):
            out[j] = np.interp(lam, lambdas[::-1], betas[::-1, j])
        return out


def lars_lasso_path(X, y) -> LarsPath:
    """Trace the lasso path with the least-angle method.

    Columns are centered to zero mean and scaled to unit norm, the target is
    centered, and the penalty at each knot is reported as the largest absolute
    correlation with the residual.  Zero-variance columns are excluded.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D samples-by-features array")
    n_samples, n_features = X.shape
    if n_samples < 2:
        raise TooFewSamplesError(f"need at least 2 samples, got {n_samples}")
    if y.shape != (n_samples,):
        raise LengthMismatchError("y must have one entry per sample")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("X and y must be finite")

    Xc = X - X.mean(axis=0)
    norms = np.linalg.norm(Xc, axis=0)
    tol = 1e-12 * max(float(norms.max(initial=0.0)), 1.0)
    keep = np.flatnonzero(norms > tol)
    excluded = tuple(int(j) for j in np.flatnonzero(norms <= tol))
    yc = y - y.mean()
    zero = np.zeros(n_features)
    if keep.size == 0 or np.linalg.norm(yc) <= 1e-15:
        return LarsPath(knots=((0.0, zero),), entry_order=(), final_active=(), excluded=excluded)

    Xs = Xc[:, keep] / norms[keep]
    with warnings.catch_warnings():
        # Near-saturated designs stop the path early; the prefix is still valid.
        warnings.simplefilter("ignore", ConvergenceWarning)
        alphas, _, coefs = lars_path(Xs, yc, method="lasso")
    lambdas = alphas * n_samples

    knots = []
    for k in range(lambdas.size):
        beta = zero.copy()
        beta[keep] = coefs[:, k]
        knots.append((float(lambdas[k]), beta))

    entry_order: list[int] = []
    seen = set()
    for k in range(lambdas.size):
        new = [int(keep[j]) for j in np.flatnonzero(coefs[:, k]) if int(keep[j]) not in seen]
        for j in sorted(new):
            entry_order.append(j)
            seen.add(j)
    final_active = tuple(int(j) for j in sorted(keep[np.flatnonzero(coefs[:, -1])]))
    return LarsPath(
        knots=tuple(knots),
        entry_order=tuple(entry_order),
        final_active=final_active,
        excluded=excluded,
    )


class LarsFrequencySelector(BaseEstimator, TransformerMixin):
    """Select feature columns that stay active at the end of a lasso path."""

    def fit(self, X, y):
        self.path_ = lars_lasso_path(X, y)
        self.selected_ = np.asarray(self.path_.final_active, dtype=int)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "selected_")
        X = np.asarray(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X[:, self.selected_]

    def get_support(self) -> np.ndarray:
        check_is_fitted(self, "selected_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.selected_] = True
        return mask


@dataclass(frozen=True)
class FrequencySelection:
    """Per-channel selected frequency bins and their sorted union."""

    per_channel: dict[str, tuple[int, ...]]
    coefficients: dict[str, dict[int, float]]
    union: tuple[int, ...]
    frequencies: np.ndarray = field(default=None)


def regression_target(labels) -> np.ndarray:
    """Code labels for the selection regressions: binary becomes -1/+1."""
    labels = np.asarray(labels)
    values = np.unique(labels)
    if values.size == 2:
        return np.where(labels == values[0], -1.0, 1.0)
    return labels.astype(float)


def select_frequencies(dataset: SpectrumDataset, labels=None) -> FrequencySelection:
    """Run the lasso-path selection on every derived channel of a dataset."""
    for required in ("x1", "x2"):
        if required not in dataset.channels:
            raise ValueError(f"dataset is missing raw channel {required!r}")
    if labels is None:
        labels = dataset.labels
    y = regression_target(labels)
    if y.size != dataset.n_samples:
        raise LengthMismatchError("labels do not match the dataset samples")
    channels = generate_channels(dataset.channels["x1"], dataset.channels["x2"])
    per_channel: dict[str, tuple[int, ...]] = {}
    coefficients: dict[str, dict[int, float]] = {}
    union: set[int] = set()
    for name in CHANNEL_NAMES:
        path = lars_lasso_path(channels[name], y)
        per_channel[name] = path.final_active
        final_beta = path.knots[-1][1]
        coefficients[name] = {j: float(final_beta[j]) for j in path.final_active}
        union.update(path.final_active)
    return FrequencySelection(
        per_channel=per_channel,
        coefficients=coefficients,
        union=tuple(sorted(union)),
        frequencies=dataset.frequencies.copy(),
    )
