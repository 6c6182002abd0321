"""Credibility-weighted fusion of classifier score rows into one decision."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evidence import (
    Bba,
    BoeSet,
    FocalSet,
    Frame,
    _as_boes,
    average_bba,
    bjs_divergence,
    combine_dempster,
    deng_entropy,
    disagreement_degree,
)
from .exceptions import (
    DegenerateChiefError,
    EvifuseError,
    FrameMismatchError,
    InvalidWeightsError,
    LengthMismatchError,
    RowSumExceedsOneError,
    TotalConflictError,
)

ROW_SUM_TOL = 1e-6
CHIEF_TIE_TOL = 1e-12


class ScoreMatrix:
    """Per-sample class scores emitted by one classifier."""

    __slots__ = ("classifier_id", "scores", "class_labels")

    def __init__(self, classifier_id: str, scores, class_labels=None):
        scores = np.array(scores, dtype=float)
        if scores.ndim != 2:
            raise ValueError("scores must be a 2-D samples-by-classes array")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if np.any(scores < 0.0):
            raise ValueError("scores must be non-negative")
        totals = scores.sum(axis=1)
        over = totals > 1.0
        bad = totals > 1.0 + ROW_SUM_TOL
        if np.any(bad):
            row = int(np.argmax(bad))
            raise RowSumExceedsOneError(row, float(totals[row]))
        if np.any(over):
            scores[over] /= totals[over, None]
        if class_labels is None:
            class_labels = Frame.generic(scores.shape[1]).labels
        class_labels = tuple(str(s) for s in class_labels)
        if len(class_labels) != scores.shape[1]:
            raise ValueError("need one class label per score column")
        self.classifier_id = str(classifier_id)
        self.scores = scores
        self.class_labels = class_labels

    @property
    def n_samples(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def frame(self) -> Frame:
        return Frame(self.class_labels)

    def row(self, i: int) -> np.ndarray:
        return self.scores[i]

    def __repr__(self) -> str:
        return (
            f"ScoreMatrix({self.classifier_id!r}, {self.n_samples}x{self.n_classes})"
        )


@dataclass(frozen=True)
class BoeGenConfig:
    """How score rows become bodies of evidence.

    ``weights`` discounts each class score before the residual goes to the
    full frame; ``None`` means no discounting.
    """

    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if any(x < 0.0 or x > 1.0 for x in w):
                raise ValueError("weights must lie in [0, 1]")
            object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class FusionConfig:
    """Knobs for the fusion rule."""

    theta: float
    sigma: float = 2.0
    epsilon: float = 1e-12

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")


@dataclass
class FusionTrace:
    """Intermediate vectors from one fusion, for inspection and tests."""

    abjs: np.ndarray
    disagreement: np.ndarray
    sd_hat: np.ndarray
    cd_hat: np.ndarray
    sd_chief_hat: np.ndarray
    chief: FocalSet
    w_hat: np.ndarray
    wae: Bba
    fused: Bba

    @property
    def chief_index(self):
        indices = self.chief.indices()
        return indices[0] if len(indices) == 1 else indices

    def to_dict(self) -> dict:
        def bba_entries(m: Bba):
            return [
                {"focal": list(f.indices()), "mass": v} for f, v in m.items()
            ]

        chief = self.chief_index
        return {
            "abjs": self.abjs.tolist(),
            "disagreement": self.disagreement.tolist(),
            "sd_hat": self.sd_hat.tolist(),
            "cd_hat": self.cd_hat.tolist(),
            "sd_chief_hat": self.sd_chief_hat.tolist(),
            "chief_index": chief if isinstance(chief, int) else list(chief),
            "w_hat": self.w_hat.tolist(),
            "wae": bba_entries(self.wae),
            "fused": bba_entries(self.fused),
        }


def boes_from_scores(rows, frame: Frame | None = None, config: BoeGenConfig | None = None) -> BoeSet:
    """Turn one score row per classifier into a set of bodies of evidence."""
    rows = [np.asarray(r, dtype=float) for r in rows]
    if not rows:
        raise ValueError("need at least one score row")
    n_classes = rows[0].shape[0]
    for r in rows:
        if r.shape != (n_classes,):
            raise LengthMismatchError("score rows must share one length")
    if frame is None:
        frame = Frame.generic(n_classes)
    if frame.size != n_classes:
        raise FrameMismatchError(
            f"frame has {frame.size} labels but rows have {n_classes} scores"
        )
    weights = config.weights if config is not None else None
    boes = []
    for i, r in enumerate(rows):
        total = float(r.sum())
        if total > 1.0 + ROW_SUM_TOL:
            raise RowSumExceedsOneError(i, total)
        boes.append(Bba.from_scores(frame, r, weights))
    return BoeSet(frame, tuple(boes))


@dataclass
class _FusionCore:
    """Theta-independent quantities shared across a theta sweep."""

    boes: tuple[Bba, ...]
    abjs: np.ndarray
    disagreement: np.ndarray
    sd_hat: np.ndarray
    cd_hat: np.ndarray
    sd_chief_hat: np.ndarray
    chief: FocalSet


def _pick_chief(mean: Bba) -> FocalSet:
    best = None
    best_mass = -1.0
    for focal, value in mean.items():
        if value > best_mass + CHIEF_TIE_TOL:
            best, best_mass = focal, value
        elif value > best_mass - CHIEF_TIE_TOL and (best is None or focal.mask < best.mask):
            best = focal
    return best


def average_bjs(boes) -> np.ndarray:
    """Per-body mean divergence against the other bodies."""
    boes = _as_boes(boes)
    n = len(boes)
    if n == 1:
        return np.zeros(1)
    pair = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            pair[i, j] = pair[j, i] = bjs_divergence(boes[i], boes[j])
    return pair.sum(axis=1) / (n - 1)


def _fusion_core(boes, sigma: float, epsilon: float) -> _FusionCore:
    boes = _as_boes(boes)
    n = len(boes)
    if n == 1:
        m = boes[0]
        chief = _pick_chief(m)
        ones = np.ones(1)
        return _FusionCore(boes, np.zeros(1), np.full(1, 0.5), ones, ones, ones, chief)
    abjs = average_bjs(boes)
    mstar = np.array([disagreement_degree(boes, i, sigma) for i in range(n)])
    sd = 1.0 / np.maximum(abjs * mstar, epsilon)
    sd_hat = sd / sd.sum()
    cd = np.exp([deng_entropy(m) for m in boes]) * sd_hat
    cd_hat = cd / cd.max()
    chief = _pick_chief(average_bba(boes))
    sd_chief = np.array([m.mass(chief) for m in boes])
    peak = sd_chief.max()
    if peak <= 0.0:
        raise DegenerateChiefError("no body of evidence supports the chief focal element")
    return _FusionCore(boes, abjs, mstar, sd_hat, cd_hat, sd_chief / peak, chief)


def support_credibility(boes, config: FusionConfig) -> tuple[np.ndarray, np.ndarray]:
    """Normalized support and credibility degrees for each body of evidence."""
    core = _fusion_core(boes, config.sigma, config.epsilon)
    return core.sd_hat, core.cd_hat


def chief_support(boes) -> tuple[np.ndarray, FocalSet]:
    """Per-body support for the chief focal element, scaled to peak at one."""
    core = _fusion_core(boes, 2.0, 1e-12)
    return core.sd_chief_hat, core.chief


def _fuse_core(core: _FusionCore, theta: float, epsilon: float) -> tuple[Bba, FusionTrace]:
    boes = core.boes
    n = len(boes)
    w = theta * core.cd_hat + (1.0 - theta) * core.sd_chief_hat
    total = float(w.sum())
    if not math.isfinite(total) or total <= epsilon:
        raise InvalidWeightsError(f"weight vector sums to {total!r}")
    w_hat = w / total
    accum: dict[int, float] = {}
    for weight, m in zip(w_hat, boes):
        for focal, value in m.items():
            accum[focal.mask] = accum.get(focal.mask, 0.0) + weight * value
    low = min(accum.values())
    if low < -CHIEF_TIE_TOL:
        raise InvalidWeightsError(f"weighted evidence has negative mass {low!r}")
    masses = {mask: max(v, 0.0) for mask, v in accum.items()}
    scale = sum(masses.values())
    wae = Bba(core.boes[0].frame, {FocalSet(m): v / scale for m, v in masses.items()})
    fused = wae
    for _ in range(n - 1):
        fused = combine_dempster(fused, wae)
    trace = FusionTrace(
        abjs=core.abjs.copy(),
        disagreement=core.disagreement.copy(),
        sd_hat=core.sd_hat.copy(),
        cd_hat=core.cd_hat.copy(),
        sd_chief_hat=core.sd_chief_hat.copy(),
        chief=core.chief,
        w_hat=w_hat,
        wae=wae,
        fused=fused,
    )
    return fused, trace


def fuse(boes, config: FusionConfig) -> tuple[Bba, FusionTrace]:
    """Fuse bodies of evidence into one belief assignment plus its trace."""
    core = _fusion_core(boes, config.sigma, config.epsilon)
    return _fuse_core(core, config.theta, config.epsilon)


@dataclass
class FusionBatchResult:
    """Row-wise fusion output over a validation set."""

    scores: ScoreMatrix
    ignorance: np.ndarray
    traces: list[FusionTrace | None]
    errors: list[tuple[int, EvifuseError]] = field(default_factory=list)


def fuse_batch(
    matrices: Sequence[ScoreMatrix],
    config: FusionConfig,
    gen: BoeGenConfig | None = None,
) -> FusionBatchResult:
    """Fuse aligned score matrices row by row; row failures are collected."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("need at least one score matrix")
    first = matrices[0]
    for sm in matrices[1:]:
        if sm.class_labels != first.class_labels:
            raise FrameMismatchError("score matrices use different class labels")
        if sm.n_samples != first.n_samples:
            raise LengthMismatchError("score matrices cover different sample counts")
    frame = first.frame()
    out = np.zeros((first.n_samples, first.n_classes))
    ignorance = np.zeros(first.n_samples)
    traces: list[FusionTrace | None] = []
    errors: list[tuple[int, EvifuseError]] = []
    for i in range(first.n_samples):
        boes = boes_from_scores([sm.scores[i] for sm in matrices], frame, gen)
        try:
            fused, trace = fuse(boes, config)
        except (InvalidWeightsError, TotalConflictError, DegenerateChiefError) as err:
            errors.append((i, err))
            traces.append(None)
            ignorance[i] = 1.0
            continue
        out[i] = fused.singleton_masses()
        ignorance[i] = 1.0 - out[i].sum()
        traces.append(trace)
    ignorance = np.maximum(ignorance, 0.0)
    return FusionBatchResult(ScoreMatrix("fused", out, first.class_labels), ignorance, traces, errors)
