"""Frames of discernment, basic belief assignments, and evidence measures."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .exceptions import (
    FrameMismatchError,
    TooFewBoesError,
    TotalConflictError,
)

MASS_SUM_TOL = 1e-9
MASS_PRUNE_TOL = 1e-15
TOTAL_CONFLICT_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class Frame:
    """An ordered frame of discernment over class labels."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.labels:
            raise ValueError("frame needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("frame labels must be distinct")
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def full_mask(self) -> int:
        return (1 << self.size) - 1

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @classmethod
    def generic(cls, n_classes: int) -> "Frame":
        return cls(tuple(f"class_{i}" for i in range(n_classes)))


@dataclass(frozen=True, slots=True)
class FocalSet:
    """A non-empty subset of frame indices encoded as a bitmask."""

    mask: int

    def __post_init__(self):
        if self.mask < 1:
            raise ValueError("focal set must be non-empty")

    @classmethod
    def of(cls, *indices: int) -> "FocalSet":
        mask = 0
        for i in indices:
            if i < 0:
                raise ValueError("frame indices are non-negative")
            mask |= 1 << i
        return cls(mask)

    @classmethod
    def full(cls, frame: Frame) -> "FocalSet":
        return cls(frame.full_mask)

    @property
    def cardinality(self) -> int:
        return self.mask.bit_count()

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.mask.bit_length()) if self.mask >> i & 1)

    def labels(self, frame: Frame) -> tuple[str, ...]:
        return tuple(frame.labels[i] for i in self.indices())

    def intersect(self, other: "FocalSet") -> "FocalSet | None":
        mask = self.mask & other.mask
        return FocalSet(mask) if mask else None

    def union(self, other: "FocalSet") -> "FocalSet":
        return FocalSet(self.mask | other.mask)

    def jaccard(self, other: "FocalSet") -> float:
        inter = (self.mask & other.mask).bit_count()
        return inter / (self.mask | other.mask).bit_count()

    def __contains__(self, index: int) -> bool:
        return bool(self.mask >> index & 1)


def _coerce_focal(key) -> FocalSet:
    if isinstance(key, FocalSet):
        return key
    if isinstance(key, int):
        return FocalSet.of(key)
    return FocalSet.of(*key)


class Bba:
    """A basic belief assignment: positive masses on focal sets summing to one."""

    __slots__ = ("frame", "_masses")

    def __init__(self, frame: Frame, masses: Mapping):
        items: dict[FocalSet, float] = {}
        for key, value in masses.items():
            focal = _coerce_focal(key)
            if focal.mask > frame.full_mask:
                raise ValueError(f"focal set {focal.indices()} outside frame of size {frame.size}")
            value = float(value)
            if value < 0.0:
                raise ValueError(f"negative mass {value!r} on {focal.indices()}")
            if value == 0.0:
                continue
            items[focal] = items.get(focal, 0.0) + value
        total = sum(items.values())
        if abs(total - 1.0) > MASS_SUM_TOL:
            raise ValueError(f"masses sum to {total!r}, expected 1")
        self.frame = frame
        self._masses = dict(sorted(items.items(), key=lambda kv: kv[0].mask))

    @classmethod
    def bayesian(cls, frame: Frame, probs: Sequence[float]) -> "Bba":
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (frame.size,):
            raise ValueError("need one probability per frame label")
        return cls(frame, {FocalSet.of(i): p for i, p in enumerate(probs)})

    @classmethod
    def from_scores(cls, frame: Frame, scores: Sequence[float], weights=None) -> "Bba":
        """Build a score-discounted Bba: residual belief goes to the full frame."""
        scores = np.asarray(scores, dtype=float)
        if scores.shape != (frame.size,):
            raise ValueError("need one score per frame label")
        if np.any(scores < 0.0):
            raise ValueError("scores must be non-negative")
        if weights is None:
            weights = np.ones(frame.size)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (frame.size,):
            raise ValueError("need one weight per frame label")
        if np.any((weights < 0.0) | (weights > 1.0)):
            raise ValueError("weights must lie in [0, 1]")
        total = float(scores.sum())
        if total > 1.0 + 1e-6:
            raise ValueError(f"scores sum to {total!r} > 1")
        if total > 1.0:
            scores = scores / total
        masses = {FocalSet.of(i): w * s for i, (w, s) in enumerate(zip(weights, scores))}
        ignorance = 1.0 - sum(masses.values())
        if ignorance > 0.0:
            masses[FocalSet.full(frame)] = ignorance
        return cls(frame, masses)

    @classmethod
    def vacuous(cls, frame: Frame) -> "Bba":
        return cls(frame, {FocalSet.full(frame): 1.0})

    def mass(self, focal) -> float:
        return self._masses.get(_coerce_focal(focal), 0.0)

    def focal_sets(self) -> tuple[FocalSet, ...]:
        return tuple(self._masses)

    def items(self) -> Iterator[tuple[FocalSet, float]]:
        return iter(self._masses.items())

    def singleton_masses(self) -> np.ndarray:
        out = np.zeros(self.frame.size)
        for i in range(self.frame.size):
            out[i] = self._masses.get(FocalSet.of(i), 0.0)
        return out

    def ignorance(self) -> float:
        return self._masses.get(FocalSet.full(self.frame), 0.0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Bba):
            return NotImplemented
        return self.frame == other.frame and self._masses == other._masses

    def __str__(self) -> str:
        parts = []
        for focal, value in self._masses.items():
            names = ",".join(focal.labels(self.frame))
            parts.append(f"{{{names}}}={value:.6f}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Bba({self})"


@dataclass(frozen=True)
class BoeSet:
    """An ordered collection of bodies of evidence over one shared frame."""

    frame: Frame
    boes: tuple[Bba, ...]

    def __post_init__(self):
        if not self.boes:
            raise ValueError("BoeSet needs at least one Bba")
        for m in self.boes:
            if m.frame != self.frame:
                raise FrameMismatchError("all bodies of evidence must share one frame")
        object.__setattr__(self, "boes", tuple(self.boes))

    def __len__(self) -> int:
        return len(self.boes)

    def __iter__(self) -> Iterator[Bba]:
        return iter(self.boes)

    def __getitem__(self, i: int) -> Bba:
        return self.boes[i]

    @classmethod
    def of(cls, boes: Iterable[Bba]) -> "BoeSet":
        boes = tuple(boes)
        if not boes:
            raise ValueError("BoeSet needs at least one Bba")
        return cls(boes[0].frame, boes)


def _as_boes(boes) -> tuple[Bba, ...]:
    if isinstance(boes, BoeSet):
        return boes.boes
    boes = tuple(boes)
    if not boes:
        raise ValueError("need at least one Bba")
    frame = boes[0].frame
    for m in boes[1:]:
        if m.frame != frame:
            raise FrameMismatchError("all bodies of evidence must share one frame")
    return boes


def _check_frames(m1: Bba, m2: Bba):
    if m1.frame != m2.frame:
        raise FrameMismatchError("bodies of evidence refer to different frames")


def conflict_k(m1: Bba, m2: Bba) -> float:
    """Mass of the empty set under unnormalized conjunctive combination."""
    _check_frames(m1, m2)
    k = 0.0
    for a, va in m1.items():
        for b, vb in m2.items():
            if not a.mask & b.mask:
                k += va * vb
    return min(k, 1.0)


def combine_dempster(m1: Bba, m2: Bba) -> Bba:
    """Dempster's rule: conjunctive combination normalized by 1 - K."""
    _check_frames(m1, m2)
    accum: dict[int, float] = {}
    k = 0.0
    for a, va in m1.items():
        for b, vb in m2.items():
            inter = a.mask & b.mask
            if inter:
                accum[inter] = accum.get(inter, 0.0) + va * vb
            else:
                k += va * vb
    if k >= 1.0 - TOTAL_CONFLICT_TOL:
        raise TotalConflictError(k)
    scale = 1.0 / (1.0 - k)
    masses = {m: v * scale for m, v in accum.items() if v * scale >= MASS_PRUNE_TOL}
    total = sum(masses.values())
    return Bba(m1.frame, {FocalSet(m): v / total for m, v in masses.items()})


def deng_entropy(m: Bba) -> float:
    """Belief entropy with cardinality-aware denominators, in base-10 units."""
    total = 0.0
    for focal, value in m.items():
        total -= value * math.log10(value / (2 ** focal.cardinality - 1))
    return total


def _union_vectors(m1: Bba, m2: Bba) -> tuple[list[FocalSet], np.ndarray, np.ndarray]:
    masks = sorted({f.mask for f in m1.focal_sets()} | {f.mask for f in m2.focal_sets()})
    focals = [FocalSet(m) for m in masks]
    v1 = np.array([m1.mass(f) for f in focals])
    v2 = np.array([m2.mass(f) for f in focals])
    return focals, v1, v2


def bjs_divergence(m1: Bba, m2: Bba) -> float:
    """Belief Jensen-Shannon divergence in bits; 0 iff the assignments agree."""
    _check_frames(m1, m2)
    _, a, b = _union_vectors(m1, m2)
    mid = 0.5 * (a + b)
    total = 0.0
    for x, m in zip(np.concatenate([a, b]), np.concatenate([mid, mid])):
        if x > 0.0:
            total += 0.5 * x * math.log2(x / m)
    return max(total, 0.0)


def jousselme_distance(m1: Bba, m2: Bba) -> float:
    """Jaccard-weighted quadratic distance between two belief assignments."""
    _check_frames(m1, m2)
    focals, a, b = _union_vectors(m1, m2)
    d = a - b
    jac = np.array([[fa.jaccard(fb) for fb in focals] for fa in focals])
    return math.sqrt(max(float(d @ jac @ d), 0.0))


def average_bba(boes) -> Bba:
    """Arithmetic mean of the given belief assignments."""
    boes = _as_boes(boes)
    accum: dict[int, float] = {}
    for m in boes:
        for focal, value in m.items():
            accum[focal.mask] = accum.get(focal.mask, 0.0) + value
    n = len(boes)
    return Bba(boes[0].frame, {FocalSet(mask): v / n for mask, v in accum.items()})


def _spread(boes: Sequence[Bba], center: Bba) -> float:
    return sum(jousselme_distance(m, center) for m in boes) / len(boes)


def disagreement_degree(boes, q: int, sigma: float = 2.0) -> float:
    """How much body q disagrees with the rest, squashed into (0, 1).

    Compares the spread of all bodies around their mean with the spread of the
    others around their own mean; arctan maps the gap into (0, 1), with 0.5
    meaning body q is neutral.
    """
    boes = _as_boes(boes)
    if len(boes) < 2:
        raise TooFewBoesError("disagreement needs at least two bodies of evidence")
    if not 0 <= q < len(boes):
        raise IndexError(f"body index {q} out of range for {len(boes)} bodies")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    spread_all = _spread(boes, average_bba(boes))
    others = [m for i, m in enumerate(boes) if i != q]
    spread_rest = _spread(others, average_bba(others))
    return 0.5 + math.atan(sigma * (spread_all - spread_rest)) / math.pi
