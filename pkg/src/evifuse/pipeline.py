"""Synthetic spectra, experiment orchestration, and robustness sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .evidence import Frame
from .exceptions import (
    ClassTooSmallError,
    InvalidCountsError,
    LengthMismatchError,
    TooManySectionsError,
)
from .features import (
    CHANNEL_NAMES,
    SpectrumDataset,
    generate_channels,
    lars_lasso_path,
    normalize_minmax,
    regression_target,
)
from .fusion import FusionConfig, ScoreMatrix
from .infotheory import RankingResult, select_ensemble
from .learners import LearnerConfig, predict_scores, train

LEARNER_NAMES = CHANNEL_NAMES + ("all",)
DEFAULT_FREQ_RANGE = (3000.0, 38000.0)
DEFAULT_DAMPING_RANGE = (0.004, 0.02)
DEFAULT_THETA_GRID = tuple(k / 2.0 for k in range(-1, 9))
DEFAULT_NSR_LEVELS = (0.0, 10.0, 20.0, 50.0, 80.0, 120.0, 160.0)
DEFAULT_BANDWIDTH_SECTIONS = (1, 2, 4, 8, 16)

_SEED_SPLIT = 1
_SEED_OVERSAMPLE = 2
_SEED_LEARNER_BASE = 100
_SEED_NOISE = 900


def _sub_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(tuple(int(e) for e in entropy)).generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a repeated experiment needs besides the dataset itself."""

    seed: int = 0
    repetitions: int = 50
    train_fraction: float = 0.7
    theta_grid: tuple[float, ...] = DEFAULT_THETA_GRID
    nsr_levels: tuple[float, ...] = DEFAULT_NSR_LEVELS
    bandwidth_sections: tuple[int, ...] = DEFAULT_BANDWIDTH_SECTIONS
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    fusion: FusionConfig = field(default_factory=lambda: FusionConfig(theta=0.5))

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        for name in ("theta_grid", "nsr_levels", "bandwidth_sections"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} cannot be empty")
            object.__setattr__(self, name, values)
        if any(v < 0 for v in self.nsr_levels):
            raise ValueError("nsr levels cannot be negative")
        if any(int(n) < 1 for n in self.bandwidth_sections):
            raise ValueError("bandwidth sections must be positive")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "repetitions": self.repetitions,
            "train_fraction": self.train_fraction,
            "theta_grid": list(self.theta_grid),
            "nsr_levels": list(self.nsr_levels),
            "bandwidth_sections": list(self.bandwidth_sections),
            "learner": {
                "learner_kind": self.learner.learner_kind,
                "hidden_units": self.learner.hidden_units,
                "learning_rate": self.learner.learning_rate,
                "epochs": self.learner.epochs,
                "batch_size": self.learner.batch_size,
                "l2_penalty": self.learner.l2_penalty,
                "seed": self.learner.seed,
            },
            "fusion": {
                "theta": self.fusion.theta,
                "sigma": self.fusion.sigma,
                "epsilon": self.fusion.epsilon,
            },
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        def pick(source: dict, allowed: set[str], where: str) -> dict:
            unknown = set(source) - allowed
            if unknown:
                raise ValueError(f"unknown {where} keys: {sorted(unknown)}")
            return dict(source)

        top = pick(
            payload,
            {
                "seed",
                "repetitions",
                "train_fraction",
                "theta_grid",
                "nsr_levels",
                "bandwidth_sections",
                "learner",
                "fusion",
            },
            "config",
        )
        if "learner" in top:
            top["learner"] = LearnerConfig(
                **pick(
                    top["learner"],
                    {
                        "learner_kind",
                        "hidden_units",
                        "learning_rate",
                        "epochs",
                        "batch_size",
                        "l2_penalty",
                        "seed",
                    },
                    "learner",
                )
            )
        if "fusion" in top:
            top["fusion"] = FusionConfig(
                **pick(top["fusion"], {"theta", "sigma", "epsilon"}, "fusion")
            )
        for name in ("theta_grid", "nsr_levels"):
            if name in top:
                top[name] = tuple(float(v) for v in top[name])
        if "bandwidth_sections" in top:
            top["bandwidth_sections"] = tuple(int(v) for v in top["bandwidth_sections"])
        return cls(**top)


def synthesize_frf_dataset(
    n_healthy: int,
    n_defected: int,
    n_f: int,
    seed: int,
    n_modes: int | None = None,
    freq_range: tuple[float, float] = DEFAULT_FREQ_RANGE,
    damping_range: tuple[float, float] = DEFAULT_DAMPING_RANGE,
    defect_band: tuple[float, float] | None = None,
) -> SpectrumDataset:
    """Draw a two-channel magnitude-spectrum dataset from a modal model.

    Healthy and defected samples share the modal skeleton; the defect is a
    dataset-level signature that pulls a subset of modes down by 0.5 to 2
    percent and raises their damping by up to half, on top of small
    per-sample jitter.  ``defect_band`` confines the signature modes to a
    frequency interval.
    """
    if n_healthy < 1 or n_defected < 1:
        raise InvalidCountsError("need at least one sample per class")
    if n_f < 16:
        raise InvalidCountsError("need at least 16 frequency bins")
    if n_modes is not None and n_modes < 1:
        raise InvalidCountsError("need at least one mode")
    lo, hi = float(freq_range[0]), float(freq_range[1])
    if not 0.0 < lo < hi:
        raise ValueError("frequency range must be positive and increasing")
    eta_lo, eta_hi = float(damping_range[0]), float(damping_range[1])
    if not 0.0 < eta_lo <= eta_hi:
        raise ValueError("damping range must be positive and ordered")

    rng = np.random.default_rng(seed)
    if n_modes is None:
        n_modes = int(rng.integers(8, 16))
    span = hi - lo
    inner_lo, inner_hi = lo + 0.02 * span, hi - 0.02 * span
    base = np.linspace(inner_lo, inner_hi, n_modes)
    spacing = (inner_hi - inner_lo) / max(n_modes - 1, 1)
    mode_freqs = np.sort(base + rng.uniform(-0.25, 0.25, n_modes) * spacing)
    damping = rng.uniform(eta_lo, eta_hi, n_modes)
    # residues per channel: signed so antiresonances differ between channels
    signs = rng.choice([-1.0, 1.0], size=(2, n_modes))
    amps = rng.uniform(0.2, 1.0, size=(2, n_modes))

    if defect_band is not None:
        b_lo, b_hi = float(defect_band[0]), float(defect_band[1])
        eligible = np.flatnonzero((mode_freqs >= b_lo) & (mode_freqs <= b_hi))
        if eligible.size == 0:
            raise InvalidCountsError("defect band contains no modes")
    else:
        eligible = np.arange(n_modes)
    picked = eligible[rng.random(eligible.size) < 0.5]
    if picked.size == 0:
        picked = eligible[[int(rng.integers(eligible.size))]]
    signature = np.sort(picked)

    freqs = np.linspace(lo, hi, n_f)
    omega = 2.0 * np.pi * freqs
    labels = np.concatenate([np.zeros(n_healthy, dtype=int), np.ones(n_defected, dtype=int)])
    ids = [f"h{i:04d}" for i in range(n_healthy)] + [f"d{i:04d}" for i in range(n_defected)]
    x1 = np.empty((labels.size, n_f))
    x2 = np.empty((labels.size, n_f))
    for row, label in enumerate(labels):
        f_k = mode_freqs * (1.0 + 0.002 * rng.standard_normal(n_modes))
        eta_k = np.maximum(damping * (1.0 + 0.05 * rng.standard_normal(n_modes)), 0.5 * eta_lo)
        amp_k = amps * (1.0 + 0.05 * rng.standard_normal((2, n_modes)))
        if label == 1:
            shift = rng.uniform(0.005, 0.02, signature.size)
            gain = rng.uniform(1.0, 1.5, signature.size)
            f_k[signature] *= 1.0 - shift
            eta_k[signature] *= gain
        omega_k = 2.0 * np.pi * f_k
        denom = omega_k[:, None] ** 2 - omega[None, :] ** 2 + 1j * eta_k[:, None] * omega_k[:, None] ** 2
        numer = (signs * amp_k) * omega_k**2
        x1[row] = np.abs((numer[0][:, None] / denom).sum(axis=0))
        x2[row] = np.abs((numer[1][:, None] / denom).sum(axis=0))
    return SpectrumDataset(
        frequencies=freqs,
        channels={"x1": x1, "x2": x2},
        labels=labels,
        sample_ids=tuple(ids),
    )


def split_train_validation(dataset: SpectrumDataset, fraction: float, seed: int):
    """Stratified split: per class, a seeded permutation is cut at the fraction."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    val_idx: list[int] = []
    for cls in np.unique(dataset.labels):
        members = np.flatnonzero(dataset.labels == cls)
        if members.size < 2:
            raise ClassTooSmallError(f"class {cls} has only {members.size} sample(s)")
        n_train = math.floor(members.size * fraction)
        if n_train < 1 or n_train >= members.size:
            raise ClassTooSmallError(
                f"class {cls} cannot be split at fraction {fraction}"
            )
        order = rng.permutation(members)
        train_idx.extend(sorted(int(i) for i in order[:n_train]))
        val_idx.extend(sorted(int(i) for i in order[n_train:]))
    return dataset.subset(sorted(train_idx)), dataset.subset(sorted(val_idx))


def oversample_minority(train: SpectrumDataset, seed: int = 0) -> SpectrumDataset:
    """Upsample every minority class with replacement to the majority count."""
    classes, counts = np.unique(train.labels, return_counts=True)
    target = int(counts.max())
    rng = np.random.default_rng(seed)
    extra: list[int] = []
    for cls, count in zip(classes, counts):
        if count == target:
            continue
        members = np.flatnonzero(train.labels == cls)
        extra.extend(int(members[i]) for i in rng.integers(0, members.size, target - count))
    if not extra:
        return train
    return train.subset(np.concatenate([np.arange(train.n_samples), np.array(extra)]))


def snr_db(nsr_percent: float) -> float | None:
    """Exact signal-to-noise ratio implied by a noise-to-signal percentage."""
    if nsr_percent == 0:
        return None
    return -20.0 * math.log10(nsr_percent / 100.0)


def add_noise(dataset: SpectrumDataset, nsr_percent: float, seed: int) -> SpectrumDataset:
    """Add white Gaussian noise rescaled to an exact per-row RMS target."""
    if nsr_percent < 0:
        raise ValueError("nsr_percent cannot be negative")
    if nsr_percent == 0:
        return dataset
    rng = np.random.default_rng(seed)
    noisy = {}
    for name, matrix in dataset.channels.items():
        out = matrix.copy()
        for i in range(matrix.shape[0]):
            signal_rms = math.sqrt(float((matrix[i] ** 2).mean()))
            noise = rng.standard_normal(matrix.shape[1])
            noise_rms = math.sqrt(float((noise**2).mean()))
            if signal_rms > 0.0 and noise_rms > 0.0:
                noise *= (nsr_percent / 100.0) * signal_rms / noise_rms
                out[i] = np.maximum(matrix[i] + noise, 0.0)
        noisy[name] = out
    return SpectrumDataset(
        frequencies=dataset.frequencies,
        channels=noisy,
        labels=dataset.labels,
        sample_ids=dataset.sample_ids,
    )


def bandwidth_split(dataset: SpectrumDataset, n_sections: int) -> list[SpectrumDataset]:
    """Cut the frequency axis into contiguous near-equal sections."""
    if n_sections < 1:
        raise ValueError("n_sections must be at least 1")
    n_f = dataset.n_frequencies
    if n_sections > n_f:
        raise TooManySectionsError(f"{n_sections} sections for {n_f} bins")
    base, extra = divmod(n_f, n_sections)
    sections = []
    start = 0
    for k in range(n_sections):
        size = base + (1 if k < extra else 0)
        sections.append(dataset.slice_bins(start, start + size))
        start += size
    return sections


def evaluate_accuracy(scores, labels) -> float:
    """Fraction of rows whose argmax matches the label; ties pick the lowest class."""
    values = scores.scores if isinstance(scores, ScoreMatrix) else np.asarray(scores)
    labels = np.asarray(labels)
    if values.shape[0] != labels.size:
        raise LengthMismatchError("scores and labels cover different sample counts")
    return float((np.argmax(values, axis=1) == labels).mean())


@dataclass
class PreparedSplit:
    """One repetition's split with selected, normalized learner features."""

    train: SpectrumDataset
    validation: SpectrumDataset
    frame: Frame
    features: dict[str, tuple[np.ndarray, np.ndarray]]
    selected_counts: dict[str, int]


@dataclass
class RepetitionResult:
    """Everything recorded from one end-to-end repetition."""

    repetition: int
    per_learner: dict[str, float]
    selected_counts: dict[str, int]
    ranking: RankingResult
    fused_accuracy: float


def prepare_repetition(dataset: SpectrumDataset, config: ExperimentConfig, rep: int) -> PreparedSplit:
    """Split, oversample, derive channels, normalize, and select frequencies."""
    train_ds, val_ds = split_train_validation(
        dataset, config.train_fraction, _sub_seed(config.seed, rep, _SEED_SPLIT)
    )
    train_ds = oversample_minority(train_ds, _sub_seed(config.seed, rep, _SEED_OVERSAMPLE))
    frame = Frame.generic(int(max(dataset.labels.max(), 1)) + 1)
    train_channels = generate_channels(train_ds.channels["x1"], train_ds.channels["x2"])
    val_channels = generate_channels(val_ds.channels["x1"], val_ds.channels["x2"])
    y_target = regression_target(train_ds.labels)
    features: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    selected_counts: dict[str, int] = {}
    train_parts: list[np.ndarray] = []
    val_parts: list[np.ndarray] = []
    for name in CHANNEL_NAMES:
        normalized, stats = normalize_minmax(train_channels[name])
        val_normalized, _ = normalize_minmax(val_channels[name], stats)
        cols = np.asarray(lars_lasso_path(normalized, y_target).final_active, dtype=int)
        selected_counts[name] = cols.size
        features[name] = (normalized[:, cols], val_normalized[:, cols])
        train_parts.append(features[name][0])
        val_parts.append(features[name][1])
    features["all"] = (np.hstack(train_parts), np.hstack(val_parts))
    selected_counts["all"] = features["all"][0].shape[1]
    return PreparedSplit(train_ds, val_ds, frame, features, selected_counts)


def train_models(prepared: PreparedSplit, config: ExperimentConfig, rep: int):
    """Fit one learner per feature set with per-learner derived seeds."""
    models = []
    for index, name in enumerate(LEARNER_NAMES):
        cfg = replace(config.learner, seed=_sub_seed(config.seed, rep, _SEED_LEARNER_BASE + index))
        model = train(prepared.features[name][0], prepared.train.labels, cfg)
        matrix = predict_scores(
            model,
            prepared.features[name][1],
            classifier_id=name,
            class_labels=prepared.frame.labels,
        )
        models.append((name, model, matrix))
    return models


def run_repetition(dataset: SpectrumDataset, config: ExperimentConfig, rep: int) -> RepetitionResult:
    """One split/oversample/select/train/rank/fuse pass with derived seeds."""
    prepared = prepare_repetition(dataset, config, rep)
    models = train_models(prepared, config, rep)
    matrices = [matrix for _, _, matrix in models]
    per_learner = {
        name: evaluate_accuracy(matrix, prepared.validation.labels)
        for name, _, matrix in models
    }
    ranking = select_ensemble(matrices, prepared.validation.labels, config.theta_grid, config.fusion)
    return RepetitionResult(
        repetition=rep,
        per_learner=per_learner,
        selected_counts=prepared.selected_counts,
        ranking=ranking,
        fused_accuracy=ranking.validation_accuracy,
    )


def _distribution(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {
        "mean": float(arr.mean()),
        "median": float(np.median(arr)),
        "std": float(arr.std()),
        "values": [float(v) for v in arr],
    }


@dataclass
class MetricsReport:
    """Aggregated experiment results in the shape the JSON report uses."""

    per_learner: dict
    fused: dict
    config_echo: dict
    failures: list
    noise_sweep: list | None = None
    bandwidth_sweep: list | None = None

    def to_dict(self) -> dict:
        return {
            "per_learner": self.per_learner,
            "fused": self.fused,
            "noise_sweep": self.noise_sweep,
            "bandwidth_sweep": self.bandwidth_sweep,
            "config_echo": self.config_echo,
            "failures": self.failures,
        }


def _safe_repetition(dataset, config, rep):
    try:
        return run_repetition(dataset, config, rep), None
    except Exception as err:  # noqa: BLE001 - repetition failures are aggregated
        return None, f"{type(err).__name__}: {err}"


def run_experiment(dataset: SpectrumDataset, config: ExperimentConfig, jobs: int = 1) -> MetricsReport:
    """Repeat the pipeline, aggregating per-learner and fused accuracies."""
    runner = Parallel(n_jobs=jobs) if jobs != 1 else None
    tasks = range(config.repetitions)
    if runner is None:
        outcomes = [_safe_repetition(dataset, config, rep) for rep in tasks]
    else:
        outcomes = runner(delayed(_safe_repetition)(dataset, config, rep) for rep in tasks)
    results = [r for r, _ in outcomes if r is not None]
    failures = [
        {"repetition": rep, "error": err}
        for rep, (_, err) in enumerate(outcomes)
        if err is not None
    ]
    per_learner = {
        name: _distribution([r.per_learner[name] for r in results]) if results else None
        for name in LEARNER_NAMES
    }
    fused = None
    if results:
        fused = _distribution([r.fused_accuracy for r in results])
        fused["selected_sizes"] = [r.ranking.selected_size for r in results]
        fused["selected_thetas"] = [r.ranking.selected_theta for r in results]
        fused["orders"] = [list(r.ranking.order) for r in results]
    return MetricsReport(
        per_learner=per_learner,
        fused=fused,
        config_echo=config.to_dict(),
        failures=failures,
    )


def run_noise_sweep(
    dataset: SpectrumDataset,
    config: ExperimentConfig,
    levels: Sequence[float] | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Re-run the experiment at each noise level with paired repetition seeds."""
    levels = list(config.nsr_levels if levels is None else levels)
    entries = []
    for index, level in enumerate(levels):
        noisy = add_noise(dataset, level, _sub_seed(config.seed, _SEED_NOISE, index))
        report = run_experiment(noisy, config, jobs=jobs)
        entries.append(
            {
                "nsr_percent": float(level),
                "snr_db": snr_db(level),
                "fused": report.fused,
                "per_learner_mean": {
                    name: (dist["mean"] if dist else None)
                    for name, dist in report.per_learner.items()
                },
                "failures": report.failures,
            }
        )
    return entries


def run_bandwidth_sweep(
    dataset: SpectrumDataset,
    config: ExperimentConfig,
    sections_list: Sequence[int] | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Re-run the experiment on each contiguous frequency section."""
    sections_list = list(config.bandwidth_sections if sections_list is None else sections_list)
    entries = []
    for n_sections in sections_list:
        parts = bandwidth_split(dataset, int(n_sections))
        rows = []
        for k, part in enumerate(parts):
            report = run_experiment(part, config, jobs=jobs)
            rows.append(
                {
                    "section_index": k,
                    "start_hz": float(part.frequencies[0]),
                    "stop_hz": float(part.frequencies[-1]),
                    "n_bins": part.n_frequencies,
                    "fused": report.fused,
                    "failures": report.failures,
                }
            )
        entries.append({"n_sections": int(n_sections), "sections": rows})
    return entries
