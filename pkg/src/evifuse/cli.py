"""Command-line frontend: each pipeline stage as a composable subcommand."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .evidence import Frame
from .exceptions import (
    ClassMismatchError,
    ClassTooSmallError,
    EvifuseError,
    FrameMismatchError,
    InvalidCountsError,
    LengthMismatchError,
    ParseError,
    RowSumExceedsOneError,
    TooManySectionsError,
)
from .features import select_frequencies
from .fusion import BoeGenConfig, FusionConfig, fuse_batch
from .infotheory import select_ensemble
from .io import (
    atomic_write,
    read_dataset_csv,
    read_json,
    read_score_csv,
    write_accuracy_csv,
    write_dataset_csv,
    write_json,
    write_score_csv,
    write_selection_csv,
)
from .learners import save_model
from .pipeline import (
    CHANNEL_NAMES,
    ExperimentConfig,
    evaluate_accuracy,
    prepare_repetition,
    run_bandwidth_sweep,
    run_experiment,
    run_noise_sweep,
    synthesize_frf_dataset,
    train_models,
)

SEED_ENV = "EVIFUSE_SEED"

_USAGE_ERRORS = (ValueError, InvalidCountsError, ClassTooSmallError, TooManySectionsError)
_FILE_ERRORS = (
    OSError,
    ParseError,
    ClassMismatchError,
    RowSumExceedsOneError,
    FrameMismatchError,
    LengthMismatchError,
)


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_config(path: str | None) -> tuple[ExperimentConfig, str | None]:
    """Read a CLI config JSON: experiment settings plus an optional dataset path."""
    payload = {}
    if path is not None:
        payload = read_json(path)
        if not isinstance(payload, dict):
            raise ParseError("config must be a JSON object")
    dataset = payload.pop("dataset", None)
    config = ExperimentConfig.from_dict(payload)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        from dataclasses import replace

        config = replace(config, seed=int(env_seed))
    return config, dataset


def cmd_synth(args) -> int:
    dataset = synthesize_frf_dataset(
        args.healthy,
        args.defected,
        args.nf,
        args.seed,
        n_modes=args.modes,
        freq_range=(args.freq_lo, args.freq_hi),
        defect_band=(
            (args.defect_lo, args.defect_hi)
            if args.defect_lo is not None and args.defect_hi is not None
            else None
        ),
    )
    write_dataset_csv(args.output, dataset)
    rows = dataset.n_samples * len(dataset.channels)
    print(
        f"wrote {args.output}: {rows} rows "
        f"({dataset.n_samples} samples x {len(dataset.channels)} channels, "
        f"{dataset.n_frequencies} frequency bins)"
    )
    return 0


def cmd_select(args) -> int:
    dataset = read_dataset_csv(args.dataset)
    selection = select_frequencies(dataset)
    write_selection_csv(args.output, selection)
    for name in CHANNEL_NAMES:
        print(f"{name}: {len(selection.per_channel[name])} selected")
    print(f"union: {len(selection.union)} unique frequency lines")
    print(f"wrote {args.output}")
    return 0


def cmd_train(args) -> int:
    config, _ = _load_config(args.config)
    dataset = read_dataset_csv(args.dataset)
    out = Path(args.output)
    prepared = prepare_repetition(dataset, config, rep=0)
    models = train_models(prepared, config, rep=0)
    (out / "models").mkdir(parents=True, exist_ok=True)
    (out / "scores").mkdir(parents=True, exist_ok=True)
    for name, model, matrix in models:
        save_model(model, out / "models" / f"{name}.json")
        write_score_csv(out / "scores" / f"{name}.csv", matrix, prepared.validation.sample_ids)
        accuracy = evaluate_accuracy(matrix, prepared.validation.labels)
        print(f"{name}: validation accuracy {accuracy:.4f}")
    with atomic_write(out / "labels.csv") as handle:
        handle.write("sample_id,label\n")
        for sid, label in zip(prepared.validation.sample_ids, prepared.validation.labels):
            handle.write(f"{sid},{int(label)}\n")
    print(f"wrote models, validation scores, and labels under {out}")
    return 0


def _read_labels_csv(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "sample_id,label":
        raise ParseError("labels header must be sample_id,label", line=1)
    labels = []
    for offset, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError("expected sample_id,label", line=offset)
        try:
            labels.append(int(parts[1]))
        except ValueError as err:
            raise ParseError(str(err), line=offset) from err
    if not labels:
        raise ParseError("labels file has no data rows", line=len(lines))
    return np.array(labels)


def _load_score_files(paths, frame: Frame | None = None):
    matrices = []
    for path in paths:
        try:
            matrix = read_score_csv(path, frame)
        except (ParseError, ClassMismatchError, RowSumExceedsOneError) as err:
            raise ParseError(f"{path}: {err}") from err
        if matrices and (
            matrix.class_labels != matrices[0].class_labels
            or matrix.n_samples != matrices[0].n_samples
        ):
            raise FrameMismatchError(
                f"{path} does not match the shape or classes of {paths[0]}"
            )
        matrices.append(matrix)
    return matrices


def cmd_rank(args) -> int:
    labels = _read_labels_csv(args.labels)
    matrices = _load_score_files(args.scores)
    if matrices[0].n_samples != labels.size:
        raise LengthMismatchError("scores and labels cover different sample counts")
    theta_grid = args.theta_grid if args.theta_grid else ExperimentConfig().theta_grid
    result = select_ensemble(matrices, labels, theta_grid, FusionConfig(theta=0.5, sigma=args.sigma))
    write_json(args.output, result.to_dict())
    names = [matrices[i].classifier_id for i in result.order]
    print("ranked order:", ", ".join(names))
    print(
        f"selected size {result.selected_size} at theta {result.selected_theta} "
        f"(validation accuracy {result.validation_accuracy:.4f})"
    )
    print(f"wrote {args.output}")
    return 0


_ERROR_FLAGS = {
    "InvalidWeightsError": "invalid_weights",
    "TotalConflictError": "total_conflict",
    "DegenerateChiefError": "degenerate_chief",
}


def cmd_fuse(args) -> int:
    matrices = _load_score_files(args.scores)
    _, ids = read_score_csv(args.scores[0], with_ids=True)
    config = FusionConfig(theta=args.theta, sigma=args.sigma)
    result = fuse_batch(matrices, config, BoeGenConfig())
    write_score_csv(args.output, result.scores, ids)
    flagged = {row: _ERROR_FLAGS[type(err).__name__] for row, err in result.errors}
    if args.trace:
        entries = []
        for row, trace in enumerate(result.traces):
            if trace is None:
                entries.append({"row": row, "error": flagged[row]})
            else:
                entries.append({"row": row, **trace.to_dict()})
        write_json(args.trace, entries)
        print(f"wrote traces to {args.trace}")
    for row, flag in sorted(flagged.items()):
        print(f"row {row}: {flag}")
    print(
        f"fused {result.scores.n_samples} rows from {len(matrices)} classifiers "
        f"({len(flagged)} flagged); wrote {args.output}"
    )
    return 0


def _finish_report(args, report, config, dataset_path) -> int:
    echo = dict(report.config_echo)
    echo["dataset"] = str(dataset_path)
    report.config_echo = echo
    write_json(args.output, report.to_dict())
    print(f"wrote {args.output}")
    if report.failures and len(report.failures) == config.repetitions:
        return _fail("every repetition failed", 4)
    return 0


def cmd_run(args) -> int:
    config, dataset_path = _load_config(args.config)
    if args.dataset is not None:
        dataset_path = args.dataset
    if dataset_path is None:
        return _fail("no dataset given (config key 'dataset' or --dataset)", 2)
    dataset = read_dataset_csv(dataset_path)
    report = run_experiment(dataset, config, jobs=args.jobs)
    if args.nsr is not None:
        report.noise_sweep = run_noise_sweep(dataset, config, levels=args.nsr, jobs=args.jobs)
    if args.bands is not None:
        report.bandwidth_sweep = run_bandwidth_sweep(dataset, config, sections_list=args.bands, jobs=args.jobs)
    if args.plot_csv and report.fused is not None:
        per_learner = {
            name: dist["values"] for name, dist in report.per_learner.items() if dist
        }
        write_accuracy_csv(args.plot_csv, per_learner, report.fused["values"])
        print(f"wrote {args.plot_csv}")
    if report.fused is not None:
        best = max(
            (dist["mean"], name)
            for name, dist in report.per_learner.items()
            if dist is not None
        )
        print(
            f"fused mean accuracy {report.fused['mean']:.4f} over "
            f"{config.repetitions} repetitions (best single: {best[1]} at {best[0]:.4f})"
        )
    return _finish_report(args, report, config, dataset_path)


def cmd_noise_sweep(args) -> int:
    config, dataset_path = _load_config(args.config)
    if args.dataset is not None:
        dataset_path = args.dataset
    if dataset_path is None:
        return _fail("no dataset given (config key 'dataset' or --dataset)", 2)
    dataset = read_dataset_csv(dataset_path)
    entries = run_noise_sweep(dataset, config, levels=args.levels, jobs=args.jobs)
    payload = {
        "per_learner": None,
        "fused": None,
        "noise_sweep": entries,
        "bandwidth_sweep": None,
        "config_echo": {**config.to_dict(), "dataset": str(dataset_path)},
        "failures": [],
    }
    write_json(args.output, payload)
    for entry in entries:
        snr = "inf" if entry["snr_db"] is None else f"{entry['snr_db']:.4f}"
        mean = entry["fused"]["mean"] if entry["fused"] else float("nan")
        print(f"nsr {entry['nsr_percent']:g}% (snr {snr} dB): fused mean {mean:.4f}")
    print(f"wrote {args.output}")
    return 0


def cmd_band_sweep(args) -> int:
    config, dataset_path = _load_config(args.config)
    if args.dataset is not None:
        dataset_path = args.dataset
    if dataset_path is None:
        return _fail("no dataset given (config key 'dataset' or --dataset)", 2)
    dataset = read_dataset_csv(dataset_path)
    sections = args.sections if args.sections is not None else None
    entries = run_bandwidth_sweep(dataset, config, sections_list=sections, jobs=args.jobs)
    payload = {
        "per_learner": None,
        "fused": None,
        "noise_sweep": None,
        "bandwidth_sweep": entries,
        "config_echo": {**config.to_dict(), "dataset": str(dataset_path)},
        "failures": [],
    }
    write_json(args.output, payload)
    for entry in entries:
        means = [
            f"{row['fused']['mean']:.3f}" if row["fused"] else "nan"
            for row in entry["sections"]
        ]
        print(f"{entry['n_sections']} section(s): fused means {', '.join(means)}")
    print(f"wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evifuse",
        description="Evidence-theoretic fusion of spectrum classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a two-channel spectrum dataset")
    p.add_argument("--healthy", type=int, required=True)
    p.add_argument("--defected", type=int, required=True)
    p.add_argument("--nf", type=int, required=True, help="number of frequency bins")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modes", type=int, default=None)
    p.add_argument("--freq-lo", type=float, default=3000.0)
    p.add_argument("--freq-hi", type=float, default=38000.0)
    p.add_argument("--defect-lo", type=float, default=None)
    p.add_argument("--defect-hi", type=float, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("select", help="run the lasso-path frequency selection")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train", help="train the per-channel learners on one split")
    p.add_argument("dataset")
    p.add_argument("--config", default=None)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="rank score files and pick size and theta")
    p.add_argument("scores", nargs="+", help="score CSV files, one per classifier")
    p.add_argument("--labels", required=True, help="validation labels CSV")
    p.add_argument("--theta-grid", type=float, nargs="+", default=None)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("fuse", help="fuse aligned score files row by row")
    p.add_argument("scores", nargs="+", help="score CSV files, one per classifier")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--trace", default=None, help="write per-row trace JSON here")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("run", help="run the repeated experiment from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", default=None, help="override the config dataset path")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--nsr", type=float, nargs="+", default=None, help="add a noise sweep")
    p.add_argument("--bands", type=int, nargs="+", default=None, help="add a bandwidth sweep")
    p.add_argument("--plot-csv", default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("noise-sweep", help="fused accuracy across noise levels")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--levels", type=float, nargs="+", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("band-sweep", help="fused accuracy across frequency sections")
    p.add_argument("--config", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--sections", type=int, nargs="+", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_band_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _FILE_ERRORS as err:
        return _fail(str(err), 3)
    except _USAGE_ERRORS as err:
        return _fail(str(err), 2)
    except EvifuseError as err:
        return _fail(str(err), 3)


if __name__ == "__main__":
    sys.exit(main())
