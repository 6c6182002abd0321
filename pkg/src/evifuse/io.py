"""File formats: score CSVs, dataset CSVs, JSON reports, atomic writes."""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .evidence import Frame
from .exceptions import ClassMismatchError, ParseError, RowSumExceedsOneError
from .fusion import ScoreMatrix
from .features import SpectrumDataset

FREQ_SIDECAR = "# frequencies_hz:"


@contextmanager
def atomic_write(path):
    """Write to a sibling temp file and rename into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_score_csv(path, matrix: ScoreMatrix, sample_ids=None):
    if sample_ids is None:
        sample_ids = [str(i) for i in range(matrix.n_samples)]
    if len(sample_ids) != matrix.n_samples:
        raise ValueError("need one sample id per score row")
    with atomic_write(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(["sample_id", *matrix.class_labels])
        for sid, row in zip(sample_ids, matrix.scores):
            writer.writerow([sid, *[repr(float(v)) for v in row]])


def read_score_csv(path, frame: Frame | None = None, with_ids: bool = False):
    """Parse a score CSV, validating the header against a frame if given."""
    path = Path(path)
    text = path.read_text()
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise ParseError("empty score file", line=1)
    header = rows[0]
    if len(header) < 2 or header[0] != "sample_id":
        raise ParseError("header must start with sample_id", line=1)
    labels = tuple(header[1:])
    if frame is not None and labels != frame.labels:
        raise ClassMismatchError(
            f"score columns {labels} do not match frame labels {frame.labels}"
        )
    ids = []
    scores = []
    for offset, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(labels) + 1:
            raise ParseError(
                f"expected {len(labels) + 1} fields, found {len(row)}", line=offset
            )
        ids.append(row[0])
        try:
            scores.append([float(v) for v in row[1:]])
        except ValueError as err:
            raise ParseError(str(err), line=offset) from err
    if not scores:
        raise ParseError("score file has no data rows", line=len(rows))
    try:
        matrix = ScoreMatrix(path.stem, np.array(scores), labels)
    except RowSumExceedsOneError:
        raise
    except ValueError as err:
        raise ParseError(str(err)) from err
    if with_ids:
        return matrix, ids
    return matrix


def write_dataset_csv(path, dataset: SpectrumDataset):
    n_f = dataset.n_frequencies
    with atomic_write(path) as handle:
        handle.write(FREQ_SIDECAR + " " + ",".join(repr(float(f)) for f in dataset.frequencies) + "\n")
        writer = csv.writer(handle)
        writer.writerow(["sample_id", "label", "ch", *[f"f_{j}" for j in range(n_f)]])
        for i in range(dataset.n_samples):
            for name, matrix in dataset.channels.items():
                writer.writerow(
                    [
                        dataset.sample_ids[i],
                        int(dataset.labels[i]),
                        name,
                        *[repr(float(v)) for v in matrix[i]],
                    ]
                )


def read_dataset_csv(path) -> SpectrumDataset:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(FREQ_SIDECAR):
        raise ParseError(f"first line must start with {FREQ_SIDECAR!r}", line=1)
    try:
        frequencies = np.array([float(v) for v in lines[0][len(FREQ_SIDECAR):].split(",")])
    except ValueError as err:
        raise ParseError(f"bad frequency axis: {err}", line=1) from err
    if len(lines) < 3:
        raise ParseError("dataset file has no data rows", line=len(lines))
    rows = list(csv.reader(_io.StringIO("\n".join(lines[1:]))))
    header = rows[0]
    expected = ["sample_id", "label", "ch", *[f"f_{j}" for j in range(frequencies.size)]]
    if header != expected:
        raise ParseError("dataset header does not match the frequency axis", line=2)

    channel_order: list[str] = []
    samples: list[dict] = []
    current: dict | None = None
    for offset, row in enumerate(rows[1:], start=3):
        if not row:
            continue
        if len(row) != len(expected):
            raise ParseError(f"expected {len(expected)} fields, found {len(row)}", line=offset)
        sid, label, ch = row[0], row[1], row[2]
        try:
            label = int(label)
            values = np.array([float(v) for v in row[3:]])
        except ValueError as err:
            raise ParseError(str(err), line=offset) from err
        if current is None or ch in current["channels"]:
            current = {"id": sid, "label": label, "channels": {}}
            samples.append(current)
        if sid != current["id"] or label != current["label"]:
            raise ParseError("channel rows of one sample must agree on id and label", line=offset)
        current["channels"][ch] = values
        if ch not in channel_order:
            if len(samples) > 1:
                raise ParseError(f"unexpected channel {ch!r}", line=offset)
            channel_order.append(ch)
    if not samples:
        raise ParseError("dataset file has no data rows", line=len(lines))
    for sample in samples:
        if set(sample["channels"]) != set(channel_order):
            raise ParseError(f"sample {sample['id']!r} is missing channels", line=3)
    return SpectrumDataset(
        frequencies=frequencies,
        channels={
            name: np.stack([s["channels"][name] for s in samples]) for name in channel_order
        },
        labels=np.array([s["label"] for s in samples]),
        sample_ids=tuple(s["id"] for s in samples),
    )


def write_json(path, payload):
    with atomic_write(path) as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ParseError(str(err), line=err.lineno) from err


def write_selection_csv(path, selection):
    """One row per (channel, selected bin) with its final path coefficient."""
    with atomic_write(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(["channel", "frequency_index", "frequency_hz", "coefficient"])
        for name, indices in selection.per_channel.items():
            for j in indices:
                writer.writerow(
                    [
                        name,
                        j,
                        repr(float(selection.frequencies[j])),
                        repr(selection.coefficients[name][j]),
                    ]
                )
        for j in selection.union:
            writer.writerow(["union", j, repr(float(selection.frequencies[j])), ""])


def write_accuracy_csv(path, per_learner: dict, fused_values):
    """Long-form accuracies: one row per (repetition, learner)."""
    with atomic_write(path) as handle:
        writer = csv.writer(handle)
        writer.writerow(["repetition", "learner", "accuracy"])
        for name, values in per_learner.items():
            for rep, value in enumerate(values):
                writer.writerow([rep, name, repr(float(value))])
        for rep, value in enumerate(fused_values):
            writer.writerow([rep, "fused", repr(float(value))])
