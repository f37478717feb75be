"""Dataset container plus LIBSVM/CSV ingestion and seeded splitting.

Features are stored dense: the corpora this package targets are small
(hundreds of rows) and the RBF kernel needs uniform-length vectors anyway.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, TextIO

import numpy as np

from .rng import STREAM_SPLIT, stream


class ParseError(ValueError):
    """Malformed dataset text; carries the 1-based line of the offence."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Sample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """Ordered samples with a uniform feature dimension."""

    features: np.ndarray  # (n_samples, dimension) float64
    labels: np.ndarray  # (n_samples,) int64

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] == 0 or feats.shape[1] == 0:
            raise ValueError("dataset needs at least one sample and one feature")
        if labs.shape != (feats.shape[0],):
            raise ValueError("labels must be one per sample")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unique(self.labels))

    def sample(self, i: int) -> Sample:
        return Sample(self.features[i], int(self.labels[i]))

    def __len__(self) -> int:
        return self.n_samples

    def __iter__(self) -> Iterator[Sample]:
        return (self.sample(i) for i in range(self.n_samples))

    def subset(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx].copy(), self.labels[idx].copy())

    def class_counts(self) -> dict[int, int]:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class BinaryView:
    """Two classes of a dataset with labels remapped to +1/-1."""

    x: np.ndarray
    y: np.ndarray  # entries in {+1, -1}
    positive_class: int
    negative_class: int

    def __post_init__(self):
        if self.positive_class == self.negative_class:
            raise ValueError("positive and negative class must differ")
        if not np.all(np.isin(self.y, (-1, 1))):
            raise ValueError("binary labels must be +1 or -1")

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]


def binary_view(ds: Dataset, positive_class: int, negative_class: int) -> BinaryView:
    """Extract the two named classes, preserving dataset order."""
    for c in (positive_class, negative_class):
        if c not in ds.classes:
            raise ValueError(f"class {c} not present in dataset")
    mask = (ds.labels == positive_class) | (ds.labels == negative_class)
    x = ds.features[mask].copy()
    y = np.where(ds.labels[mask] == positive_class, 1, -1).astype(np.int64)
    return BinaryView(x, y, positive_class, negative_class)


def _as_text_lines(text: str | TextIO) -> Iterator[tuple[int, str]]:
    handle = io.StringIO(text) if isinstance(text, str) else text
    for lineno, raw in enumerate(handle, start=1):
        line = raw.strip()
        if line:
            yield lineno, line


def parse_libsvm(text: str | TextIO) -> Dataset:
    """Parse `<label> <index>:<value> ...` lines into a Dataset.

    Feature indices are 1-based and must be strictly increasing per line;
    the dimension is the maximum index seen anywhere in the input, and
    absent indices are zero-filled.
    """
    rows: list[dict[int, float]] = []
    labels: list[int] = []
    max_index = 0
    for lineno, line in _as_text_lines(text):
        parts = line.split()
        labels.append(_parse_label(parts[0], lineno))
        entries: dict[int, float] = {}
        previous = 0
        for token in parts[1:]:
            idx_str, sep, val_str = token.partition(":")
            if not sep:
                raise ParseError(f"expected index:value, got {token!r}", lineno)
            try:
                index = int(idx_str)
                value = float(val_str)
            except ValueError:
                raise ParseError(f"non-numeric feature entry {token!r}", lineno) from None
            if index <= previous:
                raise ParseError(
                    f"feature index {index} not strictly increasing", lineno
                )
            if not np.isfinite(value):
                raise ParseError(f"non-finite feature value {val_str!r}", lineno)
            entries[index] = value
            previous = index
        max_index = max(max_index, previous)
        rows.append(entries)
    if not rows:
        raise ParseError("empty input")
    if max_index == 0:
        raise ParseError("no feature indices present in input")
    features = np.zeros((len(rows), max_index), dtype=np.float64)
    for i, entries in enumerate(rows):
        for index, value in entries.items():
            features[i, index - 1] = value
    return Dataset(features, np.asarray(labels, dtype=np.int64))


def _parse_label(token: str, lineno: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric label {token!r}", lineno) from None
    if not value.is_integer():
        raise ParseError(f"label {token!r} is not an integer", lineno)
    return int(value)


def parse_csv(
    text: str | TextIO, label_column: int = 0, skip_header: bool = False
) -> Dataset:
    """Parse rectangular numeric CSV; one column holds the integer label."""
    handle = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(handle)
    features: list[list[float]] = []
    labels: list[int] = []
    width: int | None = None
    for rowno, row in enumerate(reader, start=1):
        if skip_header and rowno == 1:
            continue
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if width is None:
            width = len(row)
            if width < 2:
                raise ParseError("rows need a label and at least one feature", rowno)
            if not (0 <= label_column < width):
                raise ParseError(
                    f"label column {label_column} outside row of width {width}", rowno
                )
        elif len(row) != width:
            raise ParseError(
                f"ragged row: expected {width} columns, got {len(row)}", rowno
            )
        labels.append(_parse_label(row[label_column].strip(), rowno))
        feat_row = []
        for col, cell in enumerate(row):
            if col == label_column:
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric cell {cell!r} in column {col}", rowno
                ) from None
            if not np.isfinite(value):
                raise ParseError(f"non-finite cell in column {col}", rowno)
            feat_row.append(value)
        features.append(feat_row)
    if not features:
        raise ParseError("empty input")
    return Dataset(np.asarray(features, dtype=np.float64), np.asarray(labels, dtype=np.int64))


def to_libsvm(ds: Dataset) -> str:
    """Serialize densely (zeros included) so parsing back is lossless."""
    lines = []
    for i in range(ds.n_samples):
        entries = " ".join(
            f"{j + 1}:{float(v)!r}" for j, v in enumerate(ds.features[i])
        )
        lines.append(f"{int(ds.labels[i])} {entries}")
    return "\n".join(lines) + "\n"


def split_train_test(ds: Dataset, train_count: int, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then first `train_count` samples become the train set."""
    if not (0 < train_count < ds.n_samples):
        raise ValueError(
            f"train_count must be in (0, {ds.n_samples}), got {train_count}"
        )
    order = stream(seed, STREAM_SPLIT).permutation(ds.n_samples)
    return ds.subset(order[:train_count]), ds.subset(order[train_count:])
