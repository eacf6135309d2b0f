"""Labeled univariate time-series datasets in the UCR train/test layout."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence as Seq

import numpy as np


class DataError(ValueError):
    """Raised when a data file or a sequence fails validation."""


@dataclass(frozen=True, eq=False)
class Sequence:
    """A univariate, finite, real-valued series of length >= 2."""

    values: np.ndarray
    id: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size < 2:
            raise DataError(f"sequence {self.id!r} has length {values.size} < 2")
        if not np.all(np.isfinite(values)):
            raise DataError(f"sequence {self.id!r} contains NaN or Inf")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class LabeledSequence:
    sequence: Sequence
    label: int

    @property
    def id(self):
        return self.sequence.id

    @property
    def values(self):
        return self.sequence.values


@dataclass(frozen=True, eq=False)
class Dataset:
    """Train and test splits with contiguous integer labels ``0..C-1``.

    ``label_names[c]`` holds the raw label (as written in the source file)
    that was mapped to class ``c``.
    """

    train: tuple
    test: tuple = ()
    name: str = ""
    label_names: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        if not self.train:
            raise DataError(f"dataset {self.name!r} has an empty training split")
        train_labels = {s.label for s in self.train}
        unseen = {s.label for s in self.test} - train_labels
        if unseen:
            raise DataError(
                f"dataset {self.name!r}: test labels {sorted(unseen)} absent from train"
            )
        if not self.label_names:
            names = sorted(train_labels | {s.label for s in self.test})
            object.__setattr__(self, "label_names", tuple(str(n) for n in names))

    @property
    def n_classes(self):
        return len(self.label_names)

    def train_labels(self):
        return np.array([s.label for s in self.train], dtype=int)

    def test_labels(self):
        return np.array([s.label for s in self.test], dtype=int)

    def to_json(self):
        """Serialize as ``{name, labels[], series[][]}`` (plus split sizes)."""
        records = list(self.train) + list(self.test)
        return json.dumps(
            {
                "name": self.name,
                "label_names": list(self.label_names),
                "n_train": len(self.train),
                "ids": [s.id for s in records],
                "labels": [int(s.label) for s in records],
                "series": [s.values.tolist() for s in records],
            }
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        records = [
            LabeledSequence(Sequence(values, id=sid), int(label))
            for sid, label, values in zip(obj["ids"], obj["labels"], obj["series"])
        ]
        n_train = obj.get("n_train", len(records))
        return cls(
            train=records[:n_train],
            test=records[n_train:],
            name=obj.get("name", ""),
            label_names=tuple(obj.get("label_names", ())),
        )


_SEPARATORS = (",", "\t", None)


def _split(line, sep):
    if sep is None:
        return line.split()
    return [f.strip() for f in line.split(sep)]


def _numeric_count(fields):
    n = 0
    for f in fields:
        try:
            float(f)
        except ValueError:
            return 0
        n += 1
    return n


def detect_separator(first_line):
    """Return the first of comma, tab, whitespace giving >= 2 numeric fields."""
    for sep in _SEPARATORS:
        if _numeric_count(_split(first_line, sep)) >= 2:
            return sep
    raise DataError(f"cannot detect a field separator in line {first_line!r}")


def _raw_label(text):
    value = float(text)
    if value.is_integer():
        return int(value)
    return value


def read_ucr_file(path):
    """Parse one UCR text file into ``(raw_labels, value_arrays)``."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: file is empty")
    sep = detect_separator(lines[0])
    labels, series = [], []
    for lineno, line in enumerate(lines, start=1):
        fields = [f for f in _split(line.strip(), sep) if f != ""]
        try:
            numbers = [float(f) for f in fields]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric field ({exc})") from None
        if len(numbers) < 3:
            raise DataError(f"{path}:{lineno}: sequence length {len(numbers) - 1} < 2")
        if not math.isfinite(numbers[0]):
            raise DataError(f"{path}:{lineno}: label is not finite")
        values = np.array(numbers[1:])
        if not np.all(np.isfinite(values)):
            raise DataError(f"{path}:{lineno}: NaN or Inf sample")
        labels.append(_raw_label(fields[0]))
        series.append(values)
    return labels, series


def load_ucr_split(train_path, test_path=None, name=None, normalize=False):
    """Load a UCR train/test pair.

    Labels are remapped to ``0..C-1`` in sorted order of the raw training
    labels. With ``normalize=True`` every sequence is z-normalized
    independently (constant sequences are only centered).
    """
    train_path = Path(train_path)
    if name is None:
        name = re.sub(r"_TRAIN$", "", train_path.stem, flags=re.IGNORECASE)
    raw_train, train_values = read_ucr_file(train_path)
    raw_test, test_values = ([], []) if test_path is None else read_ucr_file(test_path)

    classes = sorted(set(raw_train))
    unseen = set(raw_test) - set(classes)
    if unseen:
        raise DataError(f"{test_path}: labels {sorted(unseen)} do not occur in {train_path}")
    mapping = {raw: c for c, raw in enumerate(classes)}

    def build(raws, values, prefix):
        out = []
        for idx, (raw, vals) in enumerate(zip(raws, values)):
            if normalize:
                vals = znormalize(vals)
            out.append(LabeledSequence(Sequence(vals, id=f"{prefix}{idx}"), mapping[raw]))
        return out

    return Dataset(
        train=build(raw_train, train_values, "train_"),
        test=build(raw_test, test_values, "test_"),
        name=name,
        label_names=tuple(str(c) for c in classes),
    )


def znormalize(values):
    values = np.asarray(values, dtype=float)
    std = values.std()
    if std < 1e-12:
        return values - values.mean()
    return (values - values.mean()) / std


def write_ucr_file(path, records: Seq[LabeledSequence], label_names=None, sep="\t"):
    """Write records in UCR text layout, one ``label<sep>values`` line each."""
    with open(path, "w") as fh:
        for rec in records:
            label = rec.label if label_names is None else label_names[rec.label]
            fields = [str(label)] + [repr(float(v)) for v in rec.values]
            fh.write(sep.join(fields) + "\n")


def class_counts(d: Dataset):
    """Number of training sequences per label."""
    return dict(sorted(Counter(int(s.label) for s in d.train).items()))


def dataset_from_arrays(train_values, train_labels, test_values=(), test_labels=(), name=""):
    """Build a Dataset from in-memory arrays; labels must already be 0..C-1."""
    train = [
        LabeledSequence(Sequence(v, id=f"train_{i}"), int(y))
        for i, (v, y) in enumerate(zip(train_values, train_labels))
    ]
    test = [
        LabeledSequence(Sequence(v, id=f"test_{i}"), int(y))
        for i, (v, y) in enumerate(zip(test_values, test_labels))
    ]
    return Dataset(train=train, test=test, name=name)
