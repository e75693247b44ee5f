"""ARAS sensor-log ingestion, windowed features, synthetic data and partitioning.

An ARAS day file holds one line per second with 22 whitespace-separated
integers: 20 binary sensor readings followed by the activity label (1..27)
of resident 1 and of resident 2.
"""
from __future__ import annotations

import csv
import glob as _glob
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import ContractViolation, ParseError, ShortageError

NUM_SENSORS = 20
NUM_ACTIVITIES = 27
ARAS_COLUMNS = NUM_SENSORS + 2


@dataclass
class SensorLog:
    rows: np.ndarray
    house_id: str = "A"
    day_index: int = 0

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).reshape(-1, ARAS_COLUMNS)

    def __len__(self):
        return self.rows.shape[0]

    @property
    def sensors(self) -> np.ndarray:
        return self.rows[:, :NUM_SENSORS]

    def activities(self, resident: int) -> np.ndarray:
        if resident not in (1, 2):
            raise ContractViolation(f"resident must be 1 or 2, got {resident}")
        return self.rows[:, NUM_SENSORS + resident - 1]

    def __eq__(self, other):
        if not isinstance(other, SensorLog):
            return NotImplemented
        return (self.house_id == other.house_id and self.day_index == other.day_index
                and np.array_equal(self.rows, other.rows))


@dataclass
class LabeledDataset:
    """Feature rows with 0-based class labels.

    ``row_ids`` identifies each row in the pool it was carved from, so
    disjointness between partitions can be checked after the fact.
    """

    features: np.ndarray
    labels: np.ndarray
    num_classes: int = NUM_ACTIVITIES
    row_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.ndim == 1:
            self.features = self.features.reshape(len(self.labels), -1)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ContractViolation("features and labels disagree on row count")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ContractViolation(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(self.features)):
            raise ContractViolation("features contain NaN or Inf")
        if self.row_ids is None:
            self.row_ids = np.arange(len(self.labels), dtype=np.int64)
        else:
            self.row_ids = np.asarray(self.row_ids, dtype=np.int64).reshape(-1)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    @property
    def class_histogram(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, index) -> "LabeledDataset":
        index = np.asarray(index, dtype=np.int64)
        return LabeledDataset(self.features[index], self.labels[index],
                              self.num_classes, self.row_ids[index])

    @classmethod
    def concatenate(cls, parts: list["LabeledDataset"], num_classes: int | None = None):
        if not parts:
            return cls(np.empty((0, NUM_SENSORS)), np.empty(0, dtype=np.int64),
                       num_classes or NUM_ACTIVITIES)
        feats = np.vstack([p.features for p in parts])
        labels = np.concatenate([p.labels for p in parts])
        return cls(feats, labels, num_classes or parts[0].num_classes)


@dataclass
class PartitionPlan:
    num_participants: int
    classes_per_participant: list
    rows_per_participant: list
    seed: int = 0

    def __post_init__(self):
        self.classes_per_participant = [sorted(int(c) for c in s)
                                        for s in self.classes_per_participant]
        self.rows_per_participant = [int(r) for r in self.rows_per_participant]
        n = self.num_participants
        if n < 1:
            raise ContractViolation(f"num_participants must be >= 1, got {n}")
        if len(self.classes_per_participant) != n or len(self.rows_per_participant) != n:
            raise ContractViolation("plan lists must have one entry per participant")
        for i, s in enumerate(self.classes_per_participant):
            if not s:
                raise ContractViolation(f"participant {i} has an empty class subset")
        if any(r < 1 for r in self.rows_per_participant):
            raise ContractViolation("rows_per_participant entries must be positive")

    def to_dict(self) -> dict:
        return {
            "num_participants": self.num_participants,
            "classes_per_participant": self.classes_per_participant,
            "rows_per_participant": self.rows_per_participant,
            "seed": self.seed,
        }


# --------------------------------------------------------------------- ARAS I/O

def _day_from_name(path: Path) -> int:
    m = re.search(r"(\d+)", path.stem)
    return int(m.group(1)) if m else 0


def parse_aras(path, house_id: str | None = None, day_index: int | None = None) -> SensorLog:
    path = Path(path)
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != ARAS_COLUMNS:
                raise ParseError(f"expected {ARAS_COLUMNS} columns, found {len(tokens)}",
                                 lineno, path)
            try:
                values = [int(t) for t in tokens]
            except ValueError:
                bad = next(t for t in tokens if not re.fullmatch(r"[+-]?\d+", t))
                raise ParseError(f"non-integer token {bad!r}", lineno, path) from None
            for col, v in enumerate(values[:NUM_SENSORS]):
                if v not in (0, 1):
                    raise ParseError(f"sensor {col} value {v} not in {{0,1}}", lineno, path)
            for r, v in enumerate(values[NUM_SENSORS:], start=1):
                if not 1 <= v <= NUM_ACTIVITIES:
                    raise ParseError(
                        f"resident {r} label {v} out of range [1,{NUM_ACTIVITIES}]", lineno, path)
            rows.append(values)
    if house_id is None:
        m = re.fullmatch(r"house[ _-]?([A-Za-z0-9]+)", path.parent.name, flags=re.I)
        house_id = m.group(1) if m else "A"
    if day_index is None:
        day_index = _day_from_name(path)
    return SensorLog(np.array(rows, dtype=np.int64).reshape(-1, ARAS_COLUMNS), house_id, day_index)


def write_aras(log: SensorLog, path) -> None:
    with open(path, "w") as fh:
        for row in log.rows:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def parse_aras_glob(pattern: str) -> list[SensorLog]:
    """Parse every file matching ``pattern``; result ordered by (house, day)."""
    paths = sorted(_glob.glob(pattern))
    if not paths:
        raise FileNotFoundError(f"no ARAS files match {pattern!r}")
    logs = [parse_aras(p) for p in paths]
    return sorted(logs, key=lambda log: (log.house_id, log.day_index))


# ------------------------------------------------------------------- features

def windowize(log: SensorLog, window_seconds: int = 60, resident: int = 1) -> LabeledDataset:
    """Non-overlapping windows of sensor means, labelled by majority activity.

    Ties go to the smallest activity; a trailing partial window is dropped.
    """
    if window_seconds < 1:
        raise ContractViolation(f"window_seconds must be >= 1, got {window_seconds}")
    acts = log.activities(resident)
    n_win = len(log) // window_seconds
    used = n_win * window_seconds
    sensors = log.sensors[:used].astype(np.float64).reshape(n_win, window_seconds, NUM_SENSORS)
    features = sensors.mean(axis=1)
    windows = acts[:used].reshape(n_win, window_seconds) - 1
    labels = np.array([np.bincount(w, minlength=NUM_ACTIVITIES).argmax() for w in windows],
                      dtype=np.int64)
    return LabeledDataset(features, labels, NUM_ACTIVITIES)


def save_csv(data: LabeledDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{j}" for j in range(data.input_dim)] + ["label"])
        for x, y in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def load_csv(path, num_classes: int = NUM_ACTIVITIES) -> LabeledDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    dim = len(header) - 1
    if not rows:
        return LabeledDataset(np.empty((0, dim)), np.empty(0, dtype=np.int64), num_classes)
    arr = np.array(rows, dtype=np.float64)
    return LabeledDataset(arr[:, :dim], arr[:, dim].astype(np.int64), num_classes)


# ------------------------------------------------------------------ synthetic

def synth_generate(num_classes: int, rows_per_class: int, input_dim: int,
                   separation: float, seed: int, noise: float = 1.0) -> LabeledDataset:
    """Isotropic Gaussian blobs whose means are pairwise at least ``separation`` apart."""
    if min(num_classes, rows_per_class, input_dim) < 1:
        raise ContractViolation("counts must be >= 1")
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((num_classes, input_dim))
    if num_classes > 1:
        diffs = means[:, None, :] - means[None, :, :]
        dist = np.sqrt((diffs ** 2).sum(-1))
        min_dist = dist[np.triu_indices(num_classes, 1)].min()
        means *= separation / min_dist
    labels = np.repeat(np.arange(num_classes), rows_per_class)
    features = means[labels] + noise * rng.standard_normal((len(labels), input_dim))
    data = LabeledDataset(features, labels, num_classes)
    data.class_means = means
    return data


# --------------------------------------------------------------- partitioning

def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    if weights.sum() == 0:
        weights = np.ones_like(weights)
    exact = weights / weights.sum() * total
    counts = np.floor(exact).astype(np.int64)
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[: total - counts.sum()]] += 1
    return counts


def partition(data: LabeledDataset, plan: PartitionPlan) -> list[LabeledDataset]:
    """Carve disjoint per-participant datasets following ``plan``.

    Each participant's rows are split across its classes in proportion to
    the source class counts and drawn without replacement.  Participants are
    served in plan order.
    """
    hist = data.class_histogram
    available = {c: list(np.flatnonzero(data.labels == c)) for c in range(data.num_classes)}
    parts = []
    for i, (classes, n_rows) in enumerate(zip(plan.classes_per_participant,
                                              plan.rows_per_participant)):
        bad = [c for c in classes if not 0 <= c < data.num_classes]
        if bad:
            raise ContractViolation(f"participant {i}: classes {bad} outside label range")
        quotas = _largest_remainder(hist[classes].astype(np.float64), n_rows)
        deficits = {c: int(q - len(available[c]))
                    for c, q in zip(classes, quotas) if q > len(available[c])}
        if deficits:
            raise ShortageError(deficits, participant=i)
        rng = np.random.default_rng([plan.seed, i])
        chosen = []
        for c, q in zip(classes, quotas):
            pool = available[c]
            picks = set(rng.choice(len(pool), size=int(q), replace=False).tolist())
            chosen.extend(pool[j] for j in sorted(picks))
            available[c] = [r for j, r in enumerate(pool) if j not in picks]
        parts.append(data.subset(np.sort(np.asarray(chosen, dtype=np.int64))))
    return parts


def unbalanced_plan(num_participants: int, num_classes: int, rows_per_participant: int,
                    seed: int = 0) -> PartitionPlan:
    """Class-skewed plan: participant 0 sees every class, the last one a single class.

    Class counts for the participants in between are interpolated linearly.
    """
    n = num_participants
    rng = np.random.default_rng(seed)
    subsets = []
    for i in range(n):
        m = num_classes if n == 1 else int(round(num_classes - (num_classes - 1) * i / (n - 1)))
        subsets.append(sorted(rng.choice(num_classes, size=m, replace=False).tolist()))
    return PartitionPlan(n, subsets, [rows_per_participant] * n, seed)


def holdout_split(data: LabeledDataset, fraction: float, seed: int):
    """Stratified hold-out: returns ``(held_out, remainder)``."""
    if not 0 < fraction <= 1:
        raise ContractViolation(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    held = []
    for c in range(data.num_classes):
        idx = np.flatnonzero(data.labels == c)
        if not len(idx):
            continue
        k = min(len(idx), max(1, int(round(fraction * len(idx)))))
        held.append(rng.choice(idx, size=k, replace=False))
    held = np.sort(np.concatenate(held)) if held else np.empty(0, dtype=np.int64)
    mask = np.ones(len(data), dtype=bool)
    mask[held] = False
    return data.subset(held), data.subset(np.flatnonzero(mask))


def make_auxiliary(data: LabeledDataset, fraction: float = 0.1, seed: int = 0) -> LabeledDataset:
    return holdout_split(data, fraction, seed)[0]
