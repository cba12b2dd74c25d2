"""Datasets: synthetic generators, CSV ingestion, scenario splits, translation."""
from __future__ import annotations

import csv
import enum
import math
import os
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DimensionMismatchError

LABEL_COLUMN = "label"

N_INLIERS = 1000
N_ANOMALIES = 100
DIM = 6
ANOMALY_RADIUS = (2.0, 3.0)
ANOMALY_NOISE = 0.05


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise DataError(f"points must be a 2-d array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (pts.shape[0],):
                raise DataError(f"label vector has shape {lab.shape}, expected ({pts.shape[0]},)")
            if not np.all((lab == 0) | (lab == 1)):
                raise DataError("labels must be 0 or 1")
            object.__setattr__(self, "labels", lab.astype(np.int64))
        if self.feature_names is None:
            object.__setattr__(self, "feature_names", tuple(f"x{j + 1}" for j in range(pts.shape[1])))
        elif len(self.feature_names) != pts.shape[1]:
            raise DataError("feature_names length does not match the number of columns")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def contamination(self) -> float | None:
        return None if self.labels is None else float(self.labels.mean())

    def subset(self, mask) -> "Dataset":
        labels = None if self.labels is None else self.labels[mask]
        return replace(self, points=self.points[mask], labels=labels)

    def select_features(self, columns) -> "Dataset":
        columns = list(columns)
        return replace(self, points=self.points[:, columns],
                       feature_names=tuple(self.feature_names[j] for j in columns))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_labels = (self.labels is None and other.labels is None) or (
            self.labels is not None and other.labels is not None
            and np.array_equal(self.labels, other.labels))
        return same_labels and np.array_equal(self.points, other.points)


def _unit_ball(rng, n, d):
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = rng.random(n) ** (1.0 / d)
    return v * r[:, None]


def _synthetic(direction, seed, name) -> Dataset:
    rng = np.random.default_rng(seed)
    inliers = _unit_ball(rng, N_INLIERS, DIM)
    r = rng.uniform(*ANOMALY_RADIUS, N_ANOMALIES)
    sign = np.where(rng.random(N_ANOMALIES) < 0.5, -1.0, 1.0)
    noise = rng.normal(0.0, ANOMALY_NOISE, (N_ANOMALIES, DIM))
    anomalies = (sign * r)[:, None] * direction + noise
    labels = np.r_[np.zeros(N_INLIERS, dtype=np.int64), np.ones(N_ANOMALIES, dtype=np.int64)]
    return Dataset(np.vstack([inliers, anomalies]), labels, name)


def generate_xaxis(seed: int = 0) -> Dataset:
    """Unit 6-ball inliers; anomalies displaced along the first feature."""
    direction = np.zeros(DIM)
    direction[0] = 1.0
    return _synthetic(direction, seed, "xaxis")


def generate_bisect3d(seed: int = 0) -> Dataset:
    """Unit 6-ball inliers; anomalies along the bisector of the first three features."""
    direction = np.zeros(DIM)
    direction[:3] = 1.0 / math.sqrt(3.0)
    return _synthetic(direction, seed, "bisect3d")


GENERATORS = {"xaxis": generate_xaxis, "bisect3d": generate_bisect3d}


def generate(kind: str, seed: int = 0) -> Dataset:
    try:
        return GENERATORS[kind.lower()](seed)
    except KeyError:
        raise ConfigError(f"unknown dataset kind {kind!r}; expected one of {sorted(GENERATORS)}") from None


def load_csv(path, label_column: str | None = LABEL_COLUMN, require_label: bool = False) -> Dataset:
    """Read a header-first numeric CSV.

    ``label_column`` is used when present in the header; with
    ``require_label=True`` its absence is an error.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if label_column is not None and label_column not in header:
            if require_label:
                raise DataError(f"{path}: unknown label column {label_column!r}")
            label_column = None
        lab_idx = header.index(label_column) if label_column is not None else None
        feat_idx = [j for j in range(len(header)) if j != lab_idx]
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, header has {len(header)}")
            values = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: non-numeric cell {cell!r} at row {lineno}, column {header[j]!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: non-finite cell {cell!r} at row {lineno}, column {header[j]!r}")
                values.append(v)
            if lab_idx is not None:
                lab = values[lab_idx]
                if lab not in (0.0, 1.0):
                    raise DataError(f"{path}: label {row[lab_idx]!r} at row {lineno} is not 0 or 1")
                labels.append(int(lab))
            rows.append([values[j] for j in feat_idx])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(labels) if lab_idx is not None else None,
                   path.stem, tuple(header[j] for j in feat_idx))


def _atomic_write(path, write) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_csv(ds: Dataset, path) -> None:
    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        header = list(ds.feature_names)
        if ds.labels is not None:
            header.append(LABEL_COLUMN)
        w.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.points[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)
    _atomic_write(path, write)


class Scenario(str, enum.Enum):
    I = "I"  # noqa: E741
    II = "II"

    @classmethod
    def parse(cls, value) -> "Scenario":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        key = {"1": "I", "2": "II"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown scenario {value!r}; expected I or II") from None


def scenario_split(ds: Dataset, scenario, seed: int | None = None) -> tuple[Dataset, Dataset]:
    """Training set for the scenario, and the full dataset as test set.

    ``seed`` is accepted for interface symmetry; both splits are deterministic.
    """
    scenario = Scenario.parse(scenario)
    if scenario is Scenario.I:
        return ds, ds
    if ds.labels is None:
        raise DataError("scenario II needs labels to select the inliers")
    return ds.subset(ds.labels == 0), ds


def translate(ds: Dataset, offset) -> Dataset:
    offset = np.asarray(offset, dtype=np.float64)
    if offset.shape != (ds.d,):
        raise DimensionMismatchError(f"offset has shape {offset.shape}, dataset has {ds.d} features")
    return replace(ds, points=ds.points + offset)
