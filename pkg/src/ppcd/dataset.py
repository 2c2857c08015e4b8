"""Numeric datasets stored attribute-major: ``values[attribute, record]``."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

NORMALIZATION_METHODS = ("min_max", "z_score", "unary_max")


class DatasetError(ValueError):
    pass


class PartitionError(DatasetError):
    pass


@dataclass(frozen=True)
class Dataset:
    values: np.ndarray
    attribute_names: Optional[tuple] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DatasetError(f"dataset must be a non-empty 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DatasetError("dataset contains NaN or infinite values")
        object.__setattr__(self, "values", values)
        if self.attribute_names is not None:
            names = tuple(str(x) for x in self.attribute_names)
            if len(names) != values.shape[0]:
                raise DatasetError(f"{len(names)} attribute names for {values.shape[0]} attributes")
            object.__setattr__(self, "attribute_names", names or None)

    @property
    def a(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def records(self) -> np.ndarray:
        """Records as rows (``n x a``)."""
        return self.values.T

    @classmethod
    def from_records(cls, rows, attribute_names=None) -> "Dataset":
        return cls(np.asarray(rows, dtype=float).T, attribute_names)


@dataclass(frozen=True)
class PartitionedDataset:
    blocks: tuple

    @property
    def m(self) -> int:
        return len(self.blocks)

    @property
    def widths(self) -> list[int]:
        return [b.n for b in self.blocks]

    def concatenate(self) -> Dataset:
        return Dataset(np.hstack([b.values for b in self.blocks]), self.blocks[0].attribute_names)


@dataclass(frozen=True)
class NormalizationSpec:
    method: str
    stats: dict = field(default_factory=dict)

    @property
    def a(self) -> int:
        return len(next(iter(self.stats.values())))


# -- csv -----------------------------------------------------------------

def _parse_float(cell: str, row: int, col: int, path) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"{path}: row {row}, column {col}: not a number: {cell!r}") from None
    if not np.isfinite(value):
        raise DatasetError(f"{path}: row {row}, column {col}: non-finite value {cell!r}")
    return value


def load_csv(path) -> Dataset:
    """Read a records-as-rows CSV file, optionally with one header row."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise DatasetError(f"{path}: no data")

    names = None
    first = [c.strip() for c in rows[0]]
    try:
        [float(c) for c in first]
    except ValueError:
        names = first
        rows = rows[1:]
        if not rows:
            raise DatasetError(f"{path}: header row but no data")

    width = len(names) if names is not None else len(rows[0])
    data = []
    offset = 2 if names is not None else 1
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DatasetError(f"{path}: row {r + offset} has {len(row)} columns, expected {width}")
        data.append([_parse_float(c.strip(), r + offset, k + 1, path) for k, c in enumerate(row)])
    return Dataset(np.array(data, dtype=float).T, names)


def save_csv(d: Dataset, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            if d.attribute_names:
                fh.write(",".join(d.attribute_names) + "\n")
            # savetxt streams row by row; fine for 10**6 records
            np.savetxt(fh, d.values.T, delimiter=",", fmt="%.17g")
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc.strerror or exc}") from exc


# -- normalization ---------------------------------------------------------

def fit_normalizer(d: Dataset, method: str = "min_max") -> NormalizationSpec:
    v = d.values
    if method == "min_max":
        stats = {"min": v.min(axis=1), "max": v.max(axis=1)}
    elif method == "z_score":
        # population standard deviation
        stats = {"mean": v.mean(axis=1), "std": v.std(axis=1)}
    elif method == "unary_max":
        stats = {"max_abs": np.abs(v).max(axis=1)}
    else:
        raise DatasetError(f"unknown normalization method {method!r}; choose from {NORMALIZATION_METHODS}")
    return NormalizationSpec(method, stats)


def apply_normalizer(spec: NormalizationSpec, d: Dataset) -> Dataset:
    if spec.a != d.a:
        raise DatasetError(f"normalizer fitted on {spec.a} attributes, dataset has {d.a}")
    v = d.values
    st = spec.stats
    if spec.method == "min_max":
        lo = st["min"][:, None]
        span = (st["max"] - st["min"])[:, None]
        shifted = v - lo
        out = np.divide(shifted, span, out=np.zeros_like(v), where=span > 0)
    elif spec.method == "z_score":
        sd = st["std"][:, None]
        out = np.divide(v - st["mean"][:, None], sd, out=np.zeros_like(v), where=sd > 0)
    elif spec.method == "unary_max":
        m = st["max_abs"][:, None]
        out = np.divide(v, m, out=np.zeros_like(v), where=m > 0)
    else:
        raise DatasetError(f"unknown normalization method {spec.method!r}")
    return Dataset(out, d.attribute_names)


# -- partitioning and padding ------------------------------------------------

def partition_widths(n: int, m: int) -> list[int]:
    c = n // m
    return [c] * (m - 1) + [n - c * (m - 1)]


def partition(d: Dataset, m: int) -> PartitionedDataset:
    """Split records into ``m`` contiguous blocks; the last takes the remainder."""
    if m < 1:
        raise PartitionError(f"number of subsets must be positive, got {m}")
    c = d.n // m
    if c <= d.a:
        raise PartitionError(
            f"each subset needs more records than attributes (c > a): "
            f"c = floor({d.n}/{m}) = {c}, a = {d.a}"
        )
    bounds = np.cumsum([0] + partition_widths(d.n, m))
    blocks = tuple(Dataset(d.values[:, lo:hi], d.attribute_names) for lo, hi in zip(bounds[:-1], bounds[1:]))
    return PartitionedDataset(blocks)


def pad_to_even(d: Dataset) -> Dataset:
    if d.a % 2 == 0:
        return d
    names = None
    if d.attribute_names:
        names = d.attribute_names + ("_pad",)
    return Dataset(np.vstack([d.values, np.zeros((1, d.n))]), names)


# -- synthetic data ------------------------------------------------------------

def gen_synthetic(n: int, a: int, mu: float = 100.0, sigma_sq: float = 100.0, seed: int = 0) -> Dataset:
    """I.i.d. Gaussian entries with the given mean and variance."""
    if n < 1 or a < 1:
        raise DatasetError(f"need n >= 1 and a >= 1, got n={n}, a={a}")
    if not sigma_sq > 0:
        raise DatasetError(f"variance must be positive, got {sigma_sq}")
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(mu, np.sqrt(sigma_sq), size=(a, n)))


def gen_blobs(centers: Sequence[Sequence[float]], per_center: int, radius: float = 0.9,
              seed: int = 0, shuffle: bool = True):
    """Points uniformly inside a ball of ``radius`` around each center.

    Returns ``(dataset, labels)`` with labels indexing ``centers``.
    """
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=float)
    k, a = centers.shape
    direction = rng.normal(size=(k * per_center, a))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(k * per_center) ** (1.0 / a)
    labels = np.repeat(np.arange(k), per_center)
    pts = centers[labels] + direction * r[:, None]
    if shuffle:
        order = rng.permutation(len(labels))
        pts, labels = pts[order], labels[order]
    return Dataset(pts.T), labels
