"""Dataset loading, validation, and synthetic generators.

A :class:`Dataset` holds N points in R^D plus optional dense integer class
labels. Generators are pure functions of their arguments (including the
seed), and loaded data is validated to be finite and rectangular.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import DataError


class Dataset:
    """Immutable collection of N points in R^D with optional labels.

    Labels, when present, are dense non-negative integers 0..C-1.
    """

    def __init__(self, points, labels=None, ids=None):
        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 2:
            raise DataError(f"points must be a 2-D array, got shape {points.shape}")
        if points.shape[1] < 1:
            raise DataError("points must have at least one feature")
        if not np.all(np.isfinite(points)):
            raise DataError("points contain non-finite values")
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (points.shape[0],):
                raise DataError(
                    f"labels length {labels.shape} does not match N={points.shape[0]}"
                )
            if labels.size and labels.min() < 0:
                raise DataError("labels must be non-negative integers")
            labels.setflags(write=False)
        if ids is None:
            ids = np.arange(points.shape[0], dtype=np.int64)
        else:
            ids = np.asarray(ids)
            if ids.shape != (points.shape[0],):
                raise DataError("ids length does not match N")
        points.setflags(write=False)
        ids.setflags(write=False)
        self.points = points
        self.labels = labels
        self.ids = ids

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(self.labels.max()) + 1 if self.labels.size else 0


class Embedding:
    """N points in low-dimensional space (usually d=2)."""

    def __init__(self, coords, d=None):
        coords = np.ascontiguousarray(coords, dtype=np.float64)
        if coords.ndim != 2:
            raise DataError(f"coords must be a 2-D array, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise DataError("embedding coordinates contain non-finite values")
        if d is not None and d != coords.shape[1]:
            raise DataError(f"declared d={d} does not match coords width {coords.shape[1]}")
        self.coords = coords
        self.d = coords.shape[1]

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def _parse_cell(text: str, row: int, col) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {col}: non-finite value {text!r}")
    return value


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def densify_labels(raw):
    """Map raw label values to dense integers 0..C-1 in first-appearance order."""
    seen: dict = {}
    out = np.empty(len(raw), dtype=np.int64)
    for i, v in enumerate(raw):
        if v not in seen:
            seen[v] = len(seen)
        out[i] = seen[v]
    return out


def load_csv(path, label_column=None, standardize_features=False) -> Dataset:
    """Load a CSV file of real-valued rows with an optional label column.

    The header row is detected automatically (any non-numeric cell in the
    first row). ``label_column`` selects the class column by header name or
    by integer index; name selection requires a header.
    """
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")

    header = None
    if any(not _looks_numeric(c) for c in rows[0]):
        header = rows[0]
        rows = rows[1:]
    if isinstance(label_column, str):
        if header is None:
            raise DataError("label column selected by name but the file has no header")
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise DataError(f"label column {label_column!r} not found in header {header}") from None
    elif label_column is not None:
        label_idx = int(label_column)
    else:
        label_idx = None

    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(rows[0])
    if label_idx is not None and not (-width <= label_idx < width):
        raise DataError(f"label column index {label_idx} out of range for width {width}")
    if label_idx is not None and label_idx < 0:
        label_idx += width

    points = []
    raw_labels = []
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"row {r}: expected {width} cells, got {len(row)} (ragged file)")
        vals = []
        for c, cell in enumerate(row):
            if c == label_idx:
                raw_labels.append(cell.strip())
            else:
                name = header[c] if header else c
                vals.append(_parse_cell(cell.strip(), r, name))
        points.append(vals)

    if len(points) < 2:
        raise DataError(f"{path}: need at least 2 rows, got {len(points)}")
    labels = densify_labels(raw_labels) if label_idx is not None else None
    ds = Dataset(np.asarray(points), labels)
    if standardize_features:
        ds = standardize(ds)
    return ds


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset back to CSV with lossless 17-significant-digit reals."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        names = [f"f{c}" for c in range(dataset.dim)]
        if dataset.labels is not None:
            names.append("label")
        writer.writerow(names)
        for i in range(dataset.n):
            row = [f"{v:.17g}" for v in dataset.points[i]]
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[i])))
            writer.writerow(row)


def standardize(dataset: Dataset) -> Dataset:
    """Per-feature zero mean, unit variance; constant features are centered only."""
    mean = dataset.points.mean(axis=0)
    std = dataset.points.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return Dataset((dataset.points - mean) / std, dataset.labels, dataset.ids)


def make_blobs(n_per_class, n_classes, dim, separation, seed) -> Dataset:
    """Isotropic unit-variance Gaussian clusters with centers >= `separation` apart.

    Centers sit on the coordinate axes when n_classes <= dim (mutual distance
    separation*sqrt(2)), otherwise spaced `separation` apart along the first axis.
    """
    if n_per_class < 1 or n_classes < 1 or dim < 1:
        raise DataError("n_per_class, n_classes, and dim must all be >= 1")
    if separation <= 0:
        raise DataError("separation must be positive")
    rng = np.random.default_rng(seed)
    centers = np.zeros((n_classes, dim))
    if n_classes <= dim:
        centers[np.arange(n_classes), np.arange(n_classes)] = separation
    else:
        centers[:, 0] = separation * np.arange(n_classes)
    points = rng.standard_normal((n_classes * n_per_class, dim))
    labels = np.repeat(np.arange(n_classes), n_per_class)
    points += centers[labels]
    return Dataset(points, labels)


def blob_centers(n_classes, dim, separation):
    """Centers used by make_blobs, for tests that check cluster membership."""
    centers = np.zeros((n_classes, dim))
    if n_classes <= dim:
        centers[np.arange(n_classes), np.arange(n_classes)] = separation
    else:
        centers[:, 0] = separation * np.arange(n_classes)
    return centers


def make_moons(n, noise, seed) -> Dataset:
    """Two interleaving half-circles in 2-D with Gaussian noise of scale `noise`."""
    if n < 2:
        raise DataError("make_moons requires n >= 2")
    if noise < 0:
        raise DataError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    n_in = n // 2
    n_out = n - n_in
    t_out = np.linspace(0.0, np.pi, n_out)
    t_in = np.linspace(0.0, np.pi, n_in)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    points = np.vstack([outer, inner])
    if noise > 0:
        points = points + rng.normal(0.0, noise, size=points.shape)
    labels = np.concatenate([np.zeros(n_out, dtype=np.int64), np.ones(n_in, dtype=np.int64)])
    return Dataset(points, labels)
