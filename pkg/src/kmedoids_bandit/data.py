"""Dataset ingestion, synthetic mixtures and subsampling."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .core import DataError, Dataset, UsageError

CENTER_BOX = 10.0


def load_csv(path, has_header: bool = False) -> Dataset:
    """Read a rectangular numeric CSV (optional single header row).

    Errors name the 1-based line and column of the offending cell.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise DataError(f"{path} is not valid UTF-8") from None

    rows = []
    width = None
    for line_no, record in enumerate(csv.reader(text.splitlines()), start=1):
        if has_header and line_no == 1:
            continue
        if not record or all(not cell.strip() for cell in record):
            continue
        if width is None:
            width = len(record)
        elif len(record) != width:
            raise DataError(f"row {line_no}: expected {width} columns, found {len(record)}")
        values = []
        for col_no, cell in enumerate(record, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(
                    f"row {line_no}, column {col_no}: not a number: {cell.strip()!r}"
                ) from None
            if not math.isfinite(v):
                raise DataError(f"row {line_no}, column {col_no}: non-finite value {cell.strip()!r}")
            values.append(v)
        rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.asarray(rows, dtype=np.float64))


def write_csv(path, data: Dataset) -> None:
    """Write rows with 17 significant digits (lossless for float64)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in data.points:
            fh.write(",".join(format(float(v), ".17g") for v in row))
            fh.write("\n")


def generate_synthetic(
    clusters: int, per_cluster: int, dim: int, spread: float, seed: int = 0
) -> Dataset:
    """Isotropic Gaussian mixture, rows grouped by cluster.

    Centers are uniform in ``[-10, 10]^dim``; each point is its center plus
    ``spread`` times standard normal noise.
    """
    if clusters < 1 or per_cluster < 1 or dim < 1:
        raise UsageError("clusters, per_cluster and dim must be positive")
    if spread < 0:
        raise UsageError("spread must be nonnegative")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-CENTER_BOX, CENTER_BOX, size=(clusters, dim))
    noise = rng.standard_normal(size=(clusters, per_cluster, dim))
    points = centers[:, None, :] + spread * noise
    return Dataset(points.reshape(clusters * per_cluster, dim))


def subsample_with_replacement(data: Dataset, m: int, seed: int = 0) -> Dataset:
    if m < 1:
        raise UsageError("subsample size must be at least 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.n, size=m)
    return Dataset(data.points[idx])
