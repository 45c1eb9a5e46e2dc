"""Domain types, distance metrics, clustering loss and nearest-medoid bookkeeping."""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from .cache import PicCache

# Elements per broadcast block when computing distance blocks.
_BLOCK_ELEMENTS = 1 << 21


class UsageError(ValueError):
    """Invalid arguments or preconditions (CLI exit code 1)."""


class DataError(ValueError):
    """Malformed input data (CLI exit code 2)."""


class Metric(str, enum.Enum):
    L1 = "l1"
    L2 = "l2"
    SQUARED_L2 = "sql2"
    COSINE = "cosine"

    @classmethod
    def parse(cls, value: "Metric | str") -> "Metric":
        if isinstance(value, Metric):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UsageError(f"unknown metric {value!r}") from None


@dataclass(frozen=True)
class Dataset:
    """Immutable ``(n, p)`` float64 matrix of feature rows."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise UsageError("points must be a 2-D array of feature rows")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataError("dataset needs at least one row and one column")
        if not np.all(np.isfinite(pts)):
            raise DataError("dataset contains non-finite coordinates")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Dataset":
        rows = [list(r) for r in rows]
        if rows and len({len(r) for r in rows}) != 1:
            raise DataError("all rows must have the same length")
        return cls(np.asarray(rows, dtype=np.float64))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


@dataclass
class Instrumentation:
    """Monotone run counters.

    Distance counts are attributed to the current ``phase`` ("build" or
    "swap"). Cache hits and misses are tracked per phase as well; the
    ``cache_hits``/``cache_misses`` properties give run totals.
    """

    build_distance_count: int = 0
    swap_distance_count: int = 0
    build_cache_hits: int = 0
    swap_cache_hits: int = 0
    build_cache_misses: int = 0
    swap_cache_misses: int = 0
    swap_iterations: int = 0
    swap_searches: int = 0
    phase: str = "build"
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add_distances(self, count: int) -> None:
        with self._lock:
            if self.phase == "build":
                self.build_distance_count += int(count)
            else:
                self.swap_distance_count += int(count)

    def add_cache(self, hits: int, misses: int) -> None:
        with self._lock:
            if self.phase == "build":
                self.build_cache_hits += int(hits)
                self.build_cache_misses += int(misses)
            else:
                self.swap_cache_hits += int(hits)
                self.swap_cache_misses += int(misses)

    @property
    def cache_hits(self) -> int:
        return self.build_cache_hits + self.swap_cache_hits

    @property
    def cache_misses(self) -> int:
        return self.build_cache_misses + self.swap_cache_misses

    @property
    def total_distance_count(self) -> int:
        return self.build_distance_count + self.swap_distance_count

    def swap_hit_rate(self) -> float:
        lookups = self.swap_cache_hits + self.swap_cache_misses
        return self.swap_cache_hits / lookups if lookups else 0.0

    def snapshot(self) -> dict:
        return {
            "build_distance_count": self.build_distance_count,
            "swap_distance_count": self.swap_distance_count,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "swap_iterations": self.swap_iterations,
        }


@dataclass
class MedoidState:
    """Medoid list plus nearest / second-nearest assignment of every point.

    ``nearest`` and ``second`` hold positions into ``medoids``. With a single
    medoid, ``second`` is -1 and ``d2`` is +inf everywhere.
    """

    medoids: tuple
    nearest: np.ndarray
    second: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def k(self) -> int:
        return len(self.medoids)

    @property
    def n(self) -> int:
        return self.d1.shape[0]

    def loss(self) -> float:
        return float(self.d1.sum())


def _paired(metric: Metric, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Reduces over the last (contiguous) axis; every distance, scalar or
    # block, goes through here so cached and direct values agree bitwise.
    if metric is Metric.L1:
        return np.abs(a - b).sum(axis=-1)
    if metric is Metric.L2:
        diff = a - b
        return np.sqrt((diff * diff).sum(axis=-1))
    if metric is Metric.SQUARED_L2:
        diff = a - b
        return (diff * diff).sum(axis=-1)
    raise AssertionError(metric)


def _cosine_block(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    nx = np.sqrt((x * x).sum(axis=-1))
    ny = np.sqrt((y * y).sum(axis=-1))
    dot = (x[:, None, :] * y[None, :, :]).sum(axis=-1)
    denom = nx[:, None] * ny[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        sim = np.where(denom > 0, dot / denom, 0.0)
    return np.clip(1.0 - sim, 0.0, 2.0)


def distance_block(metric: Metric, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """All distances between rows of ``x`` (a, p) and rows of ``y`` (b, p)."""
    metric = Metric.parse(metric)
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.shape[-1] != y.shape[-1]:
        raise UsageError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    a, b, p = x.shape[0], y.shape[0], x.shape[1]
    out = np.empty((a, b), dtype=np.float64)
    step = max(1, _BLOCK_ELEMENTS // max(1, b * p))
    for lo in range(0, a, step):
        hi = min(a, lo + step)
        if metric is Metric.COSINE:
            out[lo:hi] = _cosine_block(x[lo:hi], y)
        else:
            out[lo:hi] = _paired(metric, x[lo:hi, None, :], y[None, :, :])
    return out


def distance(metric: "Metric | str", x: Sequence[float], y: Sequence[float]) -> float:
    """Distance between two feature rows.

    Cosine distance is ``1 - cos(x, y)``; a zero-norm input has similarity 0,
    so its distance to anything is 1.

    >>> distance("l2", (3, 0), (0, 4))
    5.0
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    return float(distance_block(Metric.parse(metric), x, y)[0, 0])


def _check_medoids(medoids: Sequence[int], n: int) -> list:
    meds = [int(m) for m in medoids]
    if not meds:
        raise UsageError("medoid list is empty")
    if len(set(meds)) != len(meds):
        raise UsageError(f"medoids are not distinct: {meds}")
    for m in meds:
        if not 0 <= m < n:
            raise UsageError(f"medoid index {m} out of range [0, {n})")
    return meds


def clustering_loss(data: Dataset, metric: "Metric | str", medoids: Sequence[int]) -> float:
    """Sum over points of the distance to the closest medoid (exact, uncounted)."""
    meds = _check_medoids(medoids, data.n)
    d = distance_block(Metric.parse(metric), data.points[meds], data.points)
    return float(d.min(axis=0).sum())


def medoid_rows(
    data: Dataset,
    metric: Metric,
    medoids: Sequence[int],
    instr: Instrumentation,
    cache: Optional["PicCache"] = None,
) -> np.ndarray:
    """(k, n) distances from each medoid to every point, in point-index order."""
    metric = Metric.parse(metric)
    meds = np.asarray(medoids, dtype=np.int64)
    if cache is None:
        instr.add_distances(meds.size * data.n)
        return distance_block(metric, data.points[meds], data.points)
    from .cache import cached_block

    by_position = cached_block(cache, data, metric, meds, np.arange(data.n), instr)
    rows = np.empty_like(by_position)
    rows[:, cache.permutation.order] = by_position
    return rows


def state_from_rows(medoids: Sequence[int], rows: np.ndarray) -> MedoidState:
    k, n = rows.shape
    cols = np.arange(n)
    nearest = np.argmin(rows, axis=0)
    d1 = rows[nearest, cols]
    if k == 1:
        second = np.full(n, -1, dtype=np.int64)
        d2 = np.full(n, np.inf)
    else:
        masked = rows.copy()
        masked[nearest, cols] = np.inf
        second = np.argmin(masked, axis=0)
        d2 = rows[second, cols]
    return MedoidState(tuple(int(m) for m in medoids), nearest.astype(np.int64),
                       second.astype(np.int64), d1, d2)


def assign_nearest(
    data: Dataset,
    metric: "Metric | str",
    medoids: Sequence[int],
    instr: Instrumentation,
    cache: Optional["PicCache"] = None,
) -> MedoidState:
    """Nearest and second-nearest medoid of every point.

    Costs ``n * k`` distance lookups, routed through ``cache`` when given.
    Ties go to the lowest medoid position.
    """
    meds = _check_medoids(medoids, data.n)
    rows = medoid_rows(data, Metric.parse(metric), meds, instr, cache)
    return state_from_rows(meds, rows)
