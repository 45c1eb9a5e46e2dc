"""Adaptive-sampling best-arm identification for BUILD and SWAP.

All searches run successive elimination over a table of arms. References are
consumed in permutation order, ``batch_size`` at a time; after every batch the
running means and confidence radii are refreshed and arms whose lower bound
exceeds the smallest upper bound are dropped. The first batch doubles as the
sigma estimation sample.

Two SWAP variants are provided:

* :func:`banditpam_swap` treats every (candidate, medoid position) pair as its
  own arm and pays one distance lookup per surviving pair and reference.
* :func:`banditpampp_swap` uses one arm per candidate point carrying ``k``
  virtual columns, all updated from a single distance per reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cache import PicCache, cached_block
from .core import Dataset, Instrumentation, MedoidState, Metric, UsageError, distance_block
from .exact import build_objectives, exact_swap_deltas

DELTA_CEILING = 0.5


@dataclass
class BanditConfig:
    """Hyperparameters of the bandit algorithms.

    ``delta`` and ``max_swaps`` default to ``1 / (k n^3)`` and ``k`` once the
    problem size is known (see :meth:`resolve`). ``sigma_override`` replaces
    every estimated sigma; ``float('inf')`` disables elimination entirely.
    """

    delta: Optional[float] = None
    batch_size: int = 100
    sigma_floor: float = 1e-9
    max_swaps: Optional[int] = None
    cache_width: int = 1000
    seed: int = 0
    sigma_override: Optional[float] = None

    def resolve(self, n: int, k: int) -> "BanditConfig":
        if self.batch_size < 1:
            raise UsageError("batch_size must be positive")
        if self.cache_width < 1:
            raise UsageError("cache_width must be positive")
        if not self.sigma_floor > 0:
            raise UsageError("sigma_floor must be positive")
        delta = 1.0 / (k * float(n) ** 3) if self.delta is None else float(self.delta)
        if not 0 < delta < 1:
            raise UsageError(f"delta must lie in (0, 1), got {delta}")
        max_swaps = k if self.max_swaps is None else int(self.max_swaps)
        if max_swaps < 0:
            raise UsageError("max_swaps must be nonnegative")
        return BanditConfig(
            delta=min(delta, DELTA_CEILING),
            batch_size=int(self.batch_size),
            sigma_floor=float(self.sigma_floor),
            max_swaps=max_swaps,
            cache_width=int(self.cache_width),
            seed=int(self.seed),
            sigma_override=self.sigma_override,
        )


@dataclass
class ArmTable:
    """Running statistics for a set of arms with ``c`` columns each.

    BUILD uses a single column. SWAP uses one column per medoid position,
    either as independent pair arms or as virtual columns of a point arm.
    """

    arms: np.ndarray
    n_cols: int
    sums: np.ndarray = field(init=False)
    mu_hat: np.ndarray = field(init=False)
    ci: np.ndarray = field(init=False)
    sigma: np.ndarray = field(init=False)
    active: np.ndarray = field(init=False)
    pulls: int = 0

    def __post_init__(self):
        shape = (self.arms.size, self.n_cols)
        self.sums = np.zeros(shape)
        self.mu_hat = np.zeros(shape)
        self.ci = np.full(shape, np.inf)
        self.sigma = np.full(shape, np.nan)
        self.active = np.ones(shape, dtype=bool)


def confidence_radius(sigma, delta: float, t: int):
    """``sigma * sqrt(log(1/delta) / t)`` after ``t`` pulls."""
    if not 0 < delta < 1:
        raise UsageError(f"delta must lie in (0, 1), got {delta}")
    if t < 1:
        raise UsageError("confidence radius needs at least one pull")
    return sigma * math.sqrt(math.log(1.0 / delta) / t)


def estimate_sigma(rewards: np.ndarray, sigma_floor: float) -> np.ndarray:
    """Per-arm sample standard deviation over the first batch, floored.

    ``rewards`` has the batch on axis 1: ``(arms, batch)`` or
    ``(arms, batch, columns)``.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.shape[1] < 2:
        return np.full(rewards.shape[:1] + rewards.shape[2:], float(sigma_floor))
    return np.maximum(rewards.std(axis=1, ddof=1), sigma_floor)


class ReferenceSource:
    """Distances to references in some sampling order, with cost accounting.

    ``lookups[r]`` is the number of independent lookups row ``r`` stands for;
    the per-pair baseline passes its surviving column count here.
    """

    order: np.ndarray

    def block(self, rows, positions, instr, lookups=None) -> np.ndarray:
        raise NotImplementedError

    def full_rows(self, rows, instr, lookups=None) -> np.ndarray:
        """Distances from ``rows`` to every point, in point-index order."""
        by_pos = self.block(rows, np.arange(self.order.size), instr, lookups)
        out = np.empty_like(by_pos)
        out[:, self.order] = by_pos
        return out


class DirectSource(ReferenceSource):
    """Uncached sampling in a given order; every lookup is a fresh computation."""

    def __init__(self, data: Dataset, metric: Metric, order: np.ndarray):
        self.data, self.metric, self.order = data, metric, np.asarray(order)

    def block(self, rows, positions, instr, lookups=None):
        rows = np.asarray(rows, dtype=np.int64)
        positions = np.asarray(positions, dtype=np.int64)
        reps = rows.size if lookups is None else int(np.sum(lookups))
        instr.add_distances(reps * positions.size)
        return distance_block(
            self.metric, self.data.points[rows], self.data.points[self.order[positions]]
        )


class CachedSource(ReferenceSource):
    """Sampling in the cache's permutation order through the cache."""

    def __init__(self, data: Dataset, metric: Metric, cache: PicCache):
        self.data, self.metric, self.cache = data, metric, cache
        self.order = cache.permutation.order

    def block(self, rows, positions, instr, lookups=None):
        return cached_block(self.cache, self.data, self.metric, rows, positions, instr, lookups)


def _eliminate(
    table: ArmTable,
    pull: Callable[[np.ndarray, np.ndarray, Optional[np.ndarray]], np.ndarray],
    exact: Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray],
    n_refs: int,
    delta: float,
    batch_size: int,
    sigma_floor: float,
    per_point: bool,
    sigma_override: Optional[float] = None,
):
    """Successive elimination; returns ``(row, column, value)`` of the winner.

    ``pull(rows, positions, lookups)`` returns rewards ``(r, b, c)``.
    ``exact(rows, lookups)`` returns exact means ``(r, c)``. With
    ``per_point`` a row survives while any of its columns does.
    """
    log_term = math.log(1.0 / delta)
    while True:
        rows = np.flatnonzero(table.active.any(axis=1))
        lookups = None if per_point else table.active[rows].sum(axis=1)
        t = table.pulls
        b = min(batch_size, n_refs - t)
        rewards = pull(rows, np.arange(t, t + b), lookups)
        if t == 0:
            sig = estimate_sigma(rewards, sigma_floor)
            if sigma_override is not None:
                sig = np.full_like(sig, float(sigma_override))
            table.sigma[rows] = sig
        table.sums[rows] += rewards.sum(axis=1)
        table.pulls = t = t + b
        table.mu_hat[rows] = table.sums[rows] / t
        table.ci[rows] = table.sigma[rows] * math.sqrt(log_term / t)

        act = table.active
        min_ucb = np.min(np.where(act, table.mu_hat + table.ci, np.inf))
        ok = act & (table.mu_hat - table.ci <= min_ucb)
        if per_point:
            ok = act & ok.any(axis=1, keepdims=True)
        table.active = ok

        alive_rows = np.flatnonzero(ok.any(axis=1))
        if per_point and alive_rows.size == 1:
            r = int(alive_rows[0])
            j = int(np.argmin(table.mu_hat[r]))
            return r, j, float(table.mu_hat[r, j])
        if not per_point and int(ok.sum()) == 1:
            r, j = (int(v[0]) for v in np.nonzero(ok))
            return r, j, float(table.mu_hat[r, j])
        if n_refs - t <= batch_size:
            lookups = None if per_point else ok[alive_rows].sum(axis=1)
            means = exact(alive_rows, lookups)
            means = np.where(ok[alive_rows], means, np.inf)
            flat = int(np.argmin(means))
            r, j = divmod(flat, table.n_cols)
            return int(alive_rows[r]), int(j), float(means[r, j])


def adaptive_search(
    arms,
    reward: Callable[[np.ndarray, np.ndarray], np.ndarray],
    exact: Callable[[np.ndarray], np.ndarray],
    n_refs: int,
    delta: float,
    batch_size: int = 100,
    sigma_floor: float = 1e-9,
    sigma_override: Optional[float] = None,
) -> int:
    """Best single-column arm by successive elimination.

    ``reward(points, positions)`` gives the ``(points, positions)`` reward
    matrix for references at those sampling positions; ``exact(points)``
    gives exact objectives used once the references are nearly exhausted.
    Lower is better; exact ties go to the lowest arm.
    """
    arms = np.asarray(sorted(int(a) for a in arms), dtype=np.int64)
    if arms.size == 0:
        raise UsageError("adaptive_search needs at least one arm")
    if arms.size == 1:
        return int(arms[0])
    table = ArmTable(arms, 1)
    r, _, _ = _eliminate(
        table,
        lambda rows, pos, _l: reward(arms[rows], pos)[:, :, None],
        lambda rows, _l: exact(arms[rows])[:, None],
        n_refs, delta, batch_size, sigma_floor, True, sigma_override,
    )
    return int(arms[r])


def build_search(
    data: Dataset,
    source: ReferenceSource,
    medoids,
    best: np.ndarray,
    config: BanditConfig,
    instr: Instrumentation,
) -> int:
    """One bandit BUILD step: pick the next medoid given ``best`` (distance to the current medoids)."""
    n = data.n
    mask = np.ones(n, dtype=bool)
    mask[list(medoids)] = False
    order = source.order

    def reward(points, positions):
        dist = source.block(points, positions, instr)
        ref_best = best[order[positions]]
        if not medoids:
            return dist
        return np.minimum(dist - ref_best, 0.0)

    def exact(points):
        return build_objectives(source.full_rows(points, instr), best)

    return adaptive_search(
        np.flatnonzero(mask), reward, exact, n, config.delta, config.batch_size,
        config.sigma_floor, config.sigma_override,
    )


def swap_rewards(state: MedoidState, dist: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Per-reference swap rewards ``(a, b, k)`` from one distance per (candidate, reference).

    ``dist[a, b]`` is the distance from candidate ``a`` to reference
    ``refs[b]``. The column owning the reference gets ``min(d, d2) - d1``;
    every other column shares ``min(d, d1) - d1``.
    """
    d1, d2 = state.d1[refs], state.d2[refs]
    shared = np.minimum(dist, d1) - d1
    own = np.minimum(dist, d2) - d1
    is_own = state.nearest[refs][None, :, None] == np.arange(state.k)[None, None, :]
    return np.where(is_own, own[:, :, None], shared[:, :, None])


def _swap_search(data, source, state: MedoidState, config: BanditConfig, instr, per_point):
    n, k = data.n, state.k
    arms = np.arange(n, dtype=np.int64)
    order = source.order

    def pull(rows, positions, lookups):
        dist = source.block(arms[rows], positions, instr, lookups)
        return swap_rewards(state, dist, order[positions])

    def exact(rows, lookups):
        return exact_swap_deltas(state, source.full_rows(arms[rows], instr, lookups))

    if n == 1:
        return 0, 0, 0.0
    table = ArmTable(arms, k)
    r, j, value = _eliminate(
        table, pull, exact, n, config.delta, config.batch_size, config.sigma_floor,
        per_point, config.sigma_override,
    )
    return int(arms[r]), int(j), value


def banditpam_swap(data, source, state, config, instr):
    """Per-pair SWAP search; returns ``(point in, medoid position out, estimated delta)``."""
    return _swap_search(data, source, state, config, instr, per_point=False)


def banditpampp_swap(data, source, state, config, instr):
    """SWAP search with one arm per point and ``k`` shared virtual columns."""
    return _swap_search(data, source, state, config, instr, per_point=True)
