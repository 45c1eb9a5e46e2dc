"""Fixed-permutation reference sampling and the permutation-invariant cache.

Permutations are produced by a Durstenfeld (in-place, descending) Fisher-Yates
shuffle driven by NumPy's PCG64 bit generator. For position ``i`` running from
``n - 1`` down to ``1`` a bounded integer ``j`` in ``[0, i]`` is drawn with
``Generator.integers`` and entries ``i`` and ``j`` are exchanged. The order is
therefore a pure function of ``(n, seed)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, Instrumentation, Metric, UsageError, distance_block

PRNG_NAME = "PCG64/Fisher-Yates-Durstenfeld v1"

DEFAULT_CACHE_WIDTH = 1000


@dataclass(frozen=True)
class Permutation:
    order: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return self.order.shape[0]


def derive_seed(seed: int, *stream: int) -> int:
    """Independent 64-bit seed for a sub-stream of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def new_permutation(n: int, seed: int) -> Permutation:
    if n < 1:
        raise UsageError("permutation length must be at least 1")
    if not 0 <= int(seed) < 2**64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    order = np.arange(n, dtype=np.int64)
    if n > 1:
        picks = rng.integers(0, np.arange(n, 1, -1, dtype=np.int64), dtype=np.int64)
        for i, j in zip(range(n - 1, 0, -1), picks.tolist()):
            order[i], order[j] = order[j], order[i]
    order.setflags(write=False)
    return Permutation(order, int(seed))


def reference_at(perm: Permutation, t: int) -> int:
    if not 0 <= t < perm.n:
        raise UsageError(f"position {t} out of range [0, {perm.n})")
    return int(perm.order[t])


@dataclass
class PicCache:
    """Distances ``d(x_i, x_{pi(q)})`` stored for permutation positions ``q < width``.

    Keys are (query point, permutation position); storage is a dense
    ``(n, width)`` table plus a fill mask.
    """

    permutation: Permutation
    width: int = DEFAULT_CACHE_WIDTH
    store: np.ndarray = field(init=False, repr=False)
    filled: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.width < 1:
            raise UsageError("cache width must be positive")
        cols = min(self.width, self.permutation.n)
        self.store = np.zeros((self.permutation.n, cols), dtype=np.float64)
        self.filled = np.zeros((self.permutation.n, cols), dtype=bool)

    @property
    def n(self) -> int:
        return self.permutation.n

    def entries(self) -> int:
        return int(self.filled.sum())


def cached_distance(
    cache: PicCache, data: Dataset, metric: Metric, i: int, q: int, instr: Instrumentation
) -> float:
    """Single-entry form of :func:`cached_block`."""
    if not 0 <= i < cache.n or not 0 <= q < cache.n:
        raise UsageError(f"index ({i}, {q}) out of range for n={cache.n}")
    return float(cached_block(cache, data, metric, np.array([i]), np.array([q]), instr)[0, 0])


def cached_block(
    cache: PicCache,
    data: Dataset,
    metric: Metric,
    rows: np.ndarray,
    positions: np.ndarray,
    instr: Instrumentation,
    lookups: np.ndarray | None = None,
) -> np.ndarray:
    """Distances from points ``rows`` to references at permutation ``positions``.

    ``lookups[r]`` is how many independent lookups row ``r`` makes for every
    position (default 1). The lookups of one call behave as concurrent
    readers: an entry present when the call starts is a hit for each of
    them, an absent one is a miss (and a computation) for each of them and
    is stored once. Beyond the width nothing is stored, so every lookup is a
    miss.
    """
    rows = np.asarray(rows, dtype=np.int64)
    positions = np.asarray(positions, dtype=np.int64)
    reps = np.ones(rows.size, dtype=np.int64) if lookups is None else np.asarray(lookups, np.int64)
    out = np.empty((rows.size, positions.size), dtype=np.float64)
    if rows.size == 0 or positions.size == 0:
        return out
    width = cache.store.shape[1]
    in_w = positions < width
    hits = misses = 0

    if in_w.any():
        pos_w = positions[in_w]
        block_filled = cache.filled[np.ix_(rows, pos_w)]
        values = cache.store[np.ix_(rows, pos_w)]
        need = ~block_filled
        if need.any():
            need_rows = np.flatnonzero(need.any(axis=1))
            need_cols = np.flatnonzero(need.any(axis=0))
            fresh = distance_block(
                metric, data.points[rows[need_rows]],
                data.points[cache.permutation.order[pos_w[need_cols]]],
            )
            sub_need = need[np.ix_(need_rows, need_cols)]
            sub_vals = values[np.ix_(need_rows, need_cols)]
            sub_vals[sub_need] = fresh[sub_need]
            values[np.ix_(need_rows, need_cols)] = sub_vals
            r_idx, c_idx = np.nonzero(need)
            cache.store[rows[r_idx], pos_w[c_idx]] = values[r_idx, c_idx]
            cache.filled[rows[r_idx], pos_w[c_idx]] = True
        n_need = need.sum(axis=1)
        misses += int((reps * n_need).sum())
        hits += int((reps * (pos_w.size - n_need)).sum())
        out[:, in_w] = values

    if (~in_w).any():
        pos_o = positions[~in_w]
        out[:, ~in_w] = distance_block(
            metric, data.points[rows], data.points[cache.permutation.order[pos_o]]
        )
        misses += int((reps * pos_o.size).sum())

    instr.add_cache(hits, misses)
    instr.add_distances(misses)
    return out
