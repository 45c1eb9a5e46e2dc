"""Exhaustive PAM (BUILD + SWAP) used as the ground-truth oracle.

The bandit algorithms reuse :func:`build_objectives` and
:func:`exact_swap_deltas` for their exact fallbacks, which is what makes a
full-pass bandit run bit-identical to the oracle.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import (
    Dataset,
    Instrumentation,
    MedoidState,
    Metric,
    UsageError,
    assign_nearest,
    distance_block,
)

# Candidate rows per exhaustive block (each row holds n distances).
_ROWS_PER_BLOCK = 256


def swap_delta(state: MedoidState, m_pos: int, d_i: float, s: int) -> float:
    """Loss change on point ``s`` when medoid ``m_pos`` is replaced by a point at distance ``d_i``."""
    d1 = state.d1[s]
    if m_pos == state.nearest[s]:
        return float(-d1 + min(state.d2[s], d_i))
    return float(-d1 + min(d1, d_i))


def exact_swap_deltas(state: MedoidState, dist: np.ndarray) -> np.ndarray:
    """Mean loss change for every (candidate, medoid position) pair.

    ``dist`` is ``(a, n)``: distances from ``a`` candidates to every point in
    index order. Returns ``(a, k)``. Each entry depends only on its own row,
    so results do not change with how candidates are grouped.
    """
    d1, d2 = state.d1, state.d2
    shared = np.minimum(dist, d1) - d1
    own = np.minimum(dist, d2) - d1
    diff = own - shared
    base = shared.sum(axis=1)
    out = np.empty((dist.shape[0], state.k), dtype=np.float64)
    for j in range(state.k):
        members = np.flatnonzero(state.nearest == j)
        out[:, j] = (base + diff[:, members].sum(axis=1)) / state.n
    return out


def build_objectives(dist: np.ndarray, best: np.ndarray) -> np.ndarray:
    """Total loss if each candidate row were added; ``best`` is +inf with no medoids yet."""
    return np.minimum(dist, best).sum(axis=1)


def _argmin_flat(values: np.ndarray) -> tuple:
    flat = int(np.argmin(values))
    return divmod(flat, values.shape[1])


def pam_build_step(
    data: Dataset,
    metric: Metric,
    current: Sequence[int],
    instr: Instrumentation,
    best: Optional[np.ndarray] = None,
    return_row: bool = False,
):
    """Greedy BUILD: the non-medoid whose addition lowers the loss the most.

    ``best`` is the per-point distance to the closest current medoid; when it
    is omitted it is recomputed (and counted).
    """
    metric = Metric.parse(metric)
    current = [int(c) for c in current]
    n = data.n
    if len(current) >= n:
        raise UsageError("every point is already a medoid")
    if best is None:
        if current:
            instr.add_distances(len(current) * n)
            best = distance_block(metric, data.points[current], data.points).min(axis=0)
        else:
            best = np.full(n, np.inf)
    mask = np.ones(n, dtype=bool)
    mask[current] = False
    candidates = np.flatnonzero(mask)

    best_value, best_idx, best_row = np.inf, -1, None
    for lo in range(0, candidates.size, _ROWS_PER_BLOCK):
        cand = candidates[lo:lo + _ROWS_PER_BLOCK]
        dist = distance_block(metric, data.points[cand], data.points)
        instr.add_distances(dist.size)
        obj = build_objectives(dist, best)
        r = int(np.argmin(obj))
        if obj[r] < best_value or best_idx < 0:
            best_value, best_idx, best_row = obj[r], int(cand[r]), dist[r].copy()
    if return_row:
        return best_idx, best_row
    return best_idx


def pam_swap_step(data: Dataset, metric: Metric, state: MedoidState, instr: Instrumentation):
    """Exhaustive best swap over all ``n * k`` (candidate, medoid position) pairs.

    Returns ``(i, j, delta)`` where ``delta`` is the exact mean loss change;
    ties go to the lowest ``i``, then the lowest ``j``.
    """
    metric = Metric.parse(metric)
    best = (np.inf, -1, -1)
    for lo in range(0, data.n, _ROWS_PER_BLOCK):
        cand = np.arange(lo, min(data.n, lo + _ROWS_PER_BLOCK))
        dist = distance_block(metric, data.points[cand], data.points)
        instr.add_distances(dist.size)
        deltas = exact_swap_deltas(state, dist)
        r, j = _argmin_flat(deltas)
        if deltas[r, j] < best[0] or best[1] < 0:
            best = (float(deltas[r, j]), int(cand[r]), int(j))
    return best[1], best[2], best[0]


def pam_fit(data: Dataset, metric: Metric, k: int, max_swaps: int, instr: Instrumentation):
    """Full PAM: ``k`` greedy BUILD steps then at most ``max_swaps`` improving swaps.

    Returns ``(medoids, loss, swaps, trace)``; ``trace`` lists
    ``(swap number, point in, medoid position out, loss after)``.
    """
    metric = Metric.parse(metric)
    if not 1 <= k <= data.n:
        raise UsageError(f"k must be in [1, {data.n}], got {k}")
    if max_swaps < 0:
        raise UsageError("max_swaps must be nonnegative")

    instr.phase = "build"
    medoids: list = []
    best = np.full(data.n, np.inf)
    for _ in range(k):
        m, row = pam_build_step(data, metric, medoids, instr, best=best, return_row=True)
        medoids.append(m)
        best = np.minimum(best, row)

    trace = []
    if max_swaps == 0:
        return medoids, float(best.sum()), 0, trace

    instr.phase = "swap"
    state = assign_nearest(data, metric, medoids, instr)
    while instr.swap_iterations < max_swaps:
        instr.swap_searches += 1
        i, j, delta = pam_swap_step(data, metric, state, instr)
        if not delta < 0:
            break
        old = state.loss()
        medoids[j] = i
        new_state = assign_nearest(data, metric, medoids, instr)
        if not new_state.loss() < old:
            medoids[j] = state.medoids[j]
            break
        state = new_state
        instr.swap_iterations += 1
        trace.append((instr.swap_iterations, i, j, state.loss()))
    return list(state.medoids), state.loss(), instr.swap_iterations, trace
