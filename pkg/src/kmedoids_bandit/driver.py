"""Run orchestration and the result model."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bandit import (
    BanditConfig,
    CachedSource,
    DirectSource,
    banditpam_swap,
    banditpampp_swap,
    build_search,
)
from .cache import PicCache, derive_seed, new_permutation
from .core import (
    Dataset,
    Instrumentation,
    MedoidState,
    Metric,
    UsageError,
    assign_nearest,
    clustering_loss,
)
from .exact import exact_swap_deltas, pam_fit


class Algorithm(str, enum.Enum):
    PAM = "pam"
    BP = "bp"
    BP_VA = "bp-va"
    BP_PIC = "bp-pic"
    BPPP = "bp++"

    @classmethod
    def parse(cls, value: "Algorithm | str") -> "Algorithm":
        if isinstance(value, Algorithm):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise UsageError(f"unknown algorithm {value!r}") from None

    @property
    def virtual_arms(self) -> bool:
        return self in (Algorithm.BP_VA, Algorithm.BPPP)

    @property
    def permutation_cache(self) -> bool:
        return self in (Algorithm.BP_PIC, Algorithm.BPPP)


@dataclass
class ClusteringResult:
    algorithm: str
    k: int
    n: int
    metric: str
    medoids: list
    loss: float
    swap_iterations: int
    build_distance_count: int
    swap_distance_count: int
    cache_hits: int
    cache_misses: int
    seed: int
    wall_ms: float
    trace: list = field(default_factory=list)
    swap_searches: int = 0
    swap_cache_hits: int = 0
    swap_cache_misses: int = 0

    @property
    def normalized_distance_count(self) -> float:
        return normalized_cost(self)

    @property
    def normalized_wall_ms(self) -> float:
        return self.wall_ms / (self.swap_iterations + 1)

    @property
    def cache_hit_rate(self) -> float:
        lookups = self.cache_hits + self.cache_misses
        return self.cache_hits / lookups if lookups else 0.0

    @property
    def swap_cache_hit_rate(self) -> float:
        lookups = self.swap_cache_hits + self.swap_cache_misses
        return self.swap_cache_hits / lookups if lookups else 0.0

    def to_json_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "k": self.k,
            "n": self.n,
            "metric": self.metric,
            "medoids": list(self.medoids),
            "loss": self.loss,
            "swap_iterations": self.swap_iterations,
            "build_distance_count": self.build_distance_count,
            "swap_distance_count": self.swap_distance_count,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "normalized_distance_count": self.normalized_distance_count,
            "seed": self.seed,
            "wall_ms": self.wall_ms,
            "trace": [
                {"swap": s, "in": i, "out_position": j, "loss": loss}
                for s, i, j, loss in self.trace
            ],
        }


def normalized_cost(result: ClusteringResult) -> float:
    """Distance computations per (swap iteration + 1); the +1 stands for BUILD."""
    total = result.build_distance_count + result.swap_distance_count
    return total / (result.swap_iterations + 1)


def update_state_after_swap(
    data: Dataset,
    metric: Metric,
    state: MedoidState,
    out_pos: int,
    in_idx: int,
    instr: Instrumentation,
    cache: Optional[PicCache] = None,
) -> MedoidState:
    """Replace medoid ``out_pos`` by point ``in_idx`` and recompute the assignment."""
    medoids = list(state.medoids)
    if not 0 <= out_pos < len(medoids):
        raise UsageError(f"medoid position {out_pos} out of range")
    if medoids[out_pos] == in_idx:
        return state
    if in_idx in medoids:
        raise UsageError(f"point {in_idx} is already a medoid")
    medoids[out_pos] = int(in_idx)
    return assign_nearest(data, metric, medoids, instr, cache)


def _bandit_fit(data, metric, k, algorithm: Algorithm, config: BanditConfig, instr):
    n = data.n
    cache = None
    if algorithm.permutation_cache:
        cache = PicCache(new_permutation(n, derive_seed(config.seed, 0)), config.cache_width)
        shared = CachedSource(data, metric, cache)
    steps = iter(range(1 << 62))

    def next_source():
        step = next(steps)
        if cache is not None:
            return shared
        order = new_permutation(n, derive_seed(config.seed, step)).order
        return DirectSource(data, metric, order)

    instr.phase = "build"
    medoids: list = []
    best = np.full(n, np.inf)
    for _ in range(k):
        source = next_source()
        m = build_search(data, source, medoids, best, config, instr)
        medoids.append(m)
        best = np.minimum(best, source.full_rows([m], instr)[0])

    trace = []
    if config.max_swaps == 0:
        return medoids, float(best.sum()), trace

    instr.phase = "swap"
    swap = banditpampp_swap if algorithm.virtual_arms else banditpam_swap
    direct = DirectSource(data, metric, np.arange(n))
    state = assign_nearest(data, metric, medoids, instr, cache)
    while instr.swap_iterations < config.max_swaps:
        instr.swap_searches += 1
        source = next_source()
        i, j, _ = swap(data, source, state, config, instr)
        row = (source if cache is not None else direct).full_rows([i], instr)
        delta = float(exact_swap_deltas(state, row)[0, j])
        if not delta < 0:
            break
        new_state = update_state_after_swap(data, metric, state, j, i, instr, cache)
        if not new_state.loss() < state.loss():
            break
        state = new_state
        instr.swap_iterations += 1
        trace.append((instr.swap_iterations, i, j, state.loss()))
    return list(state.medoids), state.loss(), trace


def fit(
    data: Dataset,
    metric: "Metric | str",
    k: int,
    algorithm: "Algorithm | str" = Algorithm.BPPP,
    config: Optional[BanditConfig] = None,
    instr: Optional[Instrumentation] = None,
) -> ClusteringResult:
    """Cluster ``data`` into ``k`` medoids with the chosen algorithm."""
    metric = Metric.parse(metric)
    algorithm = Algorithm.parse(algorithm)
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= data.n:
        raise UsageError(f"k must be an integer in [1, {data.n}], got {k!r}")
    k = int(k)
    config = (config or BanditConfig()).resolve(data.n, k)
    instr = instr if instr is not None else Instrumentation()

    start = time.perf_counter()
    if algorithm is Algorithm.PAM:
        medoids, loss, _, trace = pam_fit(data, metric, k, config.max_swaps, instr)
    else:
        medoids, loss, trace = _bandit_fit(data, metric, k, algorithm, config, instr)
    wall_ms = (time.perf_counter() - start) * 1000.0

    check = clustering_loss(data, metric, medoids)
    if not math.isclose(check, loss, rel_tol=1e-9, abs_tol=1e-12):
        raise RuntimeError(f"loss self-check failed: {loss!r} vs {check!r}")

    return ClusteringResult(
        algorithm=algorithm.value,
        k=k,
        n=data.n,
        metric=metric.value,
        medoids=sorted(int(m) for m in medoids),
        loss=float(loss),
        swap_iterations=instr.swap_iterations,
        build_distance_count=instr.build_distance_count,
        swap_distance_count=instr.swap_distance_count,
        cache_hits=instr.cache_hits,
        cache_misses=instr.cache_misses,
        seed=config.seed,
        wall_ms=wall_ms,
        trace=trace,
        swap_searches=instr.swap_searches,
        swap_cache_hits=instr.swap_cache_hits,
        swap_cache_misses=instr.swap_cache_misses,
    )
