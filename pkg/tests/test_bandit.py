import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmedoids_bandit import (
    BanditConfig,
    Dataset,
    Instrumentation,
    Metric,
    UsageError,
    adaptive_search,
    assign_nearest,
    banditpam_swap,
    banditpampp_swap,
    fit,
    pam_build_step,
    pam_swap_step,
    swap_delta,
)
from kmedoids_bandit.bandit import (
    DELTA_CEILING,
    ArmTable,
    DirectSource,
    _eliminate,
    build_search,
    confidence_radius,
    estimate_sigma,
    swap_rewards,
)
from kmedoids_bandit.cache import new_permutation
from kmedoids_bandit.core import distance_block
from kmedoids_bandit.data import generate_synthetic
from kmedoids_bandit.exact import exact_swap_deltas

ALGOS = ["bp", "bp-va", "bp-pic", "bp++"]


def mixture(seed, n_per=100, dim=2):
    return generate_synthetic(3, n_per, dim, 1.0, seed)


def random_state(data, k, seed):
    rng = np.random.default_rng(seed)
    medoids = rng.choice(data.n, size=k, replace=False).tolist()
    return assign_nearest(data, Metric.L2, medoids, Instrumentation())


# --- confidence radius and sigma ---------------------------------------------

def test_confidence_radius_examples():
    assert confidence_radius(0.0, 0.3, 7) == 0.0
    assert confidence_radius(2.0, 0.01, 4) == pytest.approx(2.1460, abs=1e-4)
    radii = [confidence_radius(1.5, 1e-3, t) for t in range(1, 50)]
    assert all(a > b for a, b in zip(radii, radii[1:]))


@pytest.mark.parametrize("delta,t", [(0.0, 1), (1.0, 1), (-0.1, 1), (0.1, 0)])
def test_confidence_radius_errors(delta, t):
    with pytest.raises(UsageError):
        confidence_radius(1.0, delta, t)


def test_estimate_sigma_examples():
    assert estimate_sigma(np.ones((3, 10)), 1e-9).tolist() == [1e-9] * 3
    assert estimate_sigma(np.array([[0.0, -2.0]]), 1e-9)[0] == pytest.approx(math.sqrt(2))


def test_sigma_scales_linearly_under_l1():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(50, 3))
    c = 3.5
    rewards = distance_block(Metric.L1, pts[:5], pts)
    scaled = distance_block(Metric.L1, c * pts[:5], c * pts)
    np.testing.assert_allclose(estimate_sigma(scaled, 1e-12), c * estimate_sigma(rewards, 1e-12),
                               rtol=1e-12)


def test_config_defaults_and_validation():
    cfg = BanditConfig().resolve(100, 5)
    assert cfg.delta == 1 / (5 * 100**3)
    assert (cfg.batch_size, cfg.max_swaps, cfg.cache_width) == (100, 5, 1000)
    assert BanditConfig(delta=0.9).resolve(10, 2).delta == DELTA_CEILING
    for bad in (BanditConfig(delta=0.0), BanditConfig(delta=1.0), BanditConfig(batch_size=0),
                BanditConfig(max_swaps=-1), BanditConfig(cache_width=0)):
        with pytest.raises(UsageError):
            bad.resolve(10, 2)


# --- adaptive_search ----------------------------------------------------------

def test_single_arm_needs_no_rewards():
    calls = []
    arm = adaptive_search([7], lambda a, p: calls.append(1), lambda a: calls.append(1), 100, 0.01)
    assert arm == 7 and calls == []


def test_empty_arm_set():
    with pytest.raises(UsageError):
        adaptive_search([], None, None, 10, 0.1)


def test_deterministic_rewards_decided_after_one_batch():
    means = np.array([5.0, 3.0, 4.0, 3.5, 9.0])
    pulls = []

    def reward(arms, positions):
        pulls.append(positions.size)
        return np.repeat(means[arms][:, None], positions.size, axis=1)

    best = adaptive_search(range(5), reward, lambda a: means[a] * 1000, 1000, 1e-6, batch_size=100)
    assert best == int(np.argmin(means))
    assert pulls == [100]


def test_adaptive_search_exact_fallback_ties_lowest():
    reward = lambda arms, positions: np.zeros((arms.size, positions.size))
    exact = lambda arms: np.zeros(arms.size)
    assert adaptive_search([4, 2, 9], reward, exact, 250, 0.01, sigma_override=float("inf")) == 2


def test_build_search_strict_delta_matches_oracle():
    data = mixture(0)
    cfg = BanditConfig(delta=1e-10).resolve(data.n, 3)
    medoids, best = [], np.full(data.n, np.inf)
    d = distance_block(Metric.L2, data.points, data.points)
    for step in range(3):
        src = DirectSource(data, Metric.L2, new_permutation(data.n, step).order)
        m = build_search(data, src, medoids, best, cfg, Instrumentation())
        assert m == pam_build_step(data, Metric.L2, medoids, Instrumentation())
        medoids.append(m)
        best = np.minimum(best, d[m])


def test_confidence_radius_law_after_every_batch():
    data = mixture(1)
    state = random_state(data, 3, 0)
    cfg = BanditConfig().resolve(data.n, 3)
    order = new_permutation(data.n, 3).order
    src = DirectSource(data, Metric.L2, order)
    table = ArmTable(np.arange(data.n), 3)
    assert np.all(np.isinf(table.ci))
    checked, last_rows = [], []

    def check():
        if table.pulls:
            rows = last_rows[-1]
            expect = np.vectorize(lambda s: confidence_radius(s, cfg.delta, table.pulls))(
                table.sigma[rows])
            assert np.array_equal(table.ci[rows], expect)
            checked.append(table.pulls)

    def pull(rows, positions, lookups):
        check()
        last_rows.append(rows)
        dist = src.block(rows, positions, Instrumentation())
        return swap_rewards(state, dist, order[positions])

    def exact(rows, lookups):
        check()
        return exact_swap_deltas(state, src.full_rows(rows, Instrumentation()))

    _eliminate(table, pull, exact, data.n, cfg.delta, cfg.batch_size, cfg.sigma_floor, True)
    check()
    assert table.pulls <= data.n and len(checked) >= 2


# --- virtual arms -------------------------------------------------------------

@given(seed=st.integers(0, 10_000), k=st.integers(1, 4))
def test_virtual_arm_rewards_equal_swap_delta(seed, k):
    rng = np.random.default_rng(seed)
    pts = rng.integers(-6, 7, size=(12, 2)).astype(float)
    data = Dataset(pts)
    medoids = rng.choice(12, size=k, replace=False).tolist()
    state = assign_nearest(data, Metric.L1, medoids, Instrumentation())
    dist = distance_block(Metric.L1, pts, pts)
    rewards = swap_rewards(state, dist, np.arange(12))
    for i in range(12):
        for s in range(12):
            for j in range(k):
                assert rewards[i, s, j] == swap_delta(state, j, dist[i, s], s)


@pytest.mark.parametrize("swap", [banditpam_swap, banditpampp_swap])
def test_swap_search_agrees_with_oracle(swap):
    disagreements = 0
    for seed in range(20):
        data = mixture(seed)
        state = random_state(data, 3, seed)
        cfg = BanditConfig(seed=seed).resolve(data.n, 3)
        src = DirectSource(data, Metric.L2, new_permutation(data.n, seed).order)
        i, j, _ = swap(data, src, state, cfg, Instrumentation())
        oi, oj, _ = pam_swap_step(data, Metric.L2, state, Instrumentation())
        disagreements += (i, j) != (oi, oj)
    assert disagreements <= 1


def test_k1_variants_coincide():
    data = mixture(2)
    state = random_state(data, 1, 2)
    cfg = BanditConfig().resolve(data.n, 1)
    order = new_permutation(data.n, 0).order
    ia, ib = Instrumentation(), Instrumentation()
    a = banditpam_swap(data, DirectSource(data, Metric.L2, order), state, cfg, ia)
    b = banditpampp_swap(data, DirectSource(data, Metric.L2, order), state, cfg, ib)
    assert a == b and ia.build_distance_count == ib.build_distance_count


def test_per_pair_scan_costs_at_least_virtual_arms():
    for seed in range(5):
        data = mixture(seed)
        state = random_state(data, 3, seed)
        cfg = BanditConfig(seed=seed).resolve(data.n, 3)
        order = new_permutation(data.n, seed).order
        ia, ib = Instrumentation(), Instrumentation()
        banditpam_swap(data, DirectSource(data, Metric.L2, order), state, cfg, ia)
        banditpampp_swap(data, DirectSource(data, Metric.L2, order), state, cfg, ib)
        assert ia.total_distance_count >= ib.total_distance_count


def test_medoid_candidate_never_chosen_over_strict_improvement():
    data = mixture(4)
    state = random_state(data, 3, 9)
    cfg = BanditConfig().resolve(data.n, 3)
    src = DirectSource(data, Metric.L2, new_permutation(data.n, 1).order)
    _, _, oracle_delta = pam_swap_step(data, Metric.L2, state, Instrumentation())
    assert oracle_delta < 0
    i, _, _ = banditpampp_swap(data, src, state, cfg, Instrumentation())
    assert i not in state.medoids


def test_full_pass_is_bit_identical_to_oracle():
    data = mixture(5)
    state = random_state(data, 3, 5)
    cfg = BanditConfig(sigma_override=float("inf")).resolve(data.n, 3)
    src = DirectSource(data, Metric.L2, new_permutation(data.n, 5).order)
    got = banditpampp_swap(data, src, state, cfg, Instrumentation())
    assert got == pam_swap_step(data, Metric.L2, state, Instrumentation())

    pam = fit(data, "l2", 3, "pam")
    for algo in ALGOS:
        r = fit(data, "l2", 3, algo, BanditConfig(sigma_override=float("inf")))
        assert (r.medoids, r.loss, r.trace) == (pam.medoids, pam.loss, pam.trace)


# --- whole-fit properties -----------------------------------------------------

def test_sample_count_ordering():
    for seed in range(3):
        data = mixture(seed)
        tot = {}
        for algo in ALGOS:
            r = fit(data, "l2", 3, algo, BanditConfig(seed=seed))
            tot[algo] = r.build_distance_count + r.swap_distance_count
        assert tot["bp++"] <= tot["bp-va"] <= tot["bp"]
        assert tot["bp++"] <= tot["bp-pic"] <= tot["bp"]


@pytest.mark.parametrize("algo", ALGOS)
def test_loss_descent(algo):
    data = mixture(7, n_per=60)
    r = fit(data, "l2", 4, algo, BanditConfig(seed=1, max_swaps=10))
    losses = [entry[3] for entry in r.trace]
    assert all(a > b for a, b in zip(losses, losses[1:]))
