import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graph
from tempnet import sampling
from tempnet.config import DesignConfig
from tempnet.sampling import SampleState


def test_inclusion_prob_examples():
    assert sampling.link_trace_inclusion_prob([]) == 0.0
    assert sampling.link_trace_inclusion_prob([0.5, 0.5]) == 0.75
    assert sampling.link_trace_inclusion_prob([0.3, 0.3, 0.3]) == pytest.approx(0.657, abs=1e-12)
    assert sampling.link_trace_inclusion_prob([1.0, 0.2]) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), max_size=12))
def test_inclusion_prob_bounds(ps):
    pi = sampling.link_trace_inclusion_prob(ps)
    assert max(ps, default=0.0) - 1e-12 <= pi <= min(1.0, sum(ps)) + 1e-12


def test_removal_q_examples():
    assert sampling.removal_q(30, 20) == pytest.approx(1 / 3)
    assert sampling.removal_q(20, 20) == 0.0
    assert sampling.removal_q(5, 20) == 0.0


def test_effective_selection_prob():
    assert sampling.effective_selection_prob(0.4, True, 0.5) == pytest.approx(0.2)
    assert sampling.effective_selection_prob(0.4, False, 0.5) == pytest.approx(0.4)
    assert sampling.effective_selection_prob(0.4, True, 0.0) == 0.0
    ramp = sampling.effective_selection_prob(0.4, True, 0.0, time_since=5, recovery_days=10)
    assert ramp == pytest.approx(0.2)
    assert sampling.effective_selection_prob(0.4, True, 0.0, time_since=50, recovery_days=10) == pytest.approx(0.4)


def _state(n, **kw):
    return SampleState.empty(DesignConfig(**kw), n)


def test_init_designs(rng):
    pop, _ = graph(100, [])
    pos = np.tile([0.5, 0.5], (100, 1))
    pos[50:] = [0.1, 0.1]
    s = _state(100, init="srswor", init_n=10)
    assert len(sampling.init_sample(s, pop, pos, 0, rng)) == 10 and s.size == 10
    s = _state(100, init="srswor", init_n=101)
    with pytest.raises(sampling.SamplingError):
        sampling.init_sample(s, pop, pos, 0, rng)
    s = _state(100, init="spatial_bernoulli", init_p=1.0, init_radius=0.05)
    assert sampling.init_sample(s, pop, pos, 0, rng).tolist() == list(range(50))
    s = _state(100, init="none")
    assert len(sampling.init_sample(s, pop, pos, 0, rng)) == 0
    s = _state(100, init="with_replacement", init_n=30)
    rows = sampling.init_sample(s, pop, pos, 0, rng)
    assert s.times_selected.sum() == 30 and len(rows) == s.size <= 30


def test_bernoulli_init_size_distribution():
    pop, _ = graph(200, [])
    pos = np.zeros((200, 2))
    rng = np.random.default_rng(3)
    sizes = []
    for _ in range(2000):
        s = _state(200, init="bernoulli", init_p=0.1)
        sizes.append(len(sampling.init_sample(s, pop, pos, 0, rng)))
    se = math.sqrt(200 * 0.1 * 0.9 / 2000)
    assert abs(np.mean(sizes) - 20) < 3 * se


def test_star_tracing_count_is_binomial():
    # Center in the sample, ten leaves outside, follow_p 0.3 and no removal.
    pop, e = graph(11, [(0, k) for k in range(1, 11)])
    rng = np.random.default_rng(4)
    counts = []
    for _ in range(20_000):
        s = _state(11, follow_p=0.3, removal="none")
        s.add(np.array([0]), 0)
        added, _ = sampling.link_trace_step(s, e, 11, 1, rng)
        counts.append(len(added))
    counts = np.array(counts)
    assert abs(counts.mean() - 3.0) < 3 * math.sqrt(2.1 / len(counts))
    assert abs(counts.var() - 2.1) < 0.1


def test_inclusion_probs_combine_links():
    pop, e = graph(4, [(0, 2), (1, 2), (1, 3)])
    s = _state(4, follow_p=0.5)
    s.add(np.array([0, 1]), 0)
    pi = sampling.inclusion_probs(s, e, 4, 1)
    assert pi.tolist() == [0.0, 0.0, 0.75, 0.5]


def test_replacement_zero_never_readds(rng):
    pop, e = graph(2, [(0, 1)])
    s = _state(2, follow_p=1.0, replacement=0.0, removal="none", p_r=1.0)
    s.add(np.array([0, 1]), 0)
    s.remove(np.array([1]), 1)
    for t in range(2, 200):
        added, _ = sampling.link_trace_step(s, e, 2, t, rng)
        assert 1 not in added.tolist()
    assert not s.member[1]


def test_removal_moves_towards_target():
    rng = np.random.default_rng(5)
    sizes = []
    for _ in range(5000):
        s = _state(60, n_target=20)
        s.add(np.arange(60), 0)
        sizes.append(60 - len(sampling.removal_step(s, 1, rng)))
    assert abs(np.mean(sizes) - 20) < 3 * math.sqrt(60 * (2 / 3) * (1 / 3) / 5000)


def test_rds_hub_recruits_coupons_then_stops(rng):
    pop, e = graph(6, [(0, k) for k in range(1, 6)])
    s = _state(6, kind="rds", coupons=3, removal="none")
    s.add(np.array([0]), 0)
    s.coupons[0] = 3
    added, _ = sampling.rds_coupon_step(s, e, 6, 1, rng)
    assert len(added) == 3 and s.coupons[0] == 0
    assert (s.coupons[added] == 3).all()
    # Leaves have no other neighbors outside the sample and the hub holds no coupons.
    assert len(sampling.rds_coupon_step(s, e, 6, 2, rng)[0]) == 0


def test_rds_partial_recruitment_keeps_coupons(rng):
    pop, e = graph(4, [(0, 1), (0, 2), (0, 3)])
    s = _state(4, kind="rds", coupons=5, removal="none")
    s.add(np.array([0]), 0)
    s.coupons[0] = 5
    added, _ = sampling.rds_coupon_step(s, e, 4, 1, rng)
    assert added.tolist() == [1, 2, 3] and s.coupons[0] == 2


def test_random_walk_uniform_jump():
    indptr = np.zeros(6, dtype=np.int64)
    nbrs = np.zeros(0, dtype=np.int64)
    rng = np.random.default_rng(6)
    moves = [sampling.random_walk_move(2, indptr, nbrs, 5, 1.0, 0.5, rng) for _ in range(20_000)]
    counts = np.bincount(moves, minlength=5)
    assert counts[2] == 0
    assert np.allclose(counts[[0, 1, 3, 4]] / 20_000, 0.25, atol=0.015)


def test_random_walk_follows_edges():
    pop, e = graph(3, [(0, 1), (1, 2)])
    indptr, nbrs, _ = e.adjacency(3)
    rng = np.random.default_rng(7)
    moves = [sampling.random_walk_move(1, indptr, nbrs, 3, 0.0, 0.5, rng) for _ in range(10_000)]
    assert set(moves) == {0, 2}
    assert abs(np.mean(np.array(moves) == 0) - 0.5) < 0.02


def test_random_walk_keeps_one_member(rng):
    pop, e = graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    s = _state(5, kind="random_walk", jump_p=0.1)
    sampling.init_sample(s, pop, np.zeros((5, 2)), 0, rng)
    for t in range(1, 300):
        sampling.random_walk_step(s, e, 5, t, rng)
        assert s.size == 1


def test_keep_compacts_and_reports_lost():
    s = _state(4)
    s.add(np.array([1, 3]), 0)
    assert s.keep(np.array([True, False, True, True])) == 1
    assert s.member.tolist() == [False, False, True]


def test_state_dict_round_trip():
    cfg = DesignConfig()
    s = SampleState.empty(cfg, 5)
    s.add(np.array([0, 4]), 3)
    s.started = True
    back = SampleState.from_dict(cfg, s.to_dict())
    assert back.to_dict() == s.to_dict()


def test_sample_size_hovers_at_target_under_heavy_inflow():
    pop, e = graph(200, [])
    s = _state(200, init="none", follow_p=0.0, p_r=0.5, n_target=20)
    rng = np.random.default_rng(8)
    sizes = []
    for t in range(1, 2001):
        sampling.link_trace_step(s, e, 200, t, rng)
        sizes.append(s.size)
    assert abs(np.mean(sizes[100:]) / 20 - 1) < 0.10


def test_rds_single_coupon_path_growth_bound(rng):
    n = 12
    pop, e = graph(n, [(k, k + 1) for k in range(n - 1)])
    s = _state(n, kind="rds", coupons=1, removal="none")
    s.add(np.array([0]), 0)
    s.coupons[0] = 1
    for t in range(1, 30):
        before = s.size
        holders = int((s.member & (s.coupons > 0)).sum())
        sampling.rds_coupon_step(s, e, n, t, rng)
        assert s.size - before <= holders
    assert s.size == n
