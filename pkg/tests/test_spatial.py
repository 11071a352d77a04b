import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tempnet import spatial
from tempnet.config import ConfigError, DemographyConfig, SpatialConfig
from tempnet.spatial import Groups


def test_init_groups_k1_and_rejects_k0(rng):
    g = spatial.init_groups(1, SpatialConfig(), 100, rng)
    assert len(g) == 1 and ((g.center >= 0) & (g.center <= 1)).all()
    with pytest.raises(ConfigError):
        spatial.init_groups(0, SpatialConfig(), 100, rng)


def test_init_groups_center_mean_clt(rng):
    k = 10_000
    g = spatial.init_groups(k, SpatialConfig(), 100, rng)
    se = math.sqrt(1 / 12 / k)
    assert np.all(np.abs(g.center.mean(axis=0) - 0.5) < 3 * se)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50, allow_nan=False))
def test_reflect_unit_stays_in_square(x):
    y, _ = spatial.reflect_unit(np.array([x]))
    assert 0.0 <= y[0] <= 1.0


def test_reflect_unit_values():
    y, odd = spatial.reflect_unit(np.array([0.3, 1.2, -0.25, 2.5]))
    assert np.allclose(y, [0.3, 0.8, 0.25, 0.5])
    assert odd.tolist() == [False, True, True, False]


def test_degenerate_proposal_drifts_linearly(rng):
    cfg = SpatialConfig(sigma_eps=0.0)
    g = Groups(center=np.array([[0.5, 0.5]]), delta=np.array([[0.01, -0.02]]), target=np.ones(1), lam=np.ones(1))
    for _ in range(10):
        spatial.step_group_centers(g, cfg, rng)
    assert np.allclose(g.center, [[0.6, 0.3]])
    assert np.allclose(g.delta, [[0.01, -0.02]])


def test_reflection_flips_momentum(rng):
    cfg = SpatialConfig(sigma_eps=0.0)
    g = Groups(center=np.array([[0.99, 0.5]]), delta=np.array([[0.03, 0.0]]), target=np.ones(1), lam=np.ones(1))
    spatial.step_group_centers(g, cfg, rng)
    assert np.allclose(g.center, [[0.98, 0.5]])
    assert np.allclose(g.delta, [[-0.03, 0.0]])


def test_mh_tail_acceptance_rate():
    # From delta = 0 with eps ~ N(0, s^2 I) the acceptance probability is
    # E[exp(-|eps|^2 / (2 sigma^2))] = 1 / (1 + s^2 / sigma^2), here ~1e-6.
    rng = np.random.default_rng(8)
    n, ratio = 1_000_000, 1000.0
    _, accept = spatial.mh_displacement(np.zeros((n, 2)), 1.0, ratio, rng)
    expected = n / (1 + ratio ** 2)
    # Poisson(~1): more than 8 accepts has probability < 1e-5.
    assert accept.sum() <= 8
    assert stats.poisson(expected).sf(accept.sum() - 1) > 1e-4


def test_mh_displacement_matches_acceptance_formula():
    sigma_delta, sigma_eps = 1.0, 0.7
    delta = np.full((200_000, 2), 0.0)
    delta[:, 0] = 2.5
    rng = np.random.default_rng(3)
    _, accept = spatial.mh_displacement(delta, sigma_delta, sigma_eps, rng)
    # Independent evaluation: expected acceptance E[min(1, f(d+e)/f(d))] by quadrature over e.
    rng2 = np.random.default_rng(99)
    e = rng2.normal(0, sigma_eps, size=(400_000, 2))
    prop = delta[0] + e
    ratio = np.exp(-(np.sum(prop ** 2, axis=1) - 2.5 ** 2) / 2)
    expected = np.minimum(1, ratio).mean()
    se = math.sqrt(expected * (1 - expected) / len(accept))
    assert abs(accept.mean() - expected) < 4 * se + 0.002


def test_displacement_stationary_distribution():
    cfg = SpatialConfig(sigma_delta=0.01, sigma_eps=0.006)
    rng = np.random.default_rng(5)
    g = spatial.init_groups(20, cfg, 100, rng)
    steps = 20_000
    out = np.empty((steps, 20, 2))
    for t in range(steps):
        spatial.step_group_centers(g, cfg, rng)
        out[t] = g.delta
    x = out[::50].reshape(-1)  # thinned well past the chain's autocorrelation time
    assert stats.kstest(x / cfg.sigma_delta, "norm").pvalue > 0.01
    assert stats.kstest(out.reshape(-1) / cfg.sigma_delta, "norm").statistic < 0.02


def test_innovation_sd_white_noise_and_rejects_nonstationary():
    assert spatial.innovation_sd(0.0, 0.0, 0.3) == pytest.approx(0.3)
    with pytest.raises(ConfigError):
        spatial.innovation_sd(1.2, 0.0, 1.0)


@pytest.mark.parametrize("phi1,phi2", [(0.5, 0.2), (0.9, -0.3), (-0.4, 0.5), (0.0, 0.0)])
def test_innovation_sd_matches_yule_walker(phi1, phi2):
    # Independent route: stationary variance from the Yule-Walker system with unit innovations.
    a = np.array([[1.0, -phi1, -phi2], [-phi1, 1.0 - phi2, 0.0], [-phi2, -phi1, 1.0]])
    g0 = np.linalg.solve(a, [1.0, 0.0, 0.0])[0]
    assert spatial.innovation_sd(phi1, phi2, 1.0) == pytest.approx(1.0 / math.sqrt(g0), rel=1e-12)


def test_offset_variance_long_run():
    rng = np.random.default_rng(11)
    sigma = 0.03
    off, prev = spatial.stationary_offsets(50, 0.5, 0.2, sigma, rng)
    acc = np.empty((20_000, 50, 2))
    for t in range(20_000):
        off, prev = spatial.step_node_offsets(off, prev, 0.5, 0.2, sigma, rng)
        acc[t] = off
    assert abs(acc.var() / sigma ** 2 - 1) < 0.10


def test_stationary_offsets_joint_law(rng):
    cur, prev = spatial.stationary_offsets(200_000, 0.5, 0.2, 1.0, rng)
    assert cur.var() == pytest.approx(1.0, abs=0.01)
    assert np.corrcoef(cur[:, 0], prev[:, 0])[0, 1] == pytest.approx(0.5 / 0.8, abs=0.01)


def test_distance_examples():
    pos = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert spatial.distance(pos, 0, 1) == 5.0
    assert spatial.distance(pos, 1, 1) == 0.0
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(10_000, 2, 2))
    for i in range(0, 10_000, 97):
        assert spatial.distance(pts[i], 0, 1) == spatial.distance(pts[i], 1, 0)


def test_group_weights_exact():
    w = spatial.group_weights(np.array([50.0, 50.0]), np.array([50, 0]))
    assert w.tolist() == [1.0, 50.0]


def test_no_insertions_at_target(rng):
    g = Groups(center=np.zeros((2, 2)), delta=np.zeros((2, 2)), target=np.array([50.0, 50.0]), lam=np.zeros(2))
    got = spatial.draw_insertions(100, 100, g, np.repeat([0, 1], 50), DemographyConfig(), rng)
    assert len(got) == 0
    bg, dis = spatial.draw_deaths(100, 0.0, np.zeros(100), rng)
    assert not bg.any() and not dis.any()


def test_insertions_fill_empty_group_with_weight_ratio(rng):
    g = Groups(center=np.zeros((2, 2)), delta=np.zeros((2, 2)), target=np.array([50.0, 50.0]), lam=np.zeros(2))
    got = np.concatenate([spatial.draw_insertions(50, 60, g, np.zeros(50, dtype=np.int64), DemographyConfig(), rng)
                          for _ in range(2000)])
    share = (got == 1).mean()
    assert share == pytest.approx(50 / 51, abs=0.005)


def test_draw_deaths_rates(rng):
    n = 400_000
    bg, dis = spatial.draw_deaths(n, 0.01, np.full(n, 0.05), rng)
    assert not (bg & dis).any()
    assert bg.mean() == pytest.approx(0.01, abs=0.001)
    assert (bg | dis).mean() == pytest.approx(1 - 0.99 * 0.95, abs=0.002)
