import dataclasses
import math

import numpy as np
import pytest

from conftest import small_config
from tempnet import engine, epidemic, interventions, network, sampling, spatial
from tempnet.config import DesignConfig, SimConfig, SpatialConfig, StrainSeed


def _traced(monkeypatch, calls):
    hooks = {
        "group_centers": (spatial, "step_group_centers"),
        "node_offsets": (spatial, "step_node_offsets"),
        "deaths": (spatial, "draw_deaths"),
        "insertions": (spatial, "draw_insertions"),
        "link_dissolution": (network, "dissolve_links"),
        "link_formation": (network, "form_links"),
        "transmission": (epidemic, "contact_and_transmit_step"),
        "stage_progression": (epidemic, "progress_stages"),
        "designs": (sampling, "design_step"),
        "interventions": (interventions, "pair_strategy_update"),
        "diagnostics": (engine.Recorder, "record"),
    }
    # The first active step of a design draws its initial sample instead of stepping.
    hooks["designs_init"] = (sampling, "init_sample")
    for phase, (owner, name) in hooks.items():
        phase = phase.replace("_init", "")
        fn = getattr(owner, name)

        def wrapped(*a, _fn=fn, _phase=phase, **kw):
            calls.append(_phase)
            return _fn(*a, **kw)
        monkeypatch.setattr(owner, name, wrapped)


def test_phase_order(monkeypatch):
    cfg = small_config(designs=[DesignConfig(name="lt", init="srswor", init_n=5)])
    cfg.epidemic.seed_step = 0
    state = engine.init_simulation(cfg)
    calls = []
    _traced(monkeypatch, calls)
    engine.advance(state, 3)
    assert calls == list(engine.PHASES) * 3


def test_series_columns():
    cfg = small_config(designs=[DesignConfig(name="a"), DesignConfig(name="b")])
    cfg.epidemic.strains = [StrainSeed(), StrainSeed(early_factor=1)]
    cols = engine.series_columns(cfg)
    assert cols[:len(engine.BASE_COLUMNS)] == engine.BASE_COLUMNS
    assert cols[len(engine.BASE_COLUMNS):] == ["strain_0", "strain_1", "sample_a", "sample_b"]
    assert engine.BASE_COLUMNS[:3] == ["step", "population", "edges"]


def test_empty_initial_population_runs():
    cfg = SimConfig(n_target=50, k_groups=2, horizon=20, rng_seed=1)
    cfg.spatial.lam = 0.0
    cfg.epidemic.seed_step = 0
    state = engine.init_simulation(cfg.validate())
    assert len(state.pop) == 0
    for _ in range(20):
        engine.step_simulation(state)
        engine.check_integrity(state)
    # Insertions refill an empty world.
    pop = state.recorder.series["population"]
    assert pop[0] > 0 and abs(pop[-1] - 50) < 25


def test_frozen_dynamics_keep_edges_and_population():
    cfg = small_config(horizon=50)
    cfg.network.amplitude = 0.0
    cfg.demography.mortality = 0.0
    cfg.epidemic.enabled = False
    run = engine.run_simulation(cfg)
    pop = run.column("population")
    assert run.column("edges").max() == 0
    assert (np.diff(pop) >= 0).all()
    assert run.column("deaths_background").sum() == 0


def test_same_seed_same_run():
    cfg = small_config(horizon=40)
    a = engine.run_simulation(cfg)
    b = engine.run_simulation(cfg)
    assert a.series == b.series and a.ecf == b.ecf and a.degree_strata == b.degree_strata
    c = engine.run_simulation(dataclasses.replace(cfg, rng_seed=8))
    assert a.series != c.series


def test_integrity_every_step():
    cfg = small_config(designs=[DesignConfig(name="lt", init="srswor", init_n=10, follow_p=0.5, n_target=15),
                                DesignConfig(name="rw", kind="random_walk", jump_p=0.1),
                                DesignConfig(name="rds", kind="rds", init_n=3)])
    cfg.demography.mortality = 0.01
    cfg.epidemic.seed_step = 0
    state = engine.init_simulation(cfg)
    for _ in range(80):
        engine.step_simulation(state)
        engine.check_integrity(state)
    assert state.recorder.series["sample_rw"][-1] == 1


def test_replicates_match_sequential_runs():
    cfg = small_config(horizon=15)
    reps = engine.run_replicates(cfg, 2, seed_base=100)
    assert [r.seed for r in reps] == [100, 101]
    for r in reps:
        solo = engine.run_simulation(dataclasses.replace(cfg, rng_seed=r.seed))
        assert r.series == solo.series
    assert engine.run_replicates(cfg, 1, 100)[0].series == reps[0].series
    with pytest.raises(ValueError):
        engine.run_replicates(cfg, 0, 1)


def test_replicates_parallel_equals_sequential():
    cfg = small_config(horizon=10)
    seq = engine.run_replicates(cfg, 2, 5, workers=1)
    par = engine.run_replicates(cfg, 2, 5, workers=2)
    assert [r.series for r in seq] == [r.series for r in par]


def test_prevalence_matches_counts():
    cfg = small_config(horizon=60)
    cfg.epidemic.seed_step = 0
    run = engine.run_simulation(cfg)
    n = run.column("population")
    assert np.allclose(run.column("prevalence"), run.column("infected") / n)
    assert np.array_equal(run.column("infected"),
                          run.column("early") + run.column("chronic") + run.column("late"))
    assert np.array_equal(run.column("step"), np.arange(1, 61))
    assert np.array_equal(run.column("incidence"),
                          run.column("incidence_adopters") + run.column("incidence_nonadopters"))


def test_lognormal_group_sizes_cv():
    cfg = SpatialConfig(lambda_mode="lognormal", lognormal_sdlog=0.8)
    g = spatial.init_groups(20_000, cfg, 1000, np.random.default_rng(3))
    cv = g.lam.std() / g.lam.mean()
    assert abs(cv - math.sqrt(math.exp(0.8 ** 2) - 1)) < 0.05
    assert g.target.sum() == pytest.approx(1000)
