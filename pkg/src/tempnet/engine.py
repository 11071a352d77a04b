"""Simulation clock, per-step phase order, and replicate runner.

Each step runs these phases in this order, drawing from one RNG stream:

 1. group-center update          7. contact and transmission
 2. node-offset update           8. stage progression
 3. deaths (background+disease)  9. sampling-design steps (config order)
 4. insertions                  10. design actions and pair-protocol updates
 5. link dissolution            11. diagnostics
 6. link formation

Changing this order changes every trajectory; the golden-sequence test
guards it.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import epidemic, interventions, network, sampling, spatial
from .config import SimConfig
from .diagnostics import EcfAccumulator, RunOutput, infection_degree_comparison, summarize, tail_dispersion
from .sampling import SampleState
from .spatial import Groups
from .state import CHRONIC, EARLY, LATE, SUSCEPTIBLE, Edges, Population

PHASES = (
    "group_centers", "node_offsets", "deaths", "insertions", "link_dissolution", "link_formation",
    "transmission", "stage_progression", "designs", "interventions", "diagnostics",
)

BASE_COLUMNS = [
    "step", "population", "edges", "mean_degree", "infected", "prevalence", "incidence",
    "early", "chronic", "late", "treated", "mean_early_factor", "births", "deaths_background",
    "deaths_disease", "edges_formed", "edges_dissolved", "cures", "reinfections_cured",
    "incidence_adopters", "incidence_nonadopters", "susceptible_adopters", "susceptible_nonadopters",
]


def series_columns(config: SimConfig) -> list[str]:
    cols = list(BASE_COLUMNS)
    cols += [f"strain_{i}" for i in range(len(config.epidemic.strains))]
    cols += [f"sample_{d.name}" for d in config.designs]
    return cols


@dataclass
class StepReport:
    t: int = 0
    births: int = 0
    deaths_background: int = 0
    deaths_disease: int = 0
    edges_lost_to_death: int = 0
    edges_dissolved: int = 0
    edges_formed: int = 0
    infections: int = 0
    progressions: int = 0
    sample_added: int = 0
    sample_removed: int = 0
    tests: int = 0
    cures: int = 0
    treatments: int = 0
    vaccinations: int = 0
    pair_tests: int = 0


class Recorder:
    """Per-step series, periodic degree strata, and the running ECF of one series."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.columns = series_columns(config)
        self.series: dict[str, list] = {c: [] for c in self.columns}
        self.degree_strata: list[dict] = []
        self.ecf: Optional[EcfAccumulator] = None
        self.ecf_snapshots: list[dict] = []

    def record(self, state: "SimState", report: StepReport, new_inf: np.ndarray, cured_before: np.ndarray) -> None:
        pop, edges, t = state.pop, state.edges, state.t
        n = len(pop)
        inf = pop.stage != SUSCEPTIBLE
        n_inf = int(inf.sum())
        ef = epidemic.early_factor(pop)
        sus = ~inf
        row = {
            "step": t, "population": n, "edges": len(edges),
            "mean_degree": 2.0 * len(edges) / n if n else 0.0,
            "infected": n_inf, "prevalence": n_inf / n if n else 0.0,
            "incidence": len(new_inf),
            "early": int((pop.stage == EARLY).sum()), "chronic": int((pop.stage == CHRONIC).sum()),
            "late": int((pop.stage == LATE).sum()),
            "treated": int(pop.treated.sum()),
            "mean_early_factor": float(ef.mean()) if len(ef) else 0.0,
            "births": report.births, "deaths_background": report.deaths_background,
            "deaths_disease": report.deaths_disease, "edges_formed": report.edges_formed,
            "edges_dissolved": report.edges_dissolved, "cures": report.cures,
            "reinfections_cured": int(cured_before.sum()),
            "incidence_adopters": int(pop.adopter[new_inf].sum()),
            "incidence_nonadopters": int((~pop.adopter[new_inf]).sum()),
            "susceptible_adopters": int((sus & pop.adopter).sum()),
            "susceptible_nonadopters": int((sus & ~pop.adopter).sum()),
        }
        strain_counts = np.bincount(pop.strain[inf], minlength=len(self.config.epidemic.strains)) if n_inf else None
        for i in range(len(self.config.epidemic.strains)):
            row[f"strain_{i}"] = int(strain_counts[i]) if strain_counts is not None else 0
        for s in state.samples:
            row[f"sample_{s.name}"] = s.size
        for c in self.columns:
            self.series[c].append(row[c])

        diag = self.config.diagnostics
        if t % diag.degree_every == 0:
            strata = infection_degree_comparison(pop, edges, t, diag.recency_days)
            self.degree_strata.append({"step": t, "prevalence": row["prevalence"], "strata": strata})
        self._ecf_update(row[diag.ecf_series] if diag.ecf_series in row else 0.0)

    def _ecf_update(self, x: float) -> None:
        diag = self.config.diagnostics
        if self.ecf is None:
            history = self.series.get(diag.ecf_series, [])
            if len(history) < diag.ecf_warmup:
                return
            a_max = diag.ecf_a_max
            if a_max is None:
                sd = float(np.std(history))
                a_max = 8.0 / sd if sd > 0 else 8.0
            self.ecf = EcfAccumulator.linear(a_max, diag.ecf_points)
            for v in history[:-1]:
                self._ecf_push(v)
        self._ecf_push(x)

    def _ecf_push(self, x: float) -> None:
        self.ecf.update(float(x))
        c = self.ecf.count
        if c & (c - 1) == 0:
            self._snapshot()

    def _snapshot(self) -> None:
        vals = self.ecf.values()
        self.ecf_snapshots.append({"count": self.ecf.count, "re": vals.real.tolist(), "im": vals.imag.tolist()})

    def output(self, seed: int) -> RunOutput:
        ecf = {}
        if self.ecf is not None:
            snaps = list(self.ecf_snapshots)
            if not snaps or snaps[-1]["count"] != self.ecf.count:
                vals = self.ecf.values()
                snaps.append({"count": self.ecf.count, "re": vals.real.tolist(), "im": vals.imag.tolist()})
            arrays = [np.asarray(s["re"]) + 1j * np.asarray(s["im"]) for s in snaps]
            ecf = {"series": self.config.diagnostics.ecf_series, "grid": self.ecf.grid.tolist(),
                   "snapshots": snaps, "tail_dispersion": tail_dispersion(arrays, self.ecf.grid)}
        run = RunOutput(seed=seed, columns=list(self.columns), series={k: list(v) for k, v in self.series.items()},
                        degree_strata=list(self.degree_strata), ecf=ecf, config=self.config.to_dict())
        h = run.horizon
        if h:
            run.summary = {"window": [h // 2 + 1, h], "stats": summarize(run, (h // 2 + 1, h))}
        return run

    def to_dict(self) -> dict:
        return {"series": self.series, "degree_strata": self.degree_strata,
                "ecf": self.ecf.to_dict() if self.ecf is not None else None,
                "ecf_snapshots": self.ecf_snapshots}

    @classmethod
    def from_dict(cls, config: SimConfig, d: dict) -> "Recorder":
        rec = cls(config)
        rec.series = {c: list(d["series"][c]) for c in rec.columns}
        rec.degree_strata = list(d["degree_strata"])
        rec.ecf = EcfAccumulator.from_dict(d["ecf"]) if d["ecf"] is not None else None
        rec.ecf_snapshots = list(d["ecf_snapshots"])
        return rec


@dataclass
class SimState:
    config: SimConfig
    t: int
    pop: Population
    groups: Groups
    edges: Edges
    samples: list[SampleState]
    rng: np.random.Generator
    recorder: Recorder
    seeded: bool = False
    history: list[StepReport] = field(default_factory=list)


def _new_nodes(state: SimState, group_of: np.ndarray, t: int) -> np.ndarray:
    cfg = state.config
    rng = state.rng
    n = len(group_of)
    male = rng.uniform(size=n) < cfg.demography.male_fraction
    off, off_prev = spatial.stationary_offsets(n, cfg.spatial.ar1, cfg.spatial.ar2, cfg.spatial.sigma_offset, rng)
    adopter = (interventions.assign_adopters(n, cfg.pair_strategy.fraction, rng)
               if cfg.pair_strategy.enabled else np.zeros(n, dtype=bool))
    gud = rng.uniform(size=n) < cfg.epidemic.gud_prevalence if cfg.epidemic.gud_prevalence > 0 else np.zeros(n, bool)
    rows = state.pop.append(n, group=group_of, male=male, offset=off, offset_prev=off_prev,
                            amplitude=cfg.network.amplitude, spread=cfg.network.spread,
                            adopter=adopter, gud=gud, born_at=t)
    for s in state.samples:
        s.extend(n)
    return rows


def init_simulation(config: SimConfig) -> SimState:
    config.validate()
    rng = np.random.default_rng(config.rng_seed)
    groups = spatial.init_groups(config.k_groups, config.spatial, config.n_target, rng)
    counts = rng.poisson(groups.lam)
    state = SimState(config=config, t=0, pop=Population(), groups=groups, edges=Edges(),
                     samples=[SampleState.empty(d, 0) for d in config.designs],
                     rng=rng, recorder=Recorder(config))
    _new_nodes(state, np.repeat(np.arange(len(groups)), counts), 0)
    if config.epidemic.enabled and config.epidemic.seed_step == 0:
        epidemic.seed_infections(state.pop, config.epidemic, 0, rng)
        state.seeded = True
    return state


def _remove_dead(state: SimState, dead: np.ndarray) -> int:
    remap = state.pop.keep(~dead)
    lost = state.edges.remap_nodes(remap)
    for s in state.samples:
        s.keep(~dead)
    return lost


def step_simulation(state: SimState) -> StepReport:
    cfg = state.config
    rng = state.rng
    pop = state.pop
    t = state.t + 1
    rep = StepReport(t=t)

    # 1-2: motion
    spatial.step_group_centers(state.groups, cfg.spatial, rng)
    if len(pop):
        pop.offset, pop.offset_prev = spatial.step_node_offsets(
            pop.offset, pop.offset_prev, cfg.spatial.ar1, cfg.spatial.ar2, cfg.spatial.sigma_offset, rng)

    # 3: deaths
    if len(pop):
        hazard = epidemic.disease_hazard(pop, cfg.epidemic) if cfg.epidemic.enabled else np.zeros(len(pop))
        bg, dis = spatial.draw_deaths(len(pop), cfg.demography.mortality, hazard, rng)
        rep.deaths_background, rep.deaths_disease = int(bg.sum()), int(dis.sum())
        if rep.deaths_background or rep.deaths_disease:
            rep.edges_lost_to_death = _remove_dead(state, bg | dis)

    # 4: insertions
    newcomers = spatial.draw_insertions(len(pop), cfg.n_target, state.groups, pop.group, cfg.demography, rng)
    if len(newcomers):
        _new_nodes(state, newcomers, t)
        rep.births = len(newcomers)

    # 5-6: links
    if cfg.network.enabled:
        end = np.full(len(pop), cfg.network.end_hazard)
        rep.edges_dissolved = network.dissolve_links(state.edges, end, rng)
        pos = spatial.positions(pop, state.groups)
        tilt = None
        ps = cfg.pair_strategy
        if ps.enabled and ps.assort_weight > 0:
            tilt = interventions.assort_tilt(pop.adopter, ps.assort_weight)
        start = len(state.edges)
        i, _ = network.form_links(pop, pos, state.edges, cfg.network, t, rng, tilt)
        rep.edges_formed = len(i)
        if ps.enabled and t >= ps.start_step:
            interventions.protocol_on_new_edges(pop, state.edges, start, ps)

    # 7-8: epidemic
    new_inf = np.zeros(0, dtype=np.int64)
    cured_before = np.zeros(0, dtype=bool)
    if cfg.epidemic.enabled:
        if not state.seeded and t >= cfg.epidemic.seed_step:
            epidemic.seed_infections(pop, cfg.epidemic, t, rng)
            state.seeded = True
        was_cured = pop.cured.copy()
        new_inf = epidemic.contact_and_transmit_step(pop, state.edges, cfg.epidemic, cfg.pair_strategy.p_s, t, rng)
        cured_before = was_cured[new_inf]
        rep.infections = len(new_inf)
        rep.progressions = epidemic.progress_stages(pop, t, cfg.epidemic, rng)

    # 9-10: designs and their actions
    n = len(pop)
    added_by_design = []
    for s in state.samples:
        if not s.started:
            if t < s.cfg.start_step:
                added_by_design.append(np.zeros(0, dtype=np.int64))
                continue
            added = sampling.init_sample(s, pop, spatial.positions(pop, state.groups), t, rng)
            removed = np.zeros(0, dtype=np.int64)
        else:
            added, removed = sampling.design_step(s, state.edges, n, t, rng)
        rep.sample_added += len(added)
        rep.sample_removed += len(removed)
        added_by_design.append(added)
    for s, added in zip(state.samples, added_by_design):
        if s.cfg.test_members or s.cfg.action.kind != "none":
            counts = interventions.seek_and_treat_step(s, pop, added)
            rep.tests += counts.tests
            rep.cures += counts.cures
            rep.treatments += counts.treatments
            rep.vaccinations += counts.vaccinations
    rep.pair_tests = interventions.pair_strategy_update(pop, state.edges, t, cfg.pair_strategy)

    # 11: diagnostics
    state.t = t
    state.recorder.record(state, rep, new_inf, cured_before)
    return rep


def check_integrity(state: SimState) -> None:
    """Raise AssertionError if any edge or sample refers to a missing node row."""
    n = len(state.pop)
    e = state.edges
    assert (e.u < n).all() and (e.v < n).all() and (e.u >= 0).all() and (e.u < e.v).all()
    assert len(np.unique(e.key)) == len(e)
    for s in state.samples:
        assert len(s.member) == n
    for name in state.pop.COLUMNS:
        assert len(getattr(state.pop, name)) == n


def run_simulation(config: SimConfig, steps: Optional[int] = None, keep_reports: bool = False) -> RunOutput:
    state = init_simulation(config)
    advance(state, config.horizon if steps is None else steps, keep_reports)
    return state.recorder.output(config.rng_seed)


def advance(state: SimState, steps: int, keep_reports: bool = False) -> SimState:
    for _ in range(steps):
        rep = step_simulation(state)
        if keep_reports:
            state.history.append(rep)
    return state


def _run_seeded(args) -> RunOutput:
    config, seed = args
    return run_simulation(dataclasses.replace(config, rng_seed=seed))


def run_replicates(config: SimConfig, n_reps: int, seed_base: int, workers: int = 1) -> list[RunOutput]:
    """Independent runs with seeds seed_base + i, returned in replicate order."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    jobs = [(config, seed_base + i) for i in range(n_reps)]
    if workers <= 1:
        return [_run_seeded(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seeded, jobs))
