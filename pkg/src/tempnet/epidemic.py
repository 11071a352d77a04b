"""The virus as a without-replacement link-tracing design.

Transmission happens over partnership links; the per-contact probability
depends on the infected partner's stage and treatment, the susceptible
partner's resistance, the GUD cofactor, and the edge's safer-sex flag.
Host mortality follows the virulence tradeoff alpha = a * beta**gamma.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .config import EpidemicConfig
from .state import CHRONIC, EARLY, LATE, SUSCEPTIBLE, Edges, Population


# -- rate utilities ------------------------------------------------------------

def convert_period_rate(p_a: float, k: int) -> float:
    """Per-step probability equivalent to probability ``p_a`` over ``k`` steps."""
    if not 0.0 <= p_a <= 1.0:
        raise ValueError(f"p_a must be in [0, 1]: {p_a!r}")
    if k < 1:
        raise ValueError(f"k must be >= 1: {k!r}")
    return 1.0 - (1.0 - p_a) ** (1.0 / k)


def period_rate(p: float, k: int) -> float:
    """Inverse of :func:`convert_period_rate`."""
    return 1.0 - (1.0 - p) ** k


def weibull_scale(p: float, shape: float) -> float:
    """Rate parameter lambda with mean time to event 1/p."""
    return p * math.gamma(1.0 + 1.0 / shape)


def weibull_hazard(x, p: float, shape: float):
    """Discrete-time Weibull hazard at clock value ``x`` with mean time 1/p, capped at 1."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1]: {p!r}")
    if shape <= 0:
        raise ValueError(f"shape must be > 0: {shape!r}")
    lam = weibull_scale(p, shape)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        h = (lam * shape) * (lam * x) ** (shape - 1.0)
    return np.minimum(1.0, h) if h.ndim else float(min(1.0, h))


def virulence(beta, scale: float, gamma: float):
    """Extra per-day host mortality hazard for transmission rate ``beta``."""
    return scale * np.asarray(beta, dtype=float) ** gamma


# -- per-contact transmission ----------------------------------------------------

def stage_rate(beta_early, beta_chronic, stage, late_factor: float = 1.0):
    stage = np.asarray(stage)
    beta_chronic = np.asarray(beta_chronic, dtype=float)
    late = np.minimum(1.0, late_factor * beta_chronic)
    return np.select([stage == EARLY, stage == CHRONIC, stage == LATE], [beta_early, beta_chronic, late], 0.0)


def per_contact_transmission_prob(rate, *, gud=False, gud_multiplier=4.0, safer=False, p_s=0.10,
                                  treated=False, treatment_multiplier=0.05, resistance=0.0):
    """Per-contact probability for an infected partner transmitting at stage rate ``rate``.

    ``gud`` is True when either partner carries GUD; ``resistance`` belongs to
    the susceptible partner.
    """
    p = np.asarray(rate, dtype=float)
    p = p * np.where(gud, gud_multiplier, 1.0)
    p = p * np.where(safer, p_s, 1.0)
    p = p * np.where(treated, treatment_multiplier, 1.0)
    p = p * (1.0 - np.asarray(resistance, dtype=float))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


# -- strains -------------------------------------------------------------------

def mutate_on_transmission(parent_early, cfg: EpidemicConfig, rng: np.random.Generator):
    """Child early rates: parent plus a small uniform or normal increment, clamped to [0, 1]."""
    parent_early = np.asarray(parent_early, dtype=float)
    if not cfg.mutation or cfg.mutation_delta == 0.0:
        return parent_early.copy()
    if cfg.mutation_kind == "uniform":
        eps = rng.uniform(-cfg.mutation_delta, cfg.mutation_delta, size=parent_early.shape)
    else:
        eps = rng.normal(0.0, cfg.mutation_delta / 2.0, size=parent_early.shape)
    return np.clip(parent_early + eps, 0.0, 1.0)


def draw_early_durations(n: int, cfg: EpidemicConfig, rng: np.random.Generator) -> np.ndarray:
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if cfg.early_duration == "geometric":
        return rng.geometric(1.0 / cfg.early_mean_days, size=n).astype(np.int64)
    scale = 1.0 / weibull_scale(1.0 / cfg.early_mean_days, cfg.early_weibull_shape)
    return np.maximum(1, np.ceil(scale * rng.weibull(cfg.early_weibull_shape, size=n))).astype(np.int64)


def infect(pop: Population, rows: np.ndarray, beta_early: np.ndarray, beta_chronic: np.ndarray,
           strain: np.ndarray, strain_gen: np.ndarray, t: int, cfg: EpidemicConfig,
           rng: np.random.Generator) -> None:
    durations = draw_early_durations(len(rows), cfg, rng)
    pop.stage[rows] = EARLY
    pop.infected_at[rows] = t
    pop.early_end[rows] = t + durations
    pop.chronic_end[rows] = -1
    pop.beta_early[rows] = beta_early
    pop.beta_chronic[rows] = beta_chronic
    pop.strain[rows] = strain
    pop.strain_gen[rows] = strain_gen
    pop.treated[rows] = False
    pop.ever_infected[rows] = True
    pop.infections[rows] += 1


def seed_infections(pop: Population, cfg: EpidemicConfig, t: int, rng: np.random.Generator) -> int:
    """Infect distinct uniformly chosen susceptibles; strain i gets lineage id i."""
    susceptible = np.flatnonzero(pop.stage == SUSCEPTIBLE)
    wanted = sum(s.count for s in cfg.strains)
    chosen = rng.permutation(susceptible)[:wanted]
    pos = 0
    for sid, s in enumerate(cfg.strains):
        rows = np.sort(chosen[pos:pos + s.count])
        pos += len(rows)
        if len(rows) == 0:
            continue
        early = min(1.0, s.early_factor * s.chronic_rate)
        infect(pop, rows, np.full(len(rows), early), np.full(len(rows), s.chronic_rate),
               np.full(len(rows), sid), np.zeros(len(rows), dtype=np.int64), t, cfg, rng)
    return len(chosen)


# -- per-step dynamics -----------------------------------------------------------

def contact_and_transmit_step(pop: Population, edges: Edges, cfg: EpidemicConfig, p_s: float,
                              t: int, rng: np.random.Generator) -> np.ndarray:
    """One day of contacts over serodiscordant links. Returns newly infected rows."""
    if len(edges) == 0 or not cfg.transmission_enabled:
        return np.zeros(0, dtype=np.int64)
    inf = pop.stage != SUSCEPTIBLE
    iu, iv = inf[edges.u], inf[edges.v]
    disc = np.flatnonzero(iu != iv)
    if len(disc) == 0:
        return np.zeros(0, dtype=np.int64)
    src = np.where(iu[disc], edges.u[disc], edges.v[disc])
    dst = np.where(iu[disc], edges.v[disc], edges.u[disc])
    contact = rng.uniform(size=len(disc)) < cfg.contact_prob
    rate = stage_rate(pop.beta_early[src], pop.beta_chronic[src], pop.stage[src], _late_factor(cfg))
    p = per_contact_transmission_prob(
        rate, gud=pop.gud[src] | pop.gud[dst], gud_multiplier=cfg.gud_multiplier,
        safer=edges.safer[disc], p_s=p_s, treated=pop.treated[src],
        treatment_multiplier=cfg.treatment_transmission, resistance=pop.resistance[dst])
    hit = contact & (rng.uniform(size=len(disc)) < p)
    src, dst = src[hit], dst[hit]
    if len(dst) == 0:
        return dst
    # A host exposed on several links in one day takes the first transmitting link.
    dst, first = np.unique(dst, return_index=True)
    src = src[first]
    early = mutate_on_transmission(pop.beta_early[src], cfg, rng)
    infect(pop, dst, early, pop.beta_chronic[src], pop.strain[src], pop.strain_gen[src] + 1, t, cfg, rng)
    return dst


def disease_hazard(pop: Population, cfg: EpidemicConfig) -> np.ndarray:
    """Per-node extra daily mortality from infection (0 for the uninfected)."""
    if cfg.virulence_basis == "strain":
        rate = pop.beta_early
    else:
        rate = stage_rate(pop.beta_early, pop.beta_chronic, pop.stage, _late_factor(cfg))
    alpha = virulence(rate, cfg.resolved_tradeoff_scale(), cfg.tradeoff_gamma)
    alpha = np.where(pop.treated, alpha * cfg.treatment_mortality, alpha)
    return np.where(pop.stage == SUSCEPTIBLE, 0.0, alpha)


def _late_factor(cfg: EpidemicConfig) -> float:
    return cfg.late_factor if cfg.late_stage else 1.0


def progress_stages(pop: Population, t: int, cfg: Optional[EpidemicConfig] = None,
                    rng: Optional[np.random.Generator] = None) -> int:
    """Early -> chronic at the drawn early end; with the late stage on, chronic -> late likewise."""
    moving = (pop.stage == EARLY) & (t >= pop.early_end)
    n = int(moving.sum())
    late_on = cfg is not None and cfg.late_stage
    if late_on:
        aging = (pop.stage == CHRONIC) & (t >= pop.chronic_end)
        pop.stage[aging] = LATE
        n += int(aging.sum())
    pop.stage[moving] = CHRONIC
    if late_on and moving.any():
        wait = rng.geometric(1.0 / cfg.chronic_mean_days, size=int(moving.sum()))
        pop.chronic_end[moving] = t + wait
    return n


def early_factor(pop: Population) -> np.ndarray:
    """Early-to-chronic rate ratio of each infected node's strain."""
    inf = pop.stage != SUSCEPTIBLE
    return pop.beta_early[inf] / np.maximum(pop.beta_chronic[inf], 1e-300)
