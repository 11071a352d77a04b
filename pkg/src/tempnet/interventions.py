"""Intervention strategies: a design plus a change of node or edge values.

Covers the pair protocol (safer sex early in a relationship, then mutual
testing), cures with a resistance factor, treatment, vaccination, and the
seek-and-treat action applied to members of a tracing design.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import ActionConfig, PairStrategyConfig
from .sampling import SampleState
from .state import CHRONIC, LATE, SUSCEPTIBLE, Edges, Population

log = logging.getLogger(__name__)


@dataclass
class ActionCounts:
    tests: int = 0
    positives: int = 0
    cures: int = 0
    treatments: int = 0
    vaccinations: int = 0
    noops: int = 0

    def merge(self, other: "ActionCounts") -> None:
        for k in self.__dataclass_fields__:
            setattr(self, k, getattr(self, k) + getattr(other, k))


def assign_adopters(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(size=n) < fraction


def assort_tilt(adopter: np.ndarray, weight: float):
    """Formation multiplier: (1 + w) for concordant-strategy pairs, 1 / (1 + w) for discordant."""
    def tilt(i, j):
        same = adopter[i] == adopter[j]
        return np.where(same, 1.0 + weight, 1.0 / (1.0 + weight))
    return tilt


def hiv_test(pop: Population, rows) -> np.ndarray:
    """Positive only once the infection has left the (test-insensitive) early stage."""
    stage = pop.stage[rows]
    return (stage == CHRONIC) | (stage == LATE)


def protocol_on_new_edges(pop: Population, edges: Edges, start: int, cfg: PairStrategyConfig) -> None:
    """Mark edges formed in the last formation phase (indices >= ``start``) that run the protocol."""
    if not cfg.enabled or len(edges) <= start:
        return
    u, v = edges.u[start:], edges.v[start:]
    both = pop.adopter[u] & pop.adopter[v]
    if not cfg.with_all_partners:
        # Each adopter keeps the protocol with at most one partner at a time.
        busy = np.zeros(len(pop), dtype=bool)
        old = edges.protocol[:start]
        busy[edges.u[:start][old]] = True
        busy[edges.v[:start][old]] = True
        for k in np.flatnonzero(both):
            if busy[u[k]] or busy[v[k]]:
                both[k] = False
            else:
                busy[u[k]] = busy[v[k]] = True
    edges.protocol[start:] = both
    edges.safer[start:] = both


def pair_strategy_update(pop: Population, edges: Edges, t: int, cfg: PairStrategyConfig) -> int:
    """Test protocol pairs reaching the end of the safer-sex window; refresh safer flags.

    Returns the number of pairs tested this step.
    """
    if not cfg.enabled or len(edges) == 0:
        return 0
    age = t - edges.formed_at
    due = edges.protocol & ~edges.tested & (age >= cfg.duration_days)
    rows = np.flatnonzero(due)
    if len(rows):
        res_u = hiv_test(pop, edges.u[rows])
        res_v = hiv_test(pop, edges.v[rows])
        edges.tested[rows] = True
        edges.discordant[rows] = res_u != res_v
    edges.safer = edges.protocol & (~edges.tested | edges.discordant)
    return len(rows)


def apply_cure(pop: Population, rows, resistance: float) -> int:
    """Clear infection and raise resistance to at least ``resistance``. Returns hosts cured."""
    rows = np.asarray(rows, dtype=np.int64)
    infected = pop.stage[rows] != SUSCEPTIBLE
    if (~infected).any():
        log.debug("cure applied to %d uninfected node(s); no-op", int((~infected).sum()))
    rows = rows[infected]
    pop.stage[rows] = SUSCEPTIBLE
    pop.infected_at[rows] = -1
    pop.early_end[rows] = -1
    pop.chronic_end[rows] = -1
    pop.beta_early[rows] = 0.0
    pop.beta_chronic[rows] = 0.0
    pop.strain[rows] = -1
    pop.strain_gen[rows] = 0
    pop.treated[rows] = False
    pop.cured[rows] = True
    pop.resistance[rows] = np.maximum(pop.resistance[rows], resistance)
    return len(rows)


def apply_treatment(pop: Population, rows) -> int:
    rows = np.asarray(rows, dtype=np.int64)
    ok = (pop.stage[rows] != SUSCEPTIBLE) & ~pop.treated[rows]
    if (pop.stage[rows] == SUSCEPTIBLE).any():
        log.warning("treatment offered to uninfected node(s); ignored")
    pop.treated[rows[ok]] = True
    return int(ok.sum())


def apply_vaccine(pop: Population, rows, resistance: float) -> int:
    rows = np.asarray(rows, dtype=np.int64)
    ok = pop.stage[rows] == SUSCEPTIBLE
    if (~ok).any():
        log.warning("vaccine offered to infected node(s); ignored")
    pop.resistance[rows[ok]] = np.maximum(pop.resistance[rows[ok]], resistance)
    return int(ok.sum())


def apply_action(pop: Population, rows, action: ActionConfig) -> ActionCounts:
    out = ActionCounts()
    if action.kind == "cure":
        out.cures = apply_cure(pop, rows, action.resistance)
    elif action.kind == "treat":
        out.treatments = apply_treatment(pop, rows)
    elif action.kind == "vaccine":
        out.vaccinations = apply_vaccine(pop, rows, action.resistance)
    out.noops = len(rows) - out.cures - out.treatments - out.vaccinations if action.kind != "none" else 0
    return out


def seek_and_treat_step(sample: SampleState, pop: Population, new_rows: np.ndarray) -> ActionCounts:
    """Act on members added this step.

    With testing on, new members are tested: positives get the action and
    their links are followed with boosted probability next step; negatives
    are flagged for elevated removal. Without testing, every new member
    receives the action.
    """
    cfg = sample.cfg
    counts = ActionCounts()
    if len(new_rows) == 0:
        return counts
    if not cfg.test_members:
        if cfg.action.kind != "none":
            counts.merge(apply_action(pop, new_rows, cfg.action))
        return counts
    result = hiv_test(pop, new_rows)
    counts.tests = len(new_rows)
    counts.positives = int(result.sum())
    pos, neg = new_rows[result], new_rows[~result]
    sample.positive[pos] = True
    sample.negative[neg] = True
    if cfg.action.kind in ("cure", "treat") and len(pos):
        counts.merge(apply_action(pop, pos, cfg.action))
    elif cfg.action.kind == "vaccine" and len(neg):
        counts.merge(apply_action(pop, neg, cfg.action))
    return counts
