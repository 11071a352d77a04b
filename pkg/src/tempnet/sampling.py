"""Sampling designs that reach into the temporal network.

A design owns a :class:`SampleState` whose arrays are row-aligned with the
population. Link-tracing designs follow each link out of the sample
independently, optionally top up with random Bernoulli selections, then
thin back towards a target size with Bernoulli removals. Random walks and
coupon (RDS) designs are variations on the same state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DesignConfig
from .state import Edges, Population


class SamplingError(ValueError):
    pass


@dataclass
class SampleState:
    cfg: DesignConfig
    started: bool = False
    member: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    added_at: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    last_removed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    times_selected: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    coupons: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    positive: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    negative: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    _ARRAYS = {"member": (bool, False), "added_at": (np.int64, -1), "last_removed": (np.int64, -1),
               "times_selected": (np.int64, 0), "coupons": (np.int64, 0),
               "positive": (bool, False), "negative": (bool, False)}

    @classmethod
    def empty(cls, cfg: DesignConfig, n: int) -> "SampleState":
        s = cls(cfg=cfg)
        s.extend(n)
        return s

    @property
    def name(self) -> str:
        return self.cfg.name

    @property
    def size(self) -> int:
        return int(self.member.sum())

    def rows(self) -> np.ndarray:
        return np.flatnonzero(self.member)

    def extend(self, n: int) -> None:
        for name, (dtype, fill) in self._ARRAYS.items():
            setattr(self, name, np.concatenate([getattr(self, name), np.full(n, fill, dtype=dtype)]))

    def keep(self, mask: np.ndarray) -> int:
        """Compact after population deletions; returns members lost with their node."""
        lost = int((self.member & ~mask).sum())
        for name in self._ARRAYS:
            setattr(self, name, getattr(self, name)[mask])
        return lost

    def add(self, rows: np.ndarray, t: int) -> None:
        self.member[rows] = True
        self.added_at[rows] = t
        self.times_selected[rows] += 1

    def remove(self, rows: np.ndarray, t: int) -> None:
        self.member[rows] = False
        self.last_removed[rows] = t
        self.positive[rows] = False
        self.negative[rows] = False

    def to_dict(self) -> dict:
        out = {name: getattr(self, name).tolist() for name in self._ARRAYS}
        out["started"] = self.started
        return out

    @classmethod
    def from_dict(cls, cfg: DesignConfig, d: dict) -> "SampleState":
        s = cls(cfg=cfg, started=bool(d["started"]))
        for name, (dtype, _) in cls._ARRAYS.items():
            setattr(s, name, np.asarray(d[name], dtype=dtype))
        return s


# -- probability formulas ----------------------------------------------------------

def link_trace_inclusion_prob(link_probs) -> float:
    """Probability an outside node is reached through at least one of its links into the sample."""
    prod = 1.0
    for p in link_probs:
        prod *= 1.0 - p
    return 1.0 - prod


def removal_q(n_t: int, n_target: int) -> float:
    """Common Bernoulli removal probability that thins a sample of size n_t towards n_target."""
    if n_t - n_target > 0:
        return (n_t - n_target) / n_t
    return 0.0


def effective_selection_prob(base_p, previously_sampled, r: float, time_since=None,
                             recovery_days: float = 0.0):
    """Damp the selection probability of previously sampled units by the replacement factor r.

    With ``recovery_days > 0`` the factor rises linearly from r back to 1 as
    time since the last removal grows.
    """
    base_p = np.asarray(base_p, dtype=float)
    r_eff = np.asarray(r, dtype=float)
    if recovery_days > 0 and time_since is not None:
        r_eff = np.minimum(1.0, r + (1.0 - r) * np.asarray(time_since, dtype=float) / recovery_days)
    out = np.where(previously_sampled, base_p * r_eff, base_p)
    return float(out) if out.ndim == 0 else out


def _damping(sample: SampleState, rows: np.ndarray, t: int) -> np.ndarray:
    prev = sample.times_selected[rows] > 0
    since = t - sample.last_removed[rows]
    return effective_selection_prob(np.ones(len(rows)), prev, sample.cfg.replacement, since,
                                    sample.cfg.replacement_recovery_days)


def out_links(sample: SampleState, edges: Edges) -> tuple[np.ndarray, np.ndarray]:
    """(origin member row, outside candidate row) for every link leaving the sample."""
    m = sample.member
    if len(edges) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    mu, mv = m[edges.u], m[edges.v]
    cross = mu != mv
    origin = np.where(mu[cross], edges.u[cross], edges.v[cross])
    cand = np.where(mu[cross], edges.v[cross], edges.u[cross])
    return origin, cand


def link_probabilities(sample: SampleState, origin: np.ndarray, cand: np.ndarray, t: int) -> np.ndarray:
    cfg = sample.cfg
    base = np.where(sample.positive[origin], np.minimum(1.0, cfg.follow_p * cfg.positive_follow_boost),
                    cfg.follow_p)
    return base * _damping(sample, cand, t)


def inclusion_probs(sample: SampleState, edges: Edges, n: int, t: int) -> np.ndarray:
    """Per-row probability of being added by link tracing this step (0 for members)."""
    origin, cand = out_links(sample, edges)
    miss = np.ones(n)
    np.multiply.at(miss, cand, 1.0 - link_probabilities(sample, origin, cand, t))
    return np.where(sample.member, 0.0, 1.0 - miss)


# -- design steps -------------------------------------------------------------------

def init_sample(sample: SampleState, pop: Population, pos: np.ndarray, t: int,
                rng: np.random.Generator) -> np.ndarray:
    """Draw the initial sample per the design's initial rule; returns the added rows."""
    cfg = sample.cfg
    n = len(pop)
    sample.started = True
    if cfg.kind == "random_walk":
        rows = np.array([rng.integers(n)]) if n else np.zeros(0, dtype=np.int64)
    elif cfg.init == "none":
        rows = np.zeros(0, dtype=np.int64)
    elif cfg.init == "bernoulli":
        rows = np.flatnonzero(rng.uniform(size=n) < cfg.init_p)
    elif cfg.init == "spatial_bernoulli":
        inside = np.hypot(*(pos - np.asarray(cfg.init_center)).T) <= cfg.init_radius if n else np.zeros(0, bool)
        rows = np.flatnonzero(inside & (rng.uniform(size=n) < cfg.init_p))
    elif cfg.init == "srswor":
        if cfg.init_n > n:
            raise SamplingError(f"design {cfg.name!r}: SRSWOR of {cfg.init_n} from population of {n}")
        rows = np.sort(rng.choice(n, size=cfg.init_n, replace=False)) if cfg.init_n else np.zeros(0, np.int64)
    else:
        draws = rng.integers(n, size=cfg.init_n) if n else np.zeros(0, dtype=np.int64)
        rows = np.unique(draws)
        np.add.at(sample.times_selected, draws, 1)
        sample.times_selected[rows] -= 1
    sample.add(rows, t)
    if cfg.kind == "rds":
        sample.coupons[rows] = cfg.coupons
    return rows


def removal_step(sample: SampleState, t: int, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli removals; returns removed rows."""
    cfg = sample.cfg
    rows = sample.rows()
    if len(rows) == 0 or cfg.removal == "none":
        return np.zeros(0, dtype=np.int64)
    q = removal_q(len(rows), cfg.n_target) if cfg.removal == "target" else cfg.q
    q_i = np.where(sample.negative[rows], max(q, cfg.negative_removal_q), q)
    gone = rows[rng.uniform(size=len(rows)) < q_i]
    sample.remove(gone, t)
    return gone


def link_trace_step(sample: SampleState, edges: Edges, n: int, t: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Trace links out, add random supplements, then remove. Returns (added, removed) rows."""
    cfg = sample.cfg
    outside = ~sample.member
    origin, cand = out_links(sample, edges)
    traced = rng.uniform(size=len(cand)) < link_probabilities(sample, origin, cand, t)
    added = np.unique(cand[traced])
    if cfg.p_r > 0 and n:
        rows = np.arange(n)
        p = cfg.p_r * _damping(sample, rows, t)
        extra = np.flatnonzero(outside & (rng.uniform(size=n) < p))
        added = np.union1d(added, extra)
    sample.add(added, t)
    removed = removal_step(sample, t, rng)
    return added, removed


def random_walk_move(current: int, indptr: np.ndarray, nbrs: np.ndarray, n: int, jump_p: float,
                     rescue_p: float, rng: np.random.Generator) -> int:
    """Next node of a random walk with uniform jumps; isolated nodes jump with the rescue probability."""
    deg = int(indptr[current + 1] - indptr[current])
    jp = jump_p if deg > 0 else max(jump_p, rescue_p)
    if n <= 1:
        return current
    if rng.random() < jp:
        k = int(rng.integers(n - 1))
        return k if k < current else k + 1
    if deg == 0:
        return current
    return int(nbrs[indptr[current] + rng.integers(deg)])


def random_walk_step(sample: SampleState, edges: Edges, n: int, t: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Move the single walker; restart uniformly if its node was deleted."""
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rows = sample.rows()
    if len(rows) == 0:
        nxt = int(rng.integers(n))
        sample.add(np.array([nxt]), t)
        return np.array([nxt]), np.zeros(0, dtype=np.int64)
    cur = int(rows[0])
    indptr, nbrs, _ = edges.adjacency(n)
    nxt = random_walk_move(cur, indptr, nbrs, n, sample.cfg.jump_p, sample.cfg.rescue_jump_p, rng)
    if nxt == cur:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    sample.remove(np.array([cur]), t)
    sample.add(np.array([nxt]), t)
    return np.array([nxt]), np.array([cur])


def rds_coupon_step(sample: SampleState, edges: Edges, n: int, t: int,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Every member holding coupons recruits up to that many distinct un-sampled neighbors."""
    cfg = sample.cfg
    indptr, nbrs, _ = edges.adjacency(n)
    recruiters = np.flatnonzero(sample.member & (sample.coupons > 0))
    taken = sample.member.copy()
    if cfg.replacement == 0.0:
        taken |= sample.times_selected > 0
    recruited = []
    for row in recruiters:
        cand = nbrs[indptr[row]:indptr[row + 1]]
        cand = cand[~taken[cand]]
        k = min(int(sample.coupons[row]), len(cand))
        if k == 0:
            continue
        pick = np.sort(rng.choice(cand, size=k, replace=False))
        taken[pick] = True
        sample.coupons[row] -= k
        recruited.append(pick)
    added = np.concatenate(recruited) if recruited else np.zeros(0, dtype=np.int64)
    added = np.sort(added)
    sample.add(added, t)
    sample.coupons[added] = cfg.coupons
    removed = removal_step(sample, t, rng)
    return added, removed


def design_step(sample: SampleState, edges: Edges, n: int, t: int,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    kind = sample.cfg.kind
    if kind == "random_walk":
        return random_walk_step(sample, edges, n, t, rng)
    if kind == "rds":
        return rds_coupon_step(sample, edges, n, t, rng)
    return link_trace_step(sample, edges, n, t, rng)
