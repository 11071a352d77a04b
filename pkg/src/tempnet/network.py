"""Consensus link formation, either-side dissolution, and component bookkeeping."""

from __future__ import annotations

from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .config import NetworkConfig
from .state import Edges, Population, pair_key


def tentative_selection_prob(d, amplitude, spread, cfg: NetworkConfig):
    """One-sided probability that a node tentatively selects a partner at distance ``d``."""
    d = np.asarray(d, dtype=float)
    amplitude = np.asarray(amplitude, dtype=float)
    spread = np.asarray(spread, dtype=float)
    inside = d <= cfg.reach_multiple * spread
    if cfg.kernel == "normal":
        g = amplitude * np.exp(-d ** 2 / (2.0 * spread ** 2))
    elif cfg.kernel == "logistic":
        s = cfg.logistic_shape
        g = amplitude * (1.0 + np.exp(-s)) / (1.0 + np.exp(s * (d / spread - 1.0)))
    else:
        g = amplitude * np.ones_like(d)
    return np.where(inside, g, 0.0)


def degree_modifier(deg_i, deg_j, cfg: NetworkConfig):
    deg_i = np.asarray(deg_i)
    deg_j = np.asarray(deg_j)
    if cfg.degree_policy == "compensatory":
        fi = np.where(deg_i >= cfg.max_degree, cfg.residual, 1.0)
        fj = np.where(deg_j >= cfg.max_degree, cfg.residual, 1.0)
        return fi * fj
    if cfg.degree_policy == "preferential":
        f = (1.0 + deg_i) ** cfg.pref_exponent * (1.0 + deg_j) ** cfg.pref_exponent
        return np.minimum(f, cfg.pref_cap)
    return np.ones(np.broadcast(deg_i, deg_j).shape)


def pair_formation_prob(d, amp_i, amp_j, spread_i, spread_j, cfg: NetworkConfig, *,
                        male_i=None, male_j=None, deg_i=0, deg_j=0,
                        same_component=None, extra=None):
    """Probability a link forms between two unlinked nodes at distance ``d`` in one step.

    The base is the product of both sides' tentative selections; node and
    network modifiers multiply it and the result is clamped to [0, 1].
    """
    p = (tentative_selection_prob(d, amp_i, spread_i, cfg)
         * tentative_selection_prob(d, amp_j, spread_j, cfg))
    if cfg.opposite_sex_only and male_i is not None:
        p = p * (np.asarray(male_i) != np.asarray(male_j))
    p = p * degree_modifier(deg_i, deg_j, cfg)
    if same_component is not None and cfg.component_multiplier != 1.0:
        p = p * np.where(same_component, cfg.component_multiplier, 1.0)
    if extra is not None:
        p = p * extra
    return np.clip(p, 0.0, 1.0)


def candidate_pairs(pos: np.ndarray, reach: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All pairs (i < j) with distance <= min(reach_i, reach_j), sorted; also their distances."""
    if len(pos) < 2:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    tree = cKDTree(pos)
    pairs = tree.query_pairs(r=float(reach.max()), output_type="ndarray")
    if len(pairs) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    n = np.int64(len(pos))
    a, b = pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.int64)
    code = np.sort(np.minimum(a, b) * n + np.maximum(a, b))
    i, j = code // n, code % n
    d = np.sqrt((pos[i, 0] - pos[j, 0]) ** 2 + (pos[i, 1] - pos[j, 1]) ** 2)
    ok = d <= np.minimum(reach[i], reach[j])
    return i[ok], j[ok], d[ok]


def all_pairs_scan(pos: np.ndarray, reach: np.ndarray) -> set[tuple[int, int]]:
    """O(n^2) reference for :func:`candidate_pairs`."""
    out = set()
    n = len(pos)
    for a in range(n):
        for b in range(a + 1, n):
            if np.hypot(*(pos[a] - pos[b])) <= min(reach[a], reach[b]):
                out.add((a, b))
    return out


def component_labels(n: int, edges: Edges, ids: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-node component label (smallest member id) and component size."""
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    ids = np.arange(n) if ids is None else ids
    graph = coo_matrix((np.ones(len(edges)), (edges.u, edges.v)), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    smallest = np.full(raw.max() + 1, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(smallest, raw, ids)
    sizes = np.bincount(raw)
    return smallest[raw], sizes[raw]


def component_sizes(n: int, edges: Edges, ids: Optional[np.ndarray] = None) -> dict[int, tuple[int, int]]:
    labels, sizes = component_labels(n, edges, ids)
    ids = np.arange(n) if ids is None else ids
    return {int(k): (int(c), int(s)) for k, c, s in zip(ids, labels, sizes)}


def dissolve_links(edges: Edges, end_hazard: np.ndarray, rng: np.random.Generator) -> int:
    """Each edge ends if either endpoint ends it. ``end_hazard`` is per node row."""
    if len(edges) == 0:
        return 0
    p_end = 1.0 - (1.0 - end_hazard[edges.u]) * (1.0 - end_hazard[edges.v])
    ended = rng.uniform(size=len(edges)) < p_end
    edges.keep(~ended)
    return int(ended.sum())


def formation_probabilities(pop: Population, pos: np.ndarray, edges: Edges, cfg: NetworkConfig,
                            tilt=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Candidate pairs not already linked, with their formation probabilities.

    ``tilt(i, j)`` optionally returns an extra multiplier per pair.
    """
    reach = cfg.reach_multiple * pop.spread
    i, j, d = candidate_pairs(pos, reach)
    if len(i) and len(edges):
        known = np.sort(edges.key)
        keys = pair_key(pop.ids[i], pop.ids[j])
        at = np.minimum(np.searchsorted(known, keys), len(known) - 1)
        fresh = known[at] != keys
        i, j, d = i[fresh], j[fresh], d[fresh]
    if len(i) == 0:
        return i, j, np.zeros(0)
    deg = edges.degree(len(pop))
    same = None
    if cfg.component_multiplier != 1.0:
        labels, _ = component_labels(len(pop), edges, pop.ids)
        same = labels[i] == labels[j]
    extra = tilt(i, j) if tilt is not None else None
    p = pair_formation_prob(d, pop.amplitude[i], pop.amplitude[j], pop.spread[i], pop.spread[j], cfg,
                            male_i=pop.male[i], male_j=pop.male[j], deg_i=deg[i], deg_j=deg[j],
                            same_component=same, extra=extra)
    return i, j, p


def form_links(pop: Population, pos: np.ndarray, edges: Edges, cfg: NetworkConfig, t: int,
               rng: np.random.Generator, tilt=None) -> tuple[np.ndarray, np.ndarray]:
    """Independent formation draws over all candidate pairs; returns the new (i, j) rows."""
    i, j, p = formation_probabilities(pop, pos, edges, cfg, tilt)
    if len(i) == 0:
        return i, j
    hit = rng.uniform(size=len(p)) < p
    i, j = i[hit], j[hit]
    if len(i):
        edges.add(i, j, pair_key(pop.ids[i], pop.ids[j]), t)
    return i, j
