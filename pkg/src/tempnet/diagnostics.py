"""Stochastic-stability diagnostics and scenario comparison.

The running empirical characteristic function of a monitored series,
cumulative means and histograms, degree strata by infection recency, and
equilibrium-window summaries with paired-seed differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .state import SUSCEPTIBLE, Edges, Population


class EcfAccumulator:
    """Running c(a) = mean over t of exp(i a X_t) on a fixed grid of a values.

    Sums use Neumaier compensation so long runs do not drift.
    """

    def __init__(self, grid):
        self.grid = np.asarray(grid, dtype=float)
        self.count = 0
        self._cos = np.zeros_like(self.grid)
        self._sin = np.zeros_like(self.grid)
        self._cos_c = np.zeros_like(self.grid)
        self._sin_c = np.zeros_like(self.grid)

    @classmethod
    def linear(cls, a_max: float, points: int = 64) -> "EcfAccumulator":
        return cls(np.linspace(0.0, a_max, points))

    @staticmethod
    def _add(s, c, x):
        t = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        return t

    def update(self, x: float) -> "EcfAccumulator":
        if not np.isfinite(x):
            raise ValueError(f"ECF input must be finite: {x!r}")
        ax = self.grid * x
        self._cos = self._add(self._cos, self._cos_c, np.cos(ax))
        self._sin = self._add(self._sin, self._sin_c, np.sin(ax))
        self.count += 1
        return self

    def update_many(self, xs) -> "EcfAccumulator":
        for x in xs:
            self.update(float(x))
        return self

    def values(self) -> np.ndarray:
        if self.count == 0:
            return np.full(self.grid.shape, np.nan + 0j)
        # Real and imaginary parts are divided separately: complex division can round c(0) below 1.
        c = (self._cos + self._cos_c) / self.count + 1j * ((self._sin + self._sin_c) / self.count)
        mod = np.abs(c)
        # Rounding can push a unit-modulus value a hair above 1.
        return np.where(mod > 1.0, c / np.where(mod > 1.0, mod, 1.0), c)

    def to_dict(self) -> dict:
        return {"grid": self.grid.tolist(), "count": self.count,
                "cos": self._cos.tolist(), "sin": self._sin.tolist(),
                "cos_c": self._cos_c.tolist(), "sin_c": self._sin_c.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "EcfAccumulator":
        acc = cls(d["grid"])
        acc.count = int(d["count"])
        for k in ("cos", "sin", "cos_c", "sin_c"):
            setattr(acc, f"_{k}", np.asarray(d[k], dtype=float))
        return acc


def tail_dispersion(snapshots: Sequence[np.ndarray], grid: np.ndarray) -> list[float]:
    """Mean squared change of c(a) over the top quartile of the grid between consecutive snapshots."""
    top = grid >= np.quantile(grid, 0.75)
    out = []
    for prev, cur in zip(snapshots, snapshots[1:]):
        out.append(float(np.mean(np.abs(cur[top] - prev[top]) ** 2)))
    return out


def cumulative_stats(series, bins: int = 20, checkpoints: Optional[Sequence[int]] = None,
                     value_range: Optional[tuple[float, float]] = None) -> dict:
    """Prefix means plus cumulative histograms of the prefix at each checkpoint length."""
    x = np.asarray(series, dtype=float)
    if len(x) == 0:
        raise ValueError("cumulative_stats needs a nonempty series")
    cummean = np.cumsum(x) / np.arange(1, len(x) + 1)
    if value_range is None:
        lo, hi = float(x.min()), float(x.max())
        value_range = (lo, hi if hi > lo else lo + 1.0)
    edges = np.linspace(value_range[0], value_range[1], bins + 1)
    checkpoints = list(checkpoints) if checkpoints is not None else [len(x)]
    hists = {int(k): np.histogram(x[:k], bins=edges)[0].tolist() for k in checkpoints}
    return {"cummean": cummean, "bin_edges": edges, "histograms": hists}


def infection_degree_comparison(pop: Population, edges: Edges, t: int, recency: int) -> dict:
    """Mean degree and out-degree (links to uninfected) by infection-recency stratum.

    Strata: ``recent`` (infected at most ``recency`` days ago), ``established``
    (infected longer), ``never`` (never infected). Empty strata are absent.
    """
    n = len(pop)
    deg = edges.degree(n)
    infected = pop.stage != SUSCEPTIBLE
    if len(edges):
        # Each endpoint counts the other if that other is uninfected.
        out = (np.bincount(edges.u, weights=~infected[edges.v], minlength=n)
               + np.bincount(edges.v, weights=~infected[edges.u], minlength=n))
    else:
        out = np.zeros(n)
    age = t - pop.infected_at
    strata = {
        "recent": infected & (age <= recency),
        "established": infected & (age > recency),
        "never": ~pop.ever_infected,
    }
    result = {}
    for name, mask in strata.items():
        if mask.any():
            result[name] = {"count": int(mask.sum()),
                            "mean_degree": float(deg[mask].mean()),
                            "mean_out_degree": float(out[mask].mean())}
    return result


# -- run output -------------------------------------------------------------------

@dataclass
class RunOutput:
    seed: int
    columns: list[str]
    series: dict[str, list]
    degree_strata: list[dict] = field(default_factory=list)
    ecf: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return len(self.series[self.columns[0]]) if self.columns else 0

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.series[name], dtype=float)


def window_stats(x: np.ndarray) -> dict:
    if len(x) == 0:
        return {"mean": None, "sd": None, "q05": None, "q50": None, "q95": None}
    q05, q50, q95 = np.quantile(x, [0.05, 0.5, 0.95])
    return {"mean": float(x.mean()), "sd": float(x.std(ddof=1)) if len(x) > 1 else 0.0,
            "q05": float(q05), "q50": float(q50), "q95": float(q95)}


SUMMARY_SERIES = ("population", "edges", "mean_degree", "prevalence", "incidence")


def summarize(run: RunOutput, window: tuple[int, int], names: Sequence[str] = SUMMARY_SERIES) -> dict:
    """Equilibrium-window statistics of selected series; steps are 1-based, window is [a, b]."""
    a, b = window
    if not 1 <= a <= b <= run.horizon:
        raise ValueError(f"window {a}:{b} outside 1:{run.horizon}")
    return {name: window_stats(run.column(name)[a - 1:b]) for name in names if name in run.series}


def run_summary(baseline: Sequence[RunOutput], treatment: Sequence[RunOutput], window: tuple[int, int],
                names: Sequence[str] = SUMMARY_SERIES) -> dict:
    """Per-scenario window statistics plus paired (treatment - baseline) differences of window means."""
    horizons = {r.horizon for r in list(baseline) + list(treatment)}
    if len(horizons) > 1:
        raise ValueError(f"mismatched horizons across runs: {sorted(horizons)}")
    if len(baseline) != len(treatment):
        raise ValueError(f"unpaired scenarios: {len(baseline)} baseline vs {len(treatment)} treatment runs")
    a, b = window
    out = {"window": [a, b], "baseline": [summarize(r, window, names) for r in baseline],
           "treatment": [summarize(r, window, names) for r in treatment], "paired_differences": {}}
    for name in names:
        if not all(name in r.series for r in list(baseline) + list(treatment)):
            continue
        diffs = [float(t.column(name)[a - 1:b].mean() - s.column(name)[a - 1:b].mean())
                 for s, t in zip(baseline, treatment)]
        out["paired_differences"][name] = {
            "per_pair": diffs,
            "mean": float(np.mean(diffs)) if diffs else None,
            "negative_pairs": int(sum(d < 0 for d in diffs)),
            "positive_pairs": int(sum(d > 0 for d in diffs)),
        }
    return out
