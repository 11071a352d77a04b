"""Spatial temporal Poisson cluster process.

Group centers drift on the unit square with momentum; the displacement is a
random-walk Metropolis-Hastings chain targeting N(0, sigma_delta^2 I), so the
speed distribution stays put while direction wanders. Node positions are
group center plus an AR(2) offset whose marginal is N(0, sigma_n^2 I).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, DemographyConfig, SpatialConfig, ar2_stationary
from .state import Population


@dataclass
class Groups:
    center: np.ndarray      # (k, 2)
    delta: np.ndarray       # (k, 2) most recent displacement
    target: np.ndarray      # (k,) expected group size
    lam: np.ndarray         # (k,) initial Poisson mean

    def __len__(self) -> int:
        return len(self.target)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("center", "delta", "target", "lam")}

    @classmethod
    def from_dict(cls, d: dict) -> "Groups":
        return cls(center=np.asarray(d["center"], float).reshape(-1, 2),
                   delta=np.asarray(d["delta"], float).reshape(-1, 2),
                   target=np.asarray(d["target"], float),
                   lam=np.asarray(d["lam"], float))


def init_groups(k: int, cfg: SpatialConfig, n_target: float, rng: np.random.Generator) -> Groups:
    """Uniform centers, stationary initial displacements, per-group Poisson means."""
    if k < 1:
        raise ConfigError("k_groups", "must be >= 1")
    center = rng.uniform(0.0, 1.0, size=(k, 2))
    delta = rng.normal(0.0, cfg.sigma_delta, size=(k, 2))
    if cfg.lambda_mode == "fixed":
        lam = np.full(k, n_target / k if cfg.lam is None else cfg.lam, dtype=float)
    else:
        lam = rng.lognormal(cfg.lognormal_meanlog, cfg.lognormal_sdlog, size=k)
    total = lam.sum()
    target = n_target * lam / total if total > 0 else np.full(k, n_target / k)
    return Groups(center=center, delta=delta, target=target, lam=lam)


def reflect_unit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fold coordinates into [0, 1] by mirror reflection; also report odd-crossing parity."""
    m = np.floor(x)
    odd = (m.astype(np.int64) % 2) == 1
    y = x - m
    return np.where(odd, 1.0 - y, y), odd


def mh_displacement(delta: np.ndarray, sigma_delta: float, sigma_eps: float,
                    rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One random-walk MH update of displacement rows targeting N(0, sigma_delta^2 I).

    Returns the new displacements and the acceptance mask.
    """
    eps = rng.normal(0.0, 1.0, size=delta.shape) * sigma_eps
    u = rng.uniform(size=delta.shape[0])
    proposal = delta + eps
    log_ratio = -(np.sum(proposal ** 2, axis=1) - np.sum(delta ** 2, axis=1)) / (2.0 * sigma_delta ** 2)
    accept = np.log(u) < log_ratio
    return np.where(accept[:, None], proposal, delta), accept


def step_group_centers(groups: Groups, cfg: SpatialConfig, rng: np.random.Generator) -> int:
    """Advance every group center in place; returns accepted proposals."""
    if len(groups) == 0:
        return 0
    delta, accept = mh_displacement(groups.delta, cfg.sigma_delta, cfg.sigma_eps, rng)
    center, flipped = reflect_unit(groups.center + delta)
    # Reflection at a wall reverses the momentum along that axis; the target is symmetric.
    groups.delta = np.where(flipped, -delta, delta)
    groups.center = center
    return int(accept.sum())


def innovation_sd(phi1: float, phi2: float, sigma_n: float) -> float:
    """Noise sd keeping an AR(2) process at stationary marginal sd ``sigma_n``."""
    if not ar2_stationary(phi1, phi2):
        raise ConfigError("spatial.ar1", f"AR(2) coefficients ({phi1}, {phi2}) are not stationary")
    var = sigma_n ** 2 * (1.0 + phi2) * ((1.0 - phi2) ** 2 - phi1 ** 2) / (1.0 - phi2)
    return float(np.sqrt(var))


def step_node_offsets(offset: np.ndarray, offset_prev: np.ndarray, phi1: float, phi2: float,
                      sigma_n: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """AR(2) offset update. Returns (new offset, new previous offset)."""
    sd = innovation_sd(phi1, phi2, sigma_n)
    eta = rng.normal(0.0, 1.0, size=offset.shape) * sd
    return phi1 * offset + phi2 * offset_prev + eta, offset


def stationary_offsets(n: int, phi1: float, phi2: float, sigma_n: float,
                       rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw (offset_t, offset_{t-1}) pairs from the joint stationary AR(2) law."""
    lag1 = phi1 / (1.0 - phi2)
    prev = rng.normal(0.0, 1.0, size=(n, 2)) * sigma_n
    z = rng.normal(0.0, 1.0, size=(n, 2))
    cur = lag1 * prev + np.sqrt(max(0.0, 1.0 - lag1 ** 2)) * sigma_n * z
    return cur, prev


def positions(pop: Population, groups: Groups) -> np.ndarray:
    if len(pop) == 0:
        return np.zeros((0, 2))
    return groups.center[pop.group] + pop.offset


def distance(pos: np.ndarray, i: int, j: int) -> float:
    return float(np.hypot(*(pos[i] - pos[j])))


def group_weights(target: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Unnormalized probability that a newcomer joins each group."""
    return target / np.maximum(1, current)


def draw_deaths(n: int, mortality: float, disease_hazard: np.ndarray,
                rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-node death draws; returns (background death mask, disease death mask)."""
    u = rng.uniform(size=n)
    background = u < mortality
    total = 1.0 - (1.0 - mortality) * (1.0 - np.clip(disease_hazard, 0.0, 1.0))
    disease = (~background) & (u < total)
    return background, disease


def draw_insertions(n_alive: int, n_target: float, groups: Groups, group_of: np.ndarray,
                    demography: DemographyConfig, rng: np.random.Generator) -> np.ndarray:
    """Poisson number of newcomers and their group assignment; returns group index per newcomer."""
    mu = demography.responsiveness * max(0.0, n_target - n_alive)
    n_new = int(rng.poisson(mu)) if mu > 0 else 0
    if n_new == 0:
        return np.zeros(0, dtype=np.int64)
    current = np.bincount(group_of, minlength=len(groups))
    w = group_weights(groups.target, current)
    return rng.choice(len(groups), size=n_new, p=w / w.sum()).astype(np.int64)
