"""Simulation configuration: typed sections, defaults, validation, JSON parsing.

A config document is JSON. Top-level keys mirror :class:`SimConfig`; an
optional ``scenarios`` block maps scenario names to partial override
documents that are deep-merged over the base before validation.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import math
import typing
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration. ``field`` is the dotted path of the offending key."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}" if field else message)


def _prob(path: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ConfigError(path, f"probability out of range [0, 1]: {value!r}")


def _nonneg(path: str, value: float) -> None:
    if not value >= 0:
        raise ConfigError(path, f"must be >= 0: {value!r}")


def _pos(path: str, value: float) -> None:
    if not value > 0:
        raise ConfigError(path, f"must be > 0: {value!r}")


def _choice(path: str, value: str, options: tuple[str, ...]) -> None:
    if value not in options:
        raise ConfigError(path, f"must be one of {list(options)}, got {value!r}")


@dataclass
class SpatialConfig:
    lambda_mode: str = "fixed"          # fixed | lognormal
    lam: Optional[float] = None         # fixed Poisson mean per group; None -> n_target / k_groups
    lognormal_meanlog: float = 3.0
    lognormal_sdlog: float = 0.8
    sigma_delta: float = 0.005          # stationary sd of group displacement, per axis
    sigma_eps: float = 0.002            # sd of displacement proposal
    sigma_offset: float = 0.03          # stationary sd of node offset from group center
    ar1: float = 0.5
    ar2: float = 0.2

    def validate(self, path: str) -> None:
        _choice(f"{path}.lambda_mode", self.lambda_mode, ("fixed", "lognormal"))
        if self.lam is not None:
            _nonneg(f"{path}.lam", self.lam)
        _nonneg(f"{path}.lognormal_sdlog", self.lognormal_sdlog)
        _pos(f"{path}.sigma_delta", self.sigma_delta)
        _nonneg(f"{path}.sigma_eps", self.sigma_eps)
        _pos(f"{path}.sigma_offset", self.sigma_offset)
        if not ar2_stationary(self.ar1, self.ar2):
            raise ConfigError(f"{path}.ar1", f"AR(2) coefficients ({self.ar1}, {self.ar2}) are not stationary")


def ar2_stationary(phi1: float, phi2: float) -> bool:
    return -1.0 < phi2 < 1.0 and phi2 + phi1 < 1.0 and phi2 - phi1 < 1.0


@dataclass
class DemographyConfig:
    mortality: float = 1.0 / 3650.0     # background per-day death probability
    responsiveness: float = 1.0         # rho in mu_t = rho * max(0, N_target - N_t)
    male_fraction: float = 0.5

    def validate(self, path: str) -> None:
        _prob(f"{path}.mortality", self.mortality)
        if not 0.0 < self.responsiveness <= 1.0:
            raise ConfigError(f"{path}.responsiveness", f"must be in (0, 1]: {self.responsiveness!r}")
        _prob(f"{path}.male_fraction", self.male_fraction)


@dataclass
class NetworkConfig:
    enabled: bool = True
    kernel: str = "normal"              # normal | logistic | disk
    amplitude: float = 0.1
    spread: float = 0.02
    reach_multiple: float = 3.0
    logistic_shape: float = 4.0
    degree_policy: str = "none"         # none | compensatory | preferential
    max_degree: int = 1
    residual: float = 0.0               # kappa: multiplier once max_degree is reached
    pref_exponent: float = 0.8
    pref_cap: float = 16.0              # upper bound on the preferential multiplier
    component_multiplier: float = 1.0   # applied when both nodes already share a component
    opposite_sex_only: bool = True
    end_hazard: float = 1.0 / 730.0     # per-endpoint per-day partnership ending probability

    def validate(self, path: str) -> None:
        _choice(f"{path}.kernel", self.kernel, ("normal", "logistic", "disk"))
        _prob(f"{path}.amplitude", self.amplitude)
        _pos(f"{path}.spread", self.spread)
        _pos(f"{path}.reach_multiple", self.reach_multiple)
        _pos(f"{path}.logistic_shape", self.logistic_shape)
        _choice(f"{path}.degree_policy", self.degree_policy, ("none", "compensatory", "preferential"))
        if self.max_degree < 1:
            raise ConfigError(f"{path}.max_degree", "must be >= 1")
        _prob(f"{path}.residual", self.residual)
        _nonneg(f"{path}.pref_exponent", self.pref_exponent)
        _pos(f"{path}.pref_cap", self.pref_cap)
        _nonneg(f"{path}.component_multiplier", self.component_multiplier)
        _prob(f"{path}.end_hazard", self.end_hazard)


@dataclass
class StrainSeed:
    early_factor: float = 15.0
    chronic_rate: float = 0.008
    count: int = 5

    def validate(self, path: str) -> None:
        _nonneg(f"{path}.early_factor", self.early_factor)
        _prob(f"{path}.chronic_rate", self.chronic_rate)
        if self.count < 0:
            raise ConfigError(f"{path}.count", "must be >= 0")


@dataclass
class EpidemicConfig:
    enabled: bool = True
    seed_step: int = 0
    strains: list[StrainSeed] = field(default_factory=lambda: [StrainSeed()])
    contact_prob: float = 0.3
    early_mean_days: float = 75.0
    early_duration: str = "geometric"   # geometric | weibull
    early_weibull_shape: float = 2.0
    gud_prevalence: float = 0.0
    gud_multiplier: float = 4.0
    tradeoff_gamma: float = 2.0
    tradeoff_scale: Optional[float] = None   # None -> calibrated so alpha(reference rate) = reference hazard
    tradeoff_reference_rate: float = 0.12     # early rate of the factor-15 strain: ten-year survival
    tradeoff_reference_hazard: float = 1.0 / 3650.0
    virulence_basis: str = "strain"     # strain: the strain's early rate, all stages | stage: current stage rate
    transmission_enabled: bool = True
    mutation: bool = False
    mutation_delta: float = 0.002
    mutation_kind: str = "uniform"      # uniform | normal
    treatment_transmission: float = 0.05
    treatment_mortality: float = 0.2
    late_stage: bool = False            # three-stage variant: chronic -> late after a geometric wait
    late_factor: float = 7.0
    chronic_mean_days: float = 3285.0

    def validate(self, path: str) -> None:
        if self.seed_step < 0:
            raise ConfigError(f"{path}.seed_step", "must be >= 0")
        for i, s in enumerate(self.strains):
            s.validate(f"{path}.strains[{i}]")
        _prob(f"{path}.contact_prob", self.contact_prob)
        _pos(f"{path}.early_mean_days", self.early_mean_days)
        _choice(f"{path}.early_duration", self.early_duration, ("geometric", "weibull"))
        _pos(f"{path}.early_weibull_shape", self.early_weibull_shape)
        _prob(f"{path}.gud_prevalence", self.gud_prevalence)
        _nonneg(f"{path}.gud_multiplier", self.gud_multiplier)
        if not self.tradeoff_gamma > 1.0:
            raise ConfigError(f"{path}.tradeoff_gamma", f"curvature must be > 1: {self.tradeoff_gamma!r}")
        if self.tradeoff_scale is not None:
            _pos(f"{path}.tradeoff_scale", self.tradeoff_scale)
        _pos(f"{path}.tradeoff_reference_rate", self.tradeoff_reference_rate)
        _prob(f"{path}.tradeoff_reference_hazard", self.tradeoff_reference_hazard)
        _choice(f"{path}.virulence_basis", self.virulence_basis, ("stage", "strain"))
        _nonneg(f"{path}.mutation_delta", self.mutation_delta)
        _choice(f"{path}.mutation_kind", self.mutation_kind, ("uniform", "normal"))
        _nonneg(f"{path}.treatment_transmission", self.treatment_transmission)
        _nonneg(f"{path}.treatment_mortality", self.treatment_mortality)
        _nonneg(f"{path}.late_factor", self.late_factor)
        _pos(f"{path}.chronic_mean_days", self.chronic_mean_days)

    def resolved_tradeoff_scale(self) -> float:
        if self.tradeoff_scale is not None:
            return self.tradeoff_scale
        return self.tradeoff_reference_hazard / self.tradeoff_reference_rate ** self.tradeoff_gamma


@dataclass
class ActionConfig:
    kind: str = "none"                  # none | treat | cure | vaccine
    resistance: float = 0.0             # cure / vaccine resistance rho

    def validate(self, path: str) -> None:
        _choice(f"{path}.kind", self.kind, ("none", "treat", "cure", "vaccine"))
        _prob(f"{path}.resistance", self.resistance)


@dataclass
class DesignConfig:
    name: str = "design"
    kind: str = "link_trace"            # link_trace | random_walk | rds
    start_step: int = 0
    init: str = "srswor"                # none | bernoulli | srswor | with_replacement | spatial_bernoulli
    init_p: float = 0.0
    init_n: int = 1
    init_center: list[float] = field(default_factory=lambda: [0.5, 0.5])
    init_radius: float = 0.1
    follow_p: float = 0.5
    p_r: float = 0.0
    n_target: int = 20
    removal: str = "target"             # target | constant | none
    q: float = 0.0                      # constant removal probability when removal == constant
    replacement: float = 1.0            # r
    replacement_recovery_days: float = 0.0   # > 0: r rises linearly to 1 over this many days since removal
    jump_p: float = 0.0
    rescue_jump_p: float = 0.5
    coupons: int = 3
    action: ActionConfig = field(default_factory=ActionConfig)
    test_members: bool = False          # seek-and-treat: test members, act on positives
    positive_follow_boost: float = 2.0
    negative_removal_q: float = 0.5

    def validate(self, path: str) -> None:
        _choice(f"{path}.kind", self.kind, ("link_trace", "random_walk", "rds"))
        if self.start_step < 0:
            raise ConfigError(f"{path}.start_step", "must be >= 0")
        _choice(f"{path}.init", self.init,
                ("none", "bernoulli", "srswor", "with_replacement", "spatial_bernoulli"))
        _prob(f"{path}.init_p", self.init_p)
        if self.init_n < 0:
            raise ConfigError(f"{path}.init_n", "must be >= 0")
        if len(self.init_center) != 2:
            raise ConfigError(f"{path}.init_center", "must have two coordinates")
        _nonneg(f"{path}.init_radius", self.init_radius)
        _prob(f"{path}.follow_p", self.follow_p)
        _prob(f"{path}.p_r", self.p_r)
        if self.n_target < 0:
            raise ConfigError(f"{path}.n_target", "must be >= 0")
        _choice(f"{path}.removal", self.removal, ("target", "constant", "none"))
        _prob(f"{path}.q", self.q)
        _prob(f"{path}.replacement", self.replacement)
        _nonneg(f"{path}.replacement_recovery_days", self.replacement_recovery_days)
        _prob(f"{path}.jump_p", self.jump_p)
        _prob(f"{path}.rescue_jump_p", self.rescue_jump_p)
        if self.coupons < 0:
            raise ConfigError(f"{path}.coupons", "must be >= 0")
        self.action.validate(f"{path}.action")
        _nonneg(f"{path}.positive_follow_boost", self.positive_follow_boost)
        _prob(f"{path}.negative_removal_q", self.negative_removal_q)


@dataclass
class PairStrategyConfig:
    enabled: bool = False
    fraction: float = 1.0
    assort_weight: float = 0.0
    duration_days: int = 84
    p_s: float = 0.10
    start_step: int = 0
    with_all_partners: bool = True      # False: an adopter with another live partner declines the protocol

    def validate(self, path: str) -> None:
        _prob(f"{path}.fraction", self.fraction)
        _nonneg(f"{path}.assort_weight", self.assort_weight)
        if self.duration_days < 0:
            raise ConfigError(f"{path}.duration_days", "must be >= 0")
        _prob(f"{path}.p_s", self.p_s)
        if self.start_step < 0:
            raise ConfigError(f"{path}.start_step", "must be >= 0")


@dataclass
class DiagnosticsConfig:
    recency_days: int = 30
    ecf_points: int = 64
    ecf_series: str = "prevalence"
    ecf_a_max: Optional[float] = None   # None -> 8 / sd of the series over the warmup
    ecf_warmup: int = 100
    hist_bins: int = 20
    degree_every: int = 50              # record degree strata every this many steps

    def validate(self, path: str) -> None:
        if self.recency_days < 0:
            raise ConfigError(f"{path}.recency_days", "must be >= 0")
        if self.ecf_points < 2:
            raise ConfigError(f"{path}.ecf_points", "must be >= 2")
        if self.ecf_a_max is not None:
            _pos(f"{path}.ecf_a_max", self.ecf_a_max)
        if self.ecf_warmup < 1:
            raise ConfigError(f"{path}.ecf_warmup", "must be >= 1")
        if self.hist_bins < 1:
            raise ConfigError(f"{path}.hist_bins", "must be >= 1")
        if self.degree_every < 1:
            raise ConfigError(f"{path}.degree_every", "must be >= 1")


@dataclass
class SimConfig:
    schema_version: int = SCHEMA_VERSION
    k_groups: int = 10
    n_target: int = 1000
    horizon: int = 1000
    rng_seed: int = 0
    spatial: SpatialConfig = field(default_factory=SpatialConfig)
    demography: DemographyConfig = field(default_factory=DemographyConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    epidemic: EpidemicConfig = field(default_factory=EpidemicConfig)
    designs: list[DesignConfig] = field(default_factory=list)
    pair_strategy: PairStrategyConfig = field(default_factory=PairStrategyConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)

    def validate(self) -> "SimConfig":
        _normalize(self)
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError("schema_version",
                              f"unsupported version {self.schema_version!r} (expected {SCHEMA_VERSION})")
        if self.k_groups < 1:
            raise ConfigError("k_groups", "must be >= 1")
        if self.n_target < 1:
            raise ConfigError("n_target", "must be >= 1")
        if self.horizon < 1:
            raise ConfigError("horizon", "must be >= 1")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ConfigError("rng_seed", "must be a 64-bit unsigned integer")
        self.spatial.validate("spatial")
        self.demography.validate("demography")
        self.network.validate("network")
        self.epidemic.validate("epidemic")
        names = set()
        for i, d in enumerate(self.designs):
            d.validate(f"designs[{i}]")
            if d.name in names:
                raise ConfigError(f"designs[{i}].name", f"duplicate design name {d.name!r}")
            names.add(d.name)
        self.pair_strategy.validate("pair_strategy")
        self.diagnostics.validate("diagnostics")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **overrides: Any) -> "SimConfig":
        """Deep-merged copy; nested sections may be given as dicts."""
        merged = _deep_merge(self.to_dict(), overrides)
        return from_dict(merged)


# -- (de)serialization ---------------------------------------------------------

def _normalize(obj: Any) -> None:
    """Store numbers in float fields as Python floats, so configs built in code serialize like parsed ones."""
    hints = typing.get_type_hints(type(obj))
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        tp = hints[f.name]
        if tp is float or tp == Optional[float]:
            if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
                setattr(obj, f.name, float(value))
        elif dataclasses.is_dataclass(value):
            _normalize(value)
        elif isinstance(value, list):
            for item in value:
                if dataclasses.is_dataclass(item):
                    _normalize(item)

def _coerce(tp: Any, value: Any, path: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected an object, got {type(value).__name__}")
        return _build(tp, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return [_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(path, f"unsupported field type {tp!r}")


def _build(cls: type, data: dict, path: str) -> Any:
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, "unknown key")
    kwargs = {}
    for name in names:
        if name in data:
            where = f"{path}.{name}" if path else name
            kwargs[name] = _coerce(hints[name], data[name], where)
    return cls(**kwargs)


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def from_dict(data: dict) -> SimConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "config document must be a JSON object")
    if "schema_version" not in data:
        raise ConfigError("schema_version", "missing")
    return _build(SimConfig, data, "").validate()


def parse_config(text: str, scenario: Optional[str] = None) -> SimConfig:
    """Parse a JSON config document, optionally applying a named scenario block."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError("", "config document must be a JSON object")
    scenarios = data.pop("scenarios", {})
    if not isinstance(scenarios, dict):
        raise ConfigError("scenarios", "expected an object of named scenario blocks")
    if scenario is not None:
        if scenario not in scenarios:
            raise ConfigError("scenarios", f"no scenario named {scenario!r}")
        data = _deep_merge(data, scenarios[scenario])
    return from_dict(data)


def scenario_names(text: str) -> list[str]:
    data = json.loads(text)
    return sorted(data.get("scenarios", {}))


def dump_config(config: SimConfig) -> str:
    """Effective (fully resolved) config as stable JSON."""
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
