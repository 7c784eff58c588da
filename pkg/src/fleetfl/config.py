"""Run configuration: JSON-backed dataclasses with unknown-key rejection.

A config fully determines a run. Infinite epsilons are written as the JSON
string "inf".
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


def _num(v):
    if v == "inf":
        return math.inf
    return v


@dataclass
class FleetConfig:
    n_nodes: int = 4
    samples_per_node: int = 100
    feature_dim: int = 8
    heterogeneity: float = 0.3


@dataclass
class TrainConfig:
    lr: float = 0.5
    epochs: int = 2
    batch: int = 32


@dataclass
class PrivacyConfig:
    eps_min: float = 0.5
    eps_max: float = 8.0  # "inf" disables local noise
    delta: float = 1e-5
    clip_norm: float = 1.0
    mask_strength_min: float = 0.1
    mask_strength_max: float = 2.0
    budget_cap: float = 20.0
    eps_global: float = math.inf  # "inf" disables global noise
    delta_global: float = 1e-5
    clip_global: float = 1.0


@dataclass
class LedgerConfig:
    stakes: dict[str, float] = field(default_factory=lambda: {"v0": 1.0, "v1": 1.0, "v2": 2.0})
    quorum_fraction: float = 2.0 / 3.0
    committee_size: int | None = None  # default min(5, validators)
    byzantine_refuse: list[str] = field(default_factory=list)
    byzantine_false: list[str] = field(default_factory=list)
    max_update_norm: float | None = None  # None -> auto from privacy bounds
    max_declared_samples: int | None = None


@dataclass
class FeedbackConfig:
    enabled: bool = True
    holdout_fraction: float = 0.3
    max_validation_samples: int = 8
    explain_repeats: int = 5
    correction_lr: float = 0.1
    correction_steps: int = 5
    w_min: float = 0.05
    n_ref: int = 1000


@dataclass
class RunConfig:
    seed: int = 0
    rounds: int = 10
    fleet: FleetConfig = field(default_factory=FleetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    privacy: PrivacyConfig = field(default_factory=PrivacyConfig)
    ledger: LedgerConfig = field(default_factory=LedgerConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    integration_site: str = "node"  # "node" or "cloud"
    threat_schedule: list[float] | float = 0.1
    freshness_window: int | None = None  # ticks; None -> two rounds' worth
    holdout_samples: int = 500
    output_dir: str | None = None

    def __post_init__(self):
        if self.rounds < 0:
            raise ConfigError("rounds must be non-negative")
        if self.integration_site not in ("node", "cloud"):
            raise ConfigError("integration_site must be 'node' or 'cloud'")

    def threat_for_round(self, r: int) -> float:
        if isinstance(self.threat_schedule, (int, float)):
            return float(self.threat_schedule)
        return float(self.threat_schedule[r % len(self.threat_schedule)])


_NESTED = {
    "fleet": FleetConfig,
    "train": TrainConfig,
    "privacy": PrivacyConfig,
    "ledger": LedgerConfig,
    "feedback": FeedbackConfig,
}


def _build(cls, data: dict, path: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys at {path}: {sorted(unknown)}")
    return cls(**{k: _num(v) for k, v in data.items()})


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, key)
        else:
            kwargs[key] = _num(value)
    return RunConfig(**kwargs)


def load(path: str) -> RunConfig:
    with open(path) as f:
        return from_dict(json.load(f))


def to_dict(cfg: RunConfig) -> dict:
    def convert(v):
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        if dataclasses.is_dataclass(v):
            return {k: convert(x) for k, x in dataclasses.asdict(v).items()}
        if isinstance(v, dict):
            return {k: convert(x) for k, x in v.items()}
        if isinstance(v, list):
            return [convert(x) for x in v]
        return v

    return {f.name: convert(getattr(cfg, f.name)) for f in dataclasses.fields(cfg)}
