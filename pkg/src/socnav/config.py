"""Experiment configuration: a versioned YAML document mapped onto dataclasses.

Top-level sections (all optional, defaults fill the gaps)::

    version: 1
    episode:  EpisodeConfig fields (turn angle and fov given in degrees)
    reward:   RewardWeights fields
    risk:     RiskParams fields
    sensor:   rays, fov_deg, d_max, noise_std
    crowd:    CrowdParams fields
    suite:    SuiteConfig fields
    net:      NetConfig fields
    loss:     LossWeights fields
    train:    TrainConfig fields
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources

import yaml

from .crowd import CrowdParams
from .env import EpisodeConfig
from .errors import ConfigError
from .policy import LossWeights, NetConfig
from .reward import RewardWeights
from .sensing import SensorConfig
from .targets import RiskParams

CONFIG_VERSION = 1


@dataclass(frozen=True)
class SuiteConfig:
    policy: str = "greedy_geodesic"
    size_classes: tuple = ("medium", "large")
    scene_seeds: tuple = (0, 20)  # half-open range
    episodes_per_scene: int = 5
    episode_seed_offset: int = 0
    humans: int | None = None
    workers: int = 1
    risk_threshold: float = 0.75
    log_targets: bool = False
    write_logs: bool = True

    def __post_init__(self):
        if self.episodes_per_scene < 1 or self.scene_seeds[1] <= self.scene_seeds[0]:
            raise ConfigError("a suite needs at least one episode")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    seed: int = 0
    envs: int = 8
    rollout: int = 128
    total_steps: int = 200_000
    epochs: int = 4
    minibatches: int = 2
    lr: float = 2.5e-4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    max_grad_norm: float = 0.5
    checkpoint_every: int = 50  # updates
    eval_every: int = 10  # updates
    holdout_episodes: int = 20
    size_classes: tuple = ("corridor",)
    scene_seeds: tuple = (0, 1)
    holdout_scene_seeds: tuple = (0, 1)
    holdout_seed_offset: int = 1_000_000_000
    max_steps: int | None = None  # overrides episode.max_steps during training

    def __post_init__(self):
        for name in ("envs", "rollout", "epochs", "minibatches"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be >= 1")
        if self.envs % self.minibatches:
            raise ConfigError("train.envs must be divisible by train.minibatches")
        if self.total_steps < 0:
            raise ConfigError("train.total_steps must be >= 0")


@dataclass(frozen=True)
class Config:
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    net: NetConfig = field(default_factory=NetConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def digest(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    return hashlib.sha256(json.dumps(raw, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _build(cls, section: str, data, renames=None):
    data = dict(data or {})
    renames = renames or {}
    for src, (dst, conv) in renames.items():
        if src in data:
            data[dst] = conv(data.pop(src))
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    for k, v in list(data.items()):
        if isinstance(v, list):
            data[k] = tuple(v)
    try:
        return cls(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def from_dict(raw: dict) -> Config:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    known = {"version", "episode", "reward", "risk", "sensor", "crowd", "suite", "net", "loss",
             "train"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    version = raw.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    reward = _build(RewardWeights, "reward", raw.get("reward"))
    risk = _build(RiskParams, "risk", raw.get("risk"))
    sensor = _build(SensorConfig, "sensor", raw.get("sensor"),
                    {"fov_deg": ("fov", math.radians)})
    crowd = _build(CrowdParams, "crowd", raw.get("crowd"))
    ep = dict(raw.get("episode") or {})
    for k in ("reward", "risk", "sensor", "crowd"):
        if k in ep:
            raise ConfigError(f"[episode].{k} belongs in its own section")
    ep.update(reward=reward, risk=risk, sensor=sensor, crowd=crowd)
    episode = _build(EpisodeConfig, "episode", ep, {"turn_angle_deg": ("turn_angle",
                                                                        math.radians)})
    suite = _build(SuiteConfig, "suite", raw.get("suite"))
    net_raw = dict(raw.get("net") or {})
    for k, v in (("rays", sensor.rays), ("horizon", reward.H), ("d_max", sensor.d_max)):
        if k in net_raw and net_raw[k] != v:
            raise ConfigError(f"[net].{k} must match the sensor/reward settings")
        net_raw[k] = v
    net = _build(NetConfig, "net", net_raw)
    loss = _build(LossWeights, "loss", raw.get("loss"))
    train = _build(TrainConfig, "train", raw.get("train"))
    return Config(episode, suite, net, loss, train, raw=raw)


def packaged_configs() -> dict:
    """Configs shipped with the package, keyed by stem (``default``, ``corridor_train``...)."""
    root = resources.files("socnav") / "configs"
    return {p.name[:-5]: p for p in root.iterdir() if p.name.endswith(".yaml")}


def load_config(path) -> Config:
    """Load a YAML file; a bare name such as ``corridor_train`` picks a shipped config."""
    shipped = packaged_configs()
    if not os.path.exists(path) and str(path) in shipped:
        path = shipped[str(path)]
    try:
        with open(path) as f:
            raw = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return from_dict(raw)


def with_overrides(cfg: Config, section: str, **values) -> Config:
    """Copy of ``cfg`` with ``raw[section]`` updated and everything re-validated."""
    raw = json.loads(json.dumps(cfg.raw, default=list))
    raw.setdefault(section, {})
    raw[section] = {**(raw[section] or {}), **values}
    return from_dict(raw)
