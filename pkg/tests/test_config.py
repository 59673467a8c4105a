import math
from dataclasses import replace

import pytest
import yaml

from socnav.config import (Config, SuiteConfig, TrainConfig, config_hash, from_dict, load_config,
                           packaged_configs, with_overrides)
from socnav.errors import ConfigError


def test_default_yaml_equals_dataclass_defaults():
    assert load_config(packaged_configs()["default"]) == Config()
    assert load_config("default") == Config()


def test_packaged_configs_all_load():
    names = set(packaged_configs())
    assert {"default", "corridor_train", "train_risk", "suite_baselines"} <= names
    for name in names:
        load_config(name)
    risk = load_config("train_risk")
    assert risk.loss.beta_risk == 0.1 and risk.train.size_classes == ("medium",)


def test_empty_and_none_give_defaults():
    assert from_dict({}) == Config() == from_dict(None)


@pytest.mark.parametrize("raw", [
    {"bogus": {}},
    {"episode": {"max_stepz": 3}},
    {"version": 2},
    {"episode": {"reward": {}}},
    {"net": {"rays": 32}},  # sensor still has 64
    {"train": {"envs": 3, "minibatches": 2}},
    {"suite": {"workers": 0}},
    {"suite": {"scene_seeds": [3, 3]}},
    [1, 2],
])
def test_invalid_configs_raise(raw):
    with pytest.raises(ConfigError):
        from_dict(raw)


def test_units_and_derived_net_fields():
    cfg = from_dict({"sensor": {"rays": 32, "fov_deg": 90}, "episode": {"turn_angle_deg": 45}})
    assert cfg.episode.sensor.fov == pytest.approx(math.pi / 2)
    assert cfg.episode.turn_angle == pytest.approx(math.pi / 4)
    assert cfg.net.rays == 32 and cfg.net.horizon == cfg.episode.reward.H


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("train: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_with_overrides_and_hash(tmp_path):
    cfg = load_config("corridor_train")
    new = with_overrides(cfg, "train", total_steps=10)
    assert new.train.total_steps == 10 and cfg.train.total_steps == 200_000
    assert new.digest != cfg.digest
    with pytest.raises(ConfigError):
        with_overrides(cfg, "train", nope=1)
    # the hash depends on content, not on key order or file
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"train": {"seed": 0, "total_steps": 200000,
                                           "size_classes": ["corridor"]}, "version": 1}))
    assert load_config(p).digest == cfg.digest
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
    assert len(cfg.digest) == 16


def test_section_dataclasses_frozen():
    with pytest.raises(Exception):
        Config().train.seed = 4
    assert replace(TrainConfig(), seed=4).seed == 4
    assert SuiteConfig().episodes_per_scene == 5
