import csv

import numpy as np
import pytest

from socnav.config import from_dict
from socnav.errors import TrainingError
from socnav.policy import init_params, load_checkpoint
from socnav.trainer import Adam, clip_grads, gae, train


def small_config(**train):
    t = {"seed": 3, "envs": 2, "rollout": 16, "epochs": 2, "minibatches": 2, "total_steps": 64,
         "eval_every": 2, "holdout_episodes": 2, "max_steps": 40, "checkpoint_every": 1}
    t.update(train)
    return from_dict({"sensor": {"rays": 16},
                      "net": {"hidden": 8, "enc1": 16, "enc2": 8, "goal_dim": 8,
                              "risk_hidden": 8},
                      "train": t})


def brute_gae(rewards, values, dones, last_value, gamma, lam):
    T, E = rewards.shape
    adv = np.zeros((T, E))
    nxt = np.vstack([values[1:], last_value[None]])
    for e in range(E):
        for t in range(T):
            total, disc = 0.0, 1.0
            for k in range(t, T):
                delta = rewards[k, e] + gamma * nxt[k, e] * (1 - dones[k, e]) - values[k, e]
                total += disc * delta
                if dones[k, e]:
                    break
                disc *= gamma * lam
            adv[t, e] = total
    return adv


def test_gae_matches_brute_force():
    rng = np.random.default_rng(0)
    T, E = 12, 3
    r, v = rng.normal(size=(T, E)), rng.normal(size=(T, E))
    d = (rng.random((T, E)) < 0.2).astype(float)
    last = rng.normal(size=E)
    adv, ret = gae(r, v, d, last, 0.99, 0.95)
    assert np.allclose(adv, brute_gae(r, v, d, last, 0.99, 0.95), atol=1e-12)
    assert np.allclose(ret, adv + v)
    # lambda = 1 and no terminations: discounted return minus baseline
    adv1, _ = gae(r, v, np.zeros((T, E)), last, 0.9, 1.0)
    disc = sum(0.9**k * r[k] for k in range(T)) + 0.9**T * last
    assert np.allclose(adv1[0], disc - v[0], atol=1e-12)


def test_clip_and_adam():
    g = {"a": np.array([3.0, 4.0])}
    assert clip_grads(g, 1.0) == 5.0
    assert np.allclose(g["a"], [0.6, 0.8])
    p = {"a": np.array([1.0, -1.0])}
    opt = Adam(p, lr=0.1)
    opt.step(p, {"a": np.array([2.0, -0.5])})
    assert np.allclose(p["a"], [0.9, -0.9])  # first step moves each entry by lr


def test_zero_updates_checkpoint_equals_init(tmp_path):
    cfg = small_config(total_steps=0)
    res = train(cfg, tmp_path)
    params, net, extra = load_checkpoint(res.checkpoint)
    init = init_params(cfg.net, cfg.train.seed)
    assert net == cfg.net and extra["update"] == 0
    assert all(np.array_equal(params[k], init[k]) for k in init)
    assert res.rows == []


def test_training_is_deterministic(tmp_path):
    cfg = small_config()
    a = train(cfg, tmp_path / "a")
    b = train(cfg, tmp_path / "b")
    assert (tmp_path / "a" / "train_log.csv").read_bytes() == \
        (tmp_path / "b" / "train_log.csv").read_bytes()
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    rows = list(csv.DictReader(open(tmp_path / "a" / "train_log.csv")))
    assert list(rows[0]) == ["update", "steps", "mean_reward", "loss_main", "loss_count",
                             "loss_pos", "loss_traj", "loss_risk", "sr_holdout"]
    assert [int(r["steps"]) for r in rows] == [32, 64]
    assert np.isnan(float(rows[0]["sr_holdout"])) and 0 <= float(rows[1]["sr_holdout"]) <= 1
    assert sorted(p.name for p in (tmp_path / "a").glob("*.ckpt")) == \
        ["final.ckpt", "update_00001.ckpt", "update_00002.ckpt"]
    init = init_params(cfg.net, cfg.train.seed)
    assert any(not np.array_equal(a.params[k], init[k]) for k in init)


def test_nan_loss_aborts_with_dump(tmp_path):
    cfg = small_config(total_steps=32)
    bad = init_params(cfg.net, 0)
    bad["critic.b"][:] = np.nan
    with pytest.raises(TrainingError, match="non-finite"):
        train(cfg, tmp_path, init=bad)
    dumps = list(tmp_path.glob("nan_dump_update*.npz"))
    assert len(dumps) == 1
    with np.load(dumps[0]) as z:
        assert "depth" in z and z["depth"].shape[0] == 16
