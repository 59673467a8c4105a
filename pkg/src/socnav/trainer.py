"""Single-process recurrent PPO with GAE over a set of simulator instances."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .autodiff import Tape
from .config import Config
from .env import SocNavEnv
from .errors import SetupError, TrainingError
from .metrics import success_rate
from .policy import (Batch, forward, goal_features, init_params, sample_action, save_checkpoint,
                     total_loss, zero_state)
from .runner import NetPolicy, run_episode

log = logging.getLogger(__name__)

CSV_COLUMNS = ("update", "steps", "mean_reward", "loss_main", "loss_count", "loss_pos",
               "loss_traj", "loss_risk", "sr_holdout")


class Adam:
    def __init__(self, params: dict, lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k in sorted(params):
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def clip_grads(grads: dict, max_norm: float) -> float:
    norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if max_norm > 0 and norm > max_norm:
        s = max_norm / (norm + 1e-12)
        for g in grads.values():
            g *= s
    return norm


def gae(rewards, values, dones, last_value, gamma, lam):
    """Advantages and returns for ``(T, E)`` arrays; ``dones[t]`` ends the episode after step t."""
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    last = np.zeros(rewards.shape[1])
    for t in range(T - 1, -1, -1):
        nxt = last_value if t == T - 1 else values[t + 1]
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * nxt * live - values[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
    return adv, adv + values


class EpisodeSource:
    """Endless deterministic stream of training episode configs for one worker."""

    def __init__(self, cfg: Config, worker: int):
        self.cfg = cfg
        self.rng = np.random.default_rng([cfg.train.seed, worker, 11])
        self.worker = worker
        self.count = 0

    def next(self):
        t = self.cfg.train
        lo, hi = t.scene_seeds
        ep = replace(self.cfg.episode,
                     size_class=str(self.rng.choice(list(t.size_classes))),
                     scene_seed=int(self.rng.integers(lo, hi)),
                     episode_seed=int(self.rng.integers(0, t.holdout_seed_offset)),
                     max_steps=t.max_steps or self.cfg.episode.max_steps)
        self.count += 1
        return ep


class Worker:
    def __init__(self, cfg: Config, index: int, want_targets: bool):
        self.source = EpisodeSource(cfg, index)
        self.want_targets = want_targets
        self.episode_return = 0.0
        self.finished = []  # returns of completed episodes
        self._new_episode()

    def _new_episode(self):
        for _ in range(100):
            self.env = SocNavEnv(self.source.next())
            try:
                self.obs = self.env.reset()
            except SetupError:
                continue
            break
        else:
            raise TrainingError("could not set up a training episode")
        self.targets = self.env.targets() if self.want_targets else None
        self.episode_return = 0.0

    def step(self, action):
        res = self.env.step(action)
        r = res.outcome.r_total
        self.episode_return += r
        done = res.done
        if done:
            self.finished.append((self.episode_return, self.env.success))
            self._new_episode()
        else:
            self.obs = res.obs
            self.targets = self.env.targets() if self.want_targets else None
        return r, done


@dataclass
class TrainResult:
    params: dict
    rows: list
    checkpoint: Path | None


def holdout_sr(params, cfg: Config) -> float:
    t = cfg.train
    policy = NetPolicy(params, cfg.net)
    recs = []
    lo, hi = t.holdout_scene_seeds
    for k in range(t.holdout_episodes):
        ep = replace(cfg.episode, size_class=t.size_classes[k % len(t.size_classes)],
                     scene_seed=lo + k % max(hi - lo, 1),
                     episode_seed=t.holdout_seed_offset + k,
                     max_steps=t.max_steps or cfg.episode.max_steps)
        try:
            recs.append(run_episode(ep, policy).record)
        except SetupError:
            continue
    return success_rate(recs)


def _dump_nan(out: Path | None, batch: Batch, update: int):
    if out is None:
        return None
    path = out / f"nan_dump_update{update}.npz"
    np.savez(path, **{k: getattr(batch, k) for k in batch.__dataclass_fields__})
    return path


def train(cfg: Config, out_dir=None, init: dict | None = None) -> TrainResult:
    """Run PPO for ``train.total_steps`` environment steps (rounded up to whole rollouts)."""
    t, net, lw = cfg.train, cfg.net, cfg.loss
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    params = init if init is not None else init_params(net, t.seed)
    params = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    rng = np.random.default_rng([t.seed, 7])
    opt = Adam(params, t.lr)
    E, T = t.envs, t.rollout
    per_update = E * T
    n_updates = math.ceil(t.total_steps / per_update) if t.total_steps > 0 else 0
    want_targets = lw.beta_aux > 0 or lw.beta_risk > 0
    rows = []
    ckpt = None
    writer = None
    fcsv = None
    if out is not None:
        fcsv = open(out / "train_log.csv", "w", newline="")
        writer = csv.writer(fcsv, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
    try:
        workers = [Worker(cfg, i, want_targets) for i in range(E)] if n_updates else []
        state = zero_state(net, E)
        starts_next = np.ones(E)
        M, H = net.m_max, net.horizon
        steps = 0
        last_sr = float("nan")
        for update in range(1, n_updates + 1):
            depth = np.zeros((T, E, net.rays))
            goal = np.zeros((T, E, 4))
            starts = np.zeros((T, E))
            actions = np.zeros((T, E), dtype=np.int64)
            logp = np.zeros((T, E))
            values = np.zeros((T, E))
            rewards = np.zeros((T, E))
            dones = np.zeros((T, E))
            count = np.zeros((T, E), dtype=np.int64)
            positions = np.zeros((T, E, M, 2))
            futures = np.zeros((T, E, M, H, 2))
            mask = np.zeros((T, E, M), dtype=bool)
            risk = np.zeros((T, E, M))
            init_state = state.copy()
            for step in range(T):
                d = np.stack([w.obs.depth for w in workers])
                g = np.array([goal_features(w.obs.goal) for w in workers])
                keep = (1.0 - starts_next)[None, :, None]
                state = state * keep
                logits, v, _, _, state = forward(params, net, d, g, state, aux=False)
                a = sample_action(logits, rng)
                z = logits - logits.max(axis=1, keepdims=True)
                lp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
                depth[step], goal[step], starts[step] = d, g, starts_next
                actions[step] = a
                logp[step] = lp[np.arange(E), a]
                values[step] = v
                if want_targets:
                    for i, w in enumerate(workers):
                        tg = w.targets
                        count[step, i] = tg.count
                        positions[step, i] = tg.positions
                        futures[step, i] = tg.futures
                        mask[step, i] = tg.mask
                        risk[step, i] = tg.risk
                for i, w in enumerate(workers):
                    r, done = w.step(int(a[i]))
                    rewards[step, i] = r
                    dones[step, i] = float(done)
                starts_next = dones[step].copy()
            steps += per_update
            d = np.stack([w.obs.depth for w in workers])
            g = np.array([goal_features(w.obs.goal) for w in workers])
            _, last_v, _, _, _ = forward(params, net, d, g, state * (1.0 - starts_next)[None, :,
                                                                                     None],
                                         aux=False)
            adv, ret = gae(rewards, values, dones, last_v, t.gamma, t.gae_lambda)

            sums = np.zeros(6)
            n_mb = 0
            per_mb = E // t.minibatches
            for _ in range(t.epochs):
                perm = rng.permutation(E)
                for m in range(t.minibatches):
                    idx = np.sort(perm[m * per_mb:(m + 1) * per_mb])
                    a_mb = adv[:, idx]
                    a_mb = (a_mb - a_mb.mean()) / (a_mb.std() + 1e-8)
                    batch = Batch(depth[:, idx], goal[:, idx], starts[:, idx],
                                  init_state[:, idx], actions[:, idx], logp[:, idx], a_mb,
                                  ret[:, idx], count[:, idx], positions[:, idx],
                                  futures[:, idx], mask[:, idx], risk[:, idx])
                    tape = Tape()
                    loss, parts = total_loss(tape, params, net, batch, lw)
                    if not math.isfinite(parts.total):
                        path = _dump_nan(out, batch, update)
                        raise TrainingError(f"non-finite loss at update {update}; "
                                            f"batch dumped to {path}")
                    tape.backward(loss)
                    grads = tape.grads()
                    clip_grads(grads, t.max_grad_norm)
                    opt.step(params, grads)
                    sums += [parts.main, parts.count, parts.pos, parts.traj, parts.risk, 0.0]
                    n_mb += 1
            sums /= max(n_mb, 1)
            finished = [r for w in workers for r, _ in w.finished]
            for w in workers:
                w.finished.clear()
            mean_reward = float(np.mean(finished)) if finished else float("nan")
            if t.eval_every and (update % t.eval_every == 0 or update == n_updates):
                last_sr = holdout_sr(params, cfg)
                sr = last_sr
            else:
                sr = float("nan")
            row = (update, steps, mean_reward, *sums[:5], sr)
            rows.append(row)
            if writer is not None:
                writer.writerow([row[0], row[1]] + [repr(float(x)) for x in row[2:]])
                fcsv.flush()
            log.info("update %d steps %d reward %.3f main %.4f sr %s", update, steps,
                     mean_reward, sums[0], sr)
            if out is not None and t.checkpoint_every and update % t.checkpoint_every == 0:
                save_checkpoint(out / f"update_{update:05d}.ckpt", params, net,
                                {"update": update, "steps": steps, "config_hash": cfg.digest})
        if out is not None:
            ckpt = out / "final.ckpt"
            save_checkpoint(ckpt, params, net, {"update": n_updates, "steps": steps,
                                                "config_hash": cfg.digest})
    finally:
        if fcsv is not None:
            fcsv.close()
    return TrainResult(params, rows, ckpt)
