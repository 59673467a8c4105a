"""Paired training experiment: does the risk head change how often the policy hits people?

For every master seed a no-human corridor warm start is trained once, then two
runs continue from it among humans, identical except for ``loss.beta_risk``.
Both checkpoints are evaluated on the same held-out suite episodes.

    python -m socnav.experiments --out results/risk_effect
"""

from __future__ import annotations

import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import Config, SuiteConfig, TrainConfig, from_dict
from .policy import load_checkpoint
from .runner import run_suite, summary_dict
from .trainer import train

log = logging.getLogger(__name__)

RISK_SETTINGS = (0.1, 0.0)


def warmup_config(seed: int, steps: int) -> Config:
    cfg = from_dict({})
    return replace(cfg, train=replace(cfg.train, seed=seed, total_steps=steps))


def crowd_config(seed: int, beta_risk: float, steps: int) -> Config:
    cfg = from_dict({"loss": {"beta_risk": beta_risk}})
    t = TrainConfig(seed=seed, total_steps=steps, size_classes=("medium",),
                    scene_seeds=(1000, 1100), holdout_scene_seeds=(2000, 2010),
                    holdout_episodes=20, eval_every=25, checkpoint_every=100, max_steps=300)
    return replace(cfg, train=t)


def eval_suite(workers: int = 1) -> SuiteConfig:
    # 20 scenes x 2 classes x 5 episodes = 200 paired episodes, 4 or 6 humans each
    return SuiteConfig(size_classes=("medium", "large"), scene_seeds=(0, 20),
                       episodes_per_scene=5, episode_seed_offset=50_000, workers=workers,
                       write_logs=False)


def _load(path: Path) -> dict:
    return json.loads(path.read_text()) if path.exists() else {}


def run_risk_effect(out_dir, steps: int = 500_000, warmup_steps: int = 200_000,
                    seeds=(0, 1, 2), workers: int = 1) -> dict:
    """Train and evaluate every (seed, beta_risk) pair; finished pieces are reused on rerun."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res_path = out / "results.json"
    results = _load(res_path)
    base = from_dict({})
    for seed in seeds:
        wdir = out / f"seed{seed}_warmup"
        if not (wdir / "final.ckpt").exists():
            log.info("seed %d: corridor warm start", seed)
            train(warmup_config(seed, warmup_steps), wdir)
        init, _, _ = load_checkpoint(wdir / "final.ckpt")
        for beta in RISK_SETTINGS:
            key = f"seed{seed}_risk{beta:g}"
            if key in results:
                continue
            rdir = out / key
            if not (rdir / "final.ckpt").exists():
                log.info("%s: training %d steps", key, steps)
                train(crowd_config(seed, beta, steps), rdir, init=init)
            summary, _, skipped = run_suite(base.episode, eval_suite(workers), rdir / "eval",
                                            policy=f"checkpoint:{rdir / 'final.ckpt'}")
            results[key] = {"seed": seed, "beta_risk": beta, **summary_dict(summary, skipped)}
            res_path.write_text(json.dumps(results, indent=2, sort_keys=True))
    return results


def compare(results: dict) -> dict:
    """Per-seed H-Coll for each setting plus the means over seeds."""
    seeds = sorted({r["seed"] for r in results.values()})
    table = {}
    for beta in RISK_SETTINGS:
        vals = [results[f"seed{s}_risk{beta:g}"]["h_coll"] for s in seeds]
        psc = [results[f"seed{s}_risk{beta:g}"]["psc"] for s in seeds]
        sr = [results[f"seed{s}_risk{beta:g}"]["sr"] for s in seeds]
        table[f"{beta:g}"] = {"h_coll": vals, "h_coll_mean": float(np.mean(vals)),
                              "psc_mean": float(np.mean(psc)), "sr_mean": float(np.mean(sr))}
    return table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--steps", type=int, default=500_000)
    ap.add_argument("--warmup-steps", type=int, default=200_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")
    res = run_risk_effect(args.out, args.steps, args.warmup_steps, args.seeds, args.workers)
    print(json.dumps(compare(res), indent=2))


if __name__ == "__main__":
    main()
