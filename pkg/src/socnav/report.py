"""Metric tables and reward-decomposition plots from suite or training output."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

COMPONENTS = ("r_base", "r_coll", "r_prox", "r_path", "r_total")


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def reward_components(log_dir: Path) -> dict:
    """Per-episode sums of every reward component, keyed by component."""
    from .runner import EpisodeLog
    sums = {k: [] for k in COMPONENTS}
    for path in sorted(log_dir.glob("*.jsonl")):
        elog = EpisodeLog.read(path)
        for k in COMPONENTS:
            sums[k].append(sum(s["outcome"][k] for s in elog.steps))
    return {k: np.array(v) for k, v in sums.items()}


def plot_reward_decomposition(sums: dict, path: Path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    names = ["base", "-coll", "-prox", "-path", "total"]
    vals = [sums["r_base"].mean(), -sums["r_coll"].mean(), -sums["r_prox"].mean(),
            -sums["r_path"].mean(), sums["r_total"].mean()]
    colors = ["tab:green", "tab:red", "tab:orange", "tab:purple", "tab:blue"]
    ax.bar(names, vals, color=colors)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_ylabel("mean episode reward")
    ax.set_title(f"reward decomposition ({len(sums['r_total'])} episodes)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_training_curves(csv_path: Path, path: Path) -> None:
    with open(csv_path) as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return
    steps = np.array([float(r["steps"]) for r in rows])
    plt = _plt()
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    axes[0].plot(steps, [float(r["mean_reward"]) for r in rows])
    axes[0].set_title("mean episode reward")
    for k in ("loss_main", "loss_count", "loss_pos", "loss_traj", "loss_risk"):
        axes[1].plot(steps, [float(r[k]) for r in rows], label=k[5:])
    axes[1].set_title("losses")
    axes[1].legend(fontsize=7)
    sr = np.array([float(r["sr_holdout"]) for r in rows])
    ok = np.isfinite(sr)
    axes[2].plot(steps[ok], sr[ok], marker="o")
    axes[2].set_ylim(-0.02, 1.02)
    axes[2].set_title("held-out SR")
    for ax in axes:
        ax.set_xlabel("env steps")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def make_report(in_dir, out_dir=None) -> list:
    """Write tables and plots for whatever outputs ``in_dir`` holds; returns written paths."""
    src = Path(in_dir)
    dst = Path(out_dir) if out_dir is not None else src
    dst.mkdir(parents=True, exist_ok=True)
    written = []
    lines = []
    metrics = src / "metrics.json"
    if metrics.exists():
        m = json.loads(metrics.read_text())
        lines += ["| metric | value |", "|---|---|"]
        for k in ("sr", "spl", "psc", "h_coll", "total"):
            lines.append(f"| {k} | {m[k]:.4f} |")
        lines.append(f"\nepisodes: {m['episodes']}, skipped: {m.get('skipped', 0)}\n")
    logs = src / "logs"
    if logs.is_dir() and any(logs.glob("*.jsonl")):
        sums = reward_components(logs)
        p = dst / "reward_decomposition.png"
        plot_reward_decomposition(sums, p)
        written.append(p)
        lines += ["| component | mean per episode |", "|---|---|"]
        lines += [f"| {k} | {sums[k].mean():.4f} |" for k in COMPONENTS]
    train_csv = src / "train_log.csv"
    if train_csv.exists():
        p = dst / "training_curves.png"
        plot_training_curves(train_csv, p)
        written.append(p)
    if not lines and not written:
        raise FileNotFoundError(f"nothing to report in {src}")
    rp = dst / "report.md"
    rp.write_text("\n".join(lines) + "\n")
    written.insert(0, rp)
    return written
