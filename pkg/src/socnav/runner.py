"""Episode orchestration, JSONL episode logs, replay and evaluation suites."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import multiprocessing as mp
import platform
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __name__ as _pkg
from . import kernels
from .baselines import BASELINES
from .env import EpisodeConfig, SocNavEnv
from .errors import ConfigError, RecordError, SetupError
from .metrics import EpisodeRecord, MetricsSummary, episode_psc, summarize
from .policy import load_checkpoint, act_greedy, goal_features, zero_state

log = logging.getLogger(__name__)

LOG_VERSION = 1


class NetPolicy:
    """Greedy wrapper around trained parameters; aux heads stay off unless asked."""

    def __init__(self, params, cfg, aux: bool = False, name: str = "checkpoint"):
        self.params, self.cfg, self.aux, self.name = params, cfg, aux, name

    @classmethod
    def from_checkpoint(cls, path, aux: bool = False):
        params, cfg, _ = load_checkpoint(path)
        return cls(params, cfg, aux, name=f"checkpoint:{path}")

    def begin(self, env):
        self.state = zero_state(self.cfg, 1)

    def act(self, obs, env):
        a, self.state = act_greedy(self.params, self.cfg, obs.depth[None],
                                   np.array([goal_features(obs.goal)]), self.state, aux=self.aux)
        return int(a[0])


def make_policy(spec: str, risk_threshold: float = 0.75):
    if spec.startswith("checkpoint:"):
        return NetPolicy.from_checkpoint(spec.split(":", 1)[1])
    if spec == "risk_aware_greedy":
        return BASELINES[spec](threshold=risk_threshold)
    if spec in BASELINES:
        return BASELINES[spec]()
    if spec.endswith(".ckpt"):
        return NetPolicy.from_checkpoint(spec)
    raise ConfigError(f"unknown policy {spec!r}")


# ---------------------------------------------------------------------------
# episodes


@dataclass
class EpisodeLog:
    header: dict
    steps: list = field(default_factory=list)
    footer: dict = field(default_factory=dict)

    @property
    def record(self) -> EpisodeRecord:
        return EpisodeRecord.from_dict(self.footer["record"])

    def write(self, path) -> None:
        with open(path, "w") as f:
            for kind, body in [("header", self.header)] + [("step", s) for s in self.steps] + [
                    ("footer", self.footer)]:
                f.write(json.dumps({"type": kind, **body}, allow_nan=False,
                                   default=_jsonable) + "\n")

    @classmethod
    def read(cls, path) -> "EpisodeLog":
        header, footer, steps = None, None, []
        with open(path) as f:
            for line in f:
                if not line.strip():
                    continue
                obj = json.loads(line)
                kind = obj.pop("type")
                if kind == "header":
                    header = obj
                elif kind == "step":
                    steps.append(obj)
                elif kind == "footer":
                    footer = obj
        if header is None or footer is None:
            raise RecordError(f"{path} is missing its header or footer")
        return cls(header, steps, footer)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialise {type(o)}")


def _finite_or_none(x):
    return float(x) if math.isfinite(x) else None


def episode_header(cfg: EpisodeConfig, policy_name: str, config_hash: str = "") -> dict:
    from importlib.metadata import PackageNotFoundError, version
    try:
        pkg_version = version(_pkg)
    except PackageNotFoundError:
        pkg_version = "unknown"
    return {"version": LOG_VERSION, "config_hash": config_hash,
            "scene_seed": cfg.scene_seed, "size_class": cfg.size_class,
            "episode_seed": cfg.episode_seed, "humans": cfg.humans, "policy": policy_name,
            "package_version": pkg_version, "numpy": np.__version__,
            "python": platform.python_version(), "kernels": kernels.BACKEND,
            "episode_config": _episode_config_dict(cfg)}


def _episode_config_dict(cfg: EpisodeConfig) -> dict:
    d = asdict(cfg)
    return json.loads(json.dumps(d, default=_jsonable))


def episode_config_from_dict(d: dict) -> EpisodeConfig:
    from .crowd import CrowdParams
    from .reward import RewardWeights
    from .sensing import SensorConfig
    from .targets import RiskParams
    d = dict(d)
    d["reward"] = RewardWeights(**d["reward"])
    d["risk"] = RiskParams(**d["risk"])
    d["sensor"] = SensorConfig(**d["sensor"])
    d["crowd"] = CrowdParams(**{k: tuple(v) if isinstance(v, list) else v
                                for k, v in d["crowd"].items()})
    return EpisodeConfig(**d)


def run_episode(cfg: EpisodeConfig, policy, log_targets: bool = False,
                config_hash: str = "") -> EpisodeLog:
    """Roll ``policy`` (``begin(env)`` / ``act(obs, env)``) through one episode."""
    env = SocNavEnv(cfg)
    obs = env.reset()
    policy.begin(env)
    elog = EpisodeLog(header=episode_header(cfg, getattr(policy, "name", type(policy).__name__),
                                            config_hash))
    elog.header.update(start_pose=list(env.start_pose), goal=[float(g) for g in env.goal],
                       shortest_path=env.shortest_path, n_humans=env.crowd.n)
    while not env.done:
        action = int(policy.act(obs, env))
        res = env.step(action)
        obs = res.obs
        entry = {"tick": env.steps, "pose": list(env.pose), "action": action,
                 "moved": res.moved, "outcome": res.outcome.to_dict(),
                 "min_human_distance": _finite_or_none(
                     min(res.outcome.distances) if res.outcome.distances else math.inf),
                 "min_gap": _finite_or_none(res.min_gap)}
        if log_targets:
            entry["targets"] = env.targets().to_dict()
        elog.steps.append(entry)
    rec = env.record()
    elog.footer = {"record": rec.to_dict(), "stopped": env.stopped,
                   "final_pose": list(env.pose)}
    return elog


def record_from_steps(elog: EpisodeLog) -> EpisodeRecord:
    """Recompute the footer record from the step entries."""
    steps = elog.steps
    last = steps[-1]["outcome"] if steps else {}
    return EpisodeRecord(
        success=bool(last.get("success", False)),
        shortest_path=float(elog.header["shortest_path"]),
        actual_path=float(sum(s["moved"] for s in steps)),
        min_human_distance=tuple(math.inf if s["min_gap"] is None else s["min_gap"]
                                 for s in steps),
        human_collision=any(s["outcome"]["human_collision"] for s in steps),
        steps=len(steps))


class _Scripted:
    name = "replay"

    def __init__(self, actions):
        self.actions = list(actions)
        self.k = 0

    def begin(self, env):
        self.k = 0

    def act(self, obs, env):
        a = self.actions[self.k]
        self.k += 1
        return a


def replay(elog: EpisodeLog) -> EpisodeLog:
    """Re-run the logged action sequence from the logged configuration."""
    cfg = episode_config_from_dict(elog.header["episode_config"])
    return run_episode(cfg, _Scripted([s["action"] for s in elog.steps]),
                       config_hash=elog.header.get("config_hash", ""))


def max_pose_drift(a: EpisodeLog, b: EpisodeLog) -> float:
    if len(a.steps) != len(b.steps):
        return math.inf
    drift = 0.0
    for sa, sb in zip(a.steps, b.steps):
        drift = max(drift, math.hypot(sa["pose"][0] - sb["pose"][0],
                                      sa["pose"][1] - sb["pose"][1]))
    return drift


# ---------------------------------------------------------------------------
# suites


def suite_episodes(base: EpisodeConfig, suite) -> list:
    """Deterministic episode list: scene seed major, then size class, then episode."""
    out = []
    lo, hi = suite.scene_seeds
    for s in range(lo, hi):
        for size in suite.size_classes:
            for e in range(suite.episodes_per_scene):
                idx = len(out)
                out.append(replace(base, scene_seed=s, size_class=size,
                                   episode_seed=suite.episode_seed_offset + idx,
                                   humans=suite.humans if suite.humans is not None
                                   else base.humans))
    return out


CSV_FIELDS = ("index", "size_class", "scene_seed", "episode_seed", "humans", "status", "success",
              "spl", "psc", "human_collision", "steps", "shortest_path", "actual_path")


@dataclass
class EpisodeResult:
    index: int
    config: EpisodeConfig
    status: str  # ok | setup_error
    log: EpisodeLog | None = None
    error: str = ""


def _run_one(args):
    idx, cfg, policy_spec, risk_threshold, log_targets, config_hash = args
    policy = make_policy(policy_spec, risk_threshold)
    try:
        elog = run_episode(cfg, policy, log_targets=log_targets, config_hash=config_hash)
    except SetupError as exc:
        return EpisodeResult(idx, cfg, "setup_error", error=str(exc))
    return EpisodeResult(idx, cfg, "ok", elog)


def run_suite(base: EpisodeConfig, suite, out_dir=None, config_hash: str = "",
              policy: str | None = None):
    """Run every suite episode; returns ``(summary, results, skipped)``.

    Workers each own a full simulator; results are merged by episode index.
    """
    spec = policy or suite.policy
    make_policy(spec, suite.risk_threshold)  # fail fast on a bad policy name
    eps = suite_episodes(base, suite)
    jobs = [(i, cfg, spec, suite.risk_threshold, suite.log_targets, config_hash)
            for i, cfg in enumerate(eps)]
    if suite.workers > 1:
        ctx = mp.get_context("fork") if hasattr(mp, "get_context") else mp
        with ctx.Pool(suite.workers) as pool:
            results = pool.map(_run_one, jobs, chunksize=1)
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r.index)
    ok = [r for r in results if r.status == "ok"]
    skipped = len(results) - len(ok)
    if skipped:
        log.warning("%d episode(s) skipped after setup errors", skipped)
    summary = summarize([r.log.record for r in ok])
    if out_dir is not None:
        write_suite_outputs(Path(out_dir), results, summary, skipped, suite.write_logs)
    return summary, results, skipped


def suite_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in results:
        c = r.config
        if r.status != "ok":
            w.writerow([r.index, c.size_class, c.scene_seed, c.episode_seed, "", r.status,
                        "", "", "", "", "", "", ""])
            continue
        rec = r.log.record
        spl_i = (rec.shortest_path / max(rec.actual_path, rec.shortest_path)
                 if rec.success else 0.0)
        w.writerow([r.index, c.size_class, c.scene_seed, c.episode_seed,
                    r.log.header["n_humans"], r.status, int(rec.success), repr(spl_i),
                    repr(episode_psc(rec)), int(rec.human_collision), rec.steps,
                    repr(rec.shortest_path), repr(rec.actual_path)])
    return buf.getvalue()


def summary_dict(summary: MetricsSummary, skipped: int = 0) -> dict:
    return {"sr": summary.sr, "spl": summary.spl, "psc": summary.psc, "h_coll": summary.h_coll,
            "total": summary.total, "episodes": summary.episodes, "skipped": skipped}


def summary_table(summary: MetricsSummary, skipped: int = 0) -> str:
    rows = [("SR", summary.sr), ("SPL", summary.spl), ("PSC", summary.psc),
            ("H-Coll", summary.h_coll), ("Total", summary.total)]
    lines = ["metric    value", "------  --------"]
    lines += [f"{k:<6}  {v:8.4f}" for k, v in rows]
    lines.append(f"episodes {summary.episodes}, skipped {skipped}")
    return "\n".join(lines) + "\n"


def write_suite_outputs(out: Path, results, summary, skipped, write_logs=True):
    out.mkdir(parents=True, exist_ok=True)
    (out / "episodes.csv").write_text(suite_csv(results))
    (out / "metrics.json").write_text(json.dumps(summary_dict(summary, skipped), indent=2,
                                                 sort_keys=True) + "\n")
    (out / "metrics.txt").write_text(summary_table(summary, skipped))
    if write_logs:
        logdir = out / "logs"
        logdir.mkdir(exist_ok=True)
        for r in results:
            if r.status == "ok":
                r.log.write(logdir / f"episode_{r.index:05d}.jsonl")
