"""Command line entry point: gen-scenes, run, train, eval, report.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, SocNavError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _load(path):
    from .config import Config, load_config
    return load_config(path) if path else Config()


def cmd_gen_scenes(args):
    from .scene import generate_scene, save_scene
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    for size in args.size_class:
        for seed in range(args.seed, args.seed + args.count):
            scene = generate_scene(seed, size)
            path = out / f"{size}_{seed:04d}.scene"
            save_scene(scene, path)
            print(f"{path}  free area {scene.free_area:.2f} m2, rooms {len(scene.rooms)}")


def _suite_with(cfg, args):
    suite = cfg.suite
    if getattr(args, "workers", None):
        suite = replace(suite, workers=args.workers)
    if getattr(args, "episodes", None):
        suite = replace(suite, episodes_per_scene=args.episodes)
    if getattr(args, "log_targets", False):
        suite = replace(suite, log_targets=True, write_logs=True)
    return suite


def _print_summary(summary, skipped):
    from .runner import summary_table
    print(summary_table(summary, skipped), end="")


def cmd_run(args):
    from .runner import run_suite
    cfg = _load(args.config)
    suite = _suite_with(cfg, args)
    summary, _, skipped = run_suite(cfg.episode, suite, args.out, cfg.digest, policy=args.policy)
    _print_summary(summary, skipped)


def cmd_train(args):
    from .trainer import train
    cfg = _load(args.config)
    if args.steps is not None:
        cfg = replace(cfg, train=replace(cfg.train, total_steps=args.steps))
    res = train(cfg, args.out)
    print(f"wrote {res.checkpoint} after {res.rows[-1][1] if res.rows else 0} steps")


def cmd_eval(args):
    from .config import Config, load_config
    from .runner import NetPolicy, run_suite
    cfg = load_config(args.suite) if args.suite else Config()
    suite = _suite_with(cfg, args)
    spec = f"checkpoint:{args.checkpoint}"
    NetPolicy.from_checkpoint(args.checkpoint)  # validate before fanning out
    out = args.out or str(Path(args.checkpoint).with_suffix("")) + "_eval"
    summary, _, skipped = run_suite(cfg.episode, suite, out, cfg.digest, policy=spec)
    _print_summary(summary, skipped)
    print(f"results in {out}")


def cmd_report(args):
    from .report import make_report
    try:
        paths = make_report(args.in_dir, args.out)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    for p in paths:
        print(p)


def build_parser():
    p = _Parser(prog="socnav", description="Social navigation simulator, baselines and trainer.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-scenes", help="generate and save procedural scenes")
    g.add_argument("--out", required=True)
    g.add_argument("--class", dest="size_class", nargs="+", default=["small", "medium", "large"],
                   choices=["small", "medium", "large"])
    g.add_argument("--seed", type=int, default=0, help="first scene seed")
    g.add_argument("--count", type=int, default=5, help="scenes per class")
    g.set_defaults(func=cmd_gen_scenes)

    r = sub.add_parser("run", help="run a policy over the configured suite")
    r.add_argument("--config")
    r.add_argument("--policy", required=True,
                   help="stop_only | greedy_geodesic | risk_aware_greedy | checkpoint:PATH")
    r.add_argument("--out", required=True)
    r.add_argument("--workers", type=int)
    r.add_argument("--log-targets", action="store_true",
                   help="add per-step cognition targets to the JSONL logs")
    r.add_argument("--episodes", type=int, help="episodes per scene")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("train", help="train the recurrent policy with PPO")
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--steps", type=int, help="override train.total_steps")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a suite")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--suite", help="config file whose [suite] section is used")
    e.add_argument("--out")
    e.add_argument("--workers", type=int)
    e.add_argument("--log-targets", action="store_true",
                   help="add per-step cognition targets to the JSONL logs")
    e.add_argument("--episodes", type=int)
    e.add_argument("--no-aux", action="store_true",
                   help="never evaluate auxiliary/risk heads (always the case for acting)")
    e.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", help="tables and plots from a run/eval/train directory")
    rp.add_argument("--in", dest="in_dir", required=True)
    rp.add_argument("--out")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SocNavError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
