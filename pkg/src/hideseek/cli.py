"""Command-line entry point.

Exit status: 0 on success, 2 for usage or configuration errors, 1 for
failures while running.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .config import ConfigError, RunConfig, dump_config, parse_config
from .presets import PRESET_NAMES, preset

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"hideseek: {msg}", file=sys.stderr)


def _seed(value) -> None:
    print(f"seed: {value}", file=sys.stderr)


def load_run_config(source: str) -> RunConfig:
    """A config file path, or a bare preset name."""
    if os.path.exists(source):
        return parse_config(source)
    if source in PRESET_NAMES:
        return preset(source).config
    raise FileNotFoundError(source)


# --- subcommands ----------------------------------------------------------


def cmd_train(args) -> int:
    import dataclasses

    from .harness.train import train

    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, seed=args.seed)).validate()
    _seed(cfg.run.seed)
    out = args.out or os.path.join("runs", f"{cfg.run.scenario}_seed{cfg.run.seed}")
    log = None if args.quiet else (lambda m: print(m, file=sys.stderr))
    res = train(cfg, out, workers=args.workers, log=log)
    print(f"run directory: {res.run_dir}")
    print(f"metrics: {res.metrics_path}")
    for team, path in res.checkpoints.items():
        print(f"final checkpoint ({team}): {path}")
    print(f"global steps: {res.global_step}  updates: {res.updates}  curriculum level: {res.curriculum_level}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .harness.evaluate import evaluate_checkpoints

    cfg = load_run_config(args.config) if args.config else None
    _seed(args.seed)
    summary = evaluate_checkpoints(args.checkpoints, args.episodes, args.seed, cfg=cfg, level=args.level)
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        for k in sorted(summary):
            print(f"{k}: {summary[k]}")
    return EXIT_OK


def cmd_replay(args) -> int:
    from .config import parse_text
    from .harness.evaluate import export_replay
    from .harness.train import RESOLVED_CONFIG

    path = os.path.join(args.run, RESOLVED_CONFIG)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        _seed(parse_text(fh.read(), path).run.seed)
    summary = export_replay(args.run, args.episode, args.out, every=args.every)
    print(f"wrote {args.out}: {summary['ticks']} ticks, done_reason={summary['done_reason']}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plot import plot_metrics

    if not os.path.exists(args.metrics):
        raise FileNotFoundError(args.metrics)
    _seed("n/a")
    if not 0.0 <= args.smooth < 1.0:
        raise UsageError("--smooth must lie in [0, 1)")
    series = plot_metrics(args.metrics, args.column, args.smooth, args.out, team=args.team, x=args.x)
    print(f"wrote {args.out} ({len(series)} series)")
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.action == "list":
        _seed("n/a")
        for name in PRESET_NAMES:
            print(name)
        return EXIT_OK
    if args.name is None:
        raise UsageError("scenario show needs a preset name")
    cfg = preset(args.name).config
    _seed(cfg.run.seed)
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def cmd_debug_scan(args) -> int:
    from .curriculum import prop_count
    from .sensors import grid_scan
    from .world import build_arena, build_open_arena

    cfg = load_run_config(args.config)
    seed = cfg.run.seed if args.seed is None else args.seed
    _seed(seed)
    if cfg.is_hideseek:
        counts = {"hiders": cfg.episode.hiders, "seekers": cfg.episode.seekers}
        world = build_arena(args.level, prop_count(args.level), counts, seed, cfg.arena, cfg.world)
    else:
        world = build_open_arena(cfg.episode.agents, seed, cfg.arena, cfg.world)
    sensor = cfg.spatial_sensor if args.sensor == "spatial" else cfg.frontal_sensor
    if sensor is None:
        raise UsageError(f"the {args.sensor} sensor is disabled in this config")
    agent = world.agent_ids[0] if args.agent is None else args.agent
    obs = grid_scan(world, agent, sensor)
    grid = obs.grid()
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", *obs.channel_names])
        for r in range(obs.rows):
            for c in range(obs.cols):
                w.writerow([r, c, *(repr(float(v)) for v in grid[r, c])])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


# --- parser ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _err(message)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hideseek", description="Flying-agent hide-and-seek training toolkit.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    t = sub.add_parser("train", help="train from a config file")
    t.add_argument("config", help="config file (or preset name)")
    t.add_argument("--out", help="run directory (default runs/<scenario>_seed<seed>)")
    t.add_argument("--workers", type=int, help="rollout worker processes (overrides the config)")
    t.add_argument("--seed", type=int, help="override [run] seed")
    t.add_argument("--quiet", action="store_true", help="suppress progress messages")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate checkpoints with greedy actions")
    e.add_argument("checkpoints", nargs="+", metavar="ckpt",
                   help="hider then seeker checkpoint (one for scenarios); scripted names allowed")
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--level", type=int, help="curriculum level to evaluate at")
    e.add_argument("--config", help="config to evaluate under (default: the one stored in the checkpoint)")
    e.add_argument("--json", action="store_true", help="print the summary as one JSON object")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("replay", help="export an evaluation episode of a finished run")
    r.add_argument("run", help="run directory")
    r.add_argument("--episode", type=int, default=0)
    r.add_argument("--out", required=True, help="output JSONL file")
    r.add_argument("--every", type=int, default=1, help="record every Nth tick (ticks with events always kept)")
    r.set_defaults(func=cmd_replay)

    pl = sub.add_parser("plot", help="SVG line chart of a metrics column")
    pl.add_argument("metrics", help="metrics.csv")
    pl.add_argument("--column", default="cumulative_reward_mean")
    pl.add_argument("--smooth", type=float, default=0.99)
    pl.add_argument("--out", required=True, help="output SVG file")
    pl.add_argument("--team", help="plot one team only")
    pl.add_argument("--x", default="global_step", help="x-axis column")
    pl.set_defaults(func=cmd_plot)

    s = sub.add_parser("scenario", help="list or show bundled presets")
    s.add_argument("action", choices=("list", "show"))
    s.add_argument("name", nargs="?")
    s.set_defaults(func=cmd_scenario)

    d = sub.add_parser("debug", help="diagnostics")
    dsub = d.add_subparsers(dest="debug_command", metavar="what", parser_class=_Parser)
    dsub.required = True
    ds = dsub.add_parser("scan", help="dump one grid-sensor scan as CSV")
    ds.add_argument("config", help="config file or preset name")
    ds.add_argument("--sensor", choices=("spatial", "frontal"), default="spatial")
    ds.add_argument("--level", type=int, default=1)
    ds.add_argument("--seed", type=int)
    ds.add_argument("--agent", type=int)
    ds.add_argument("--out", help="CSV file (default stdout)")
    ds.set_defaults(func=cmd_debug_scan)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        _err(f"file not found: {exc.filename or exc}")
        return EXIT_CONFIG
    except (ConfigError, UsageError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except KeyError as exc:
        _err(str(exc.args[0]) if exc.args else "unknown key")
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
