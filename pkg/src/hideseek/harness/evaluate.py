"""Greedy evaluation of trained or scripted policies and replay export."""

from __future__ import annotations

import json
import os

import numpy as np

from ..config import RunConfig, parse_text
from ..game import step_episode
from ..learn.checkpoint import CheckpointError, load_checkpoint, spec_hash
from ..world import body_record
from .rollout import Instance, PolicySource, advance, decide, reset_instance, summarize, team_members
from .scripted import SCRIPTED
from .train import RESOLVED_CONFIG

REPLAY_FORMAT = "hideseek.replay"
REPLAY_VERSION = 1
EVAL_STREAM = 0xE7A1  # instance id reserved for evaluation seed streams


def expected_hash(cfg: RunConfig) -> bytes:
    return spec_hash(cfg.mlp_spec(), cfg.observation_config().layout_id())


def load_policy(source: str, cfg: RunConfig | None = None):
    """``source`` is a checkpoint path or a scripted policy name.

    Returns ``(PolicySource, meta)``. When ``cfg`` is given the checkpoint
    must match its network and observation layout.
    """
    if source in SCRIPTED:
        return PolicySource.scripted(source), {}
    want = expected_hash(cfg) if cfg is not None else None
    params, _, meta, _ = load_checkpoint(source, want)
    return PolicySource.greedy(params), meta


def config_from_checkpoint(path: str) -> RunConfig:
    _, _, meta, _ = load_checkpoint(path)
    if "config" not in meta:
        raise CheckpointError(f"{path}: checkpoint carries no run configuration")
    return parse_text(meta["config"], source=f"{path}:config")


def play_episode(inst: Instance, cfg: RunConfig, policies: dict, level: int, setup=None, on_decision=None) -> dict:
    """Run one full episode on ``inst``; ``setup(world)`` may edit the fresh
    world and ``on_decision(inst, events)`` observes each decision."""
    rng = np.random.default_rng()
    rng.bit_generator.state = inst.rng_state
    reset_instance(inst, cfg, level)
    if setup is not None:
        inst.world = setup(inst.world) or inst.world
    while not inst.status.done:
        actions, _ = decide(inst, cfg, policies, rng)
        ledger: list = []
        advance(inst, cfg, actions, {}, ledger)
        if on_decision is not None:
            on_decision(inst, ledger)
    inst.rng_state = rng.bit_generator.state
    return summarize(inst, cfg)


def aggregate(cfg: RunConfig, summaries: list[dict]) -> dict:
    if not summaries:
        return {"episodes": 0}
    out = {
        "episodes": len(summaries),
        "mean_length": float(np.mean([s["length"] for s in summaries])),
    }
    for team in cfg.teams:
        out[f"mean_reward_{team}"] = float(np.mean([s[f"reward_{team}"] for s in summaries]))
    if cfg.is_hideseek:
        out["tag_rate"] = float(np.mean([s["tagged"] for s in summaries]))
        out["hidden_fraction"] = float(np.mean([s["hidden_fraction"] for s in summaries]))
        # openings blocked per available opening
        rates = [s["blocked"] / s["level"] for s in summaries]
        out["blocked_rate"] = float(np.mean(rates))
    else:
        reasons = [s["done_reason"] for s in summaries]
        out["success_rate"] = float(np.mean([r == "target" for r in reasons]))
    return out


def evaluate(cfg: RunConfig, policies: dict, episodes: int, seed: int, level: int | None = None,
             setup=None) -> dict:
    """Play ``episodes`` episodes with the given per-team policies."""
    if episodes < 0:
        raise ValueError("episodes must be non-negative")
    lvl = cfg.curriculum.start_level if level is None else level
    inst = Instance.create(seed, EVAL_STREAM)
    summaries = [play_episode(inst, cfg, policies, lvl, setup) for _ in range(episodes)]
    out = aggregate(cfg, summaries)
    out["seed"] = seed
    out["level"] = lvl
    return out


def evaluate_checkpoints(sources: list[str], episodes: int, seed: int, cfg: RunConfig | None = None,
                         level: int | None = None) -> dict:
    """Evaluate checkpoints (hiders first, then seekers for hide-and-seek;
    one checkpoint for scenarios). Scripted names may stand in for either side."""
    ckpts = [s for s in sources if s not in SCRIPTED]
    if cfg is None:
        if not ckpts:
            raise ValueError("at least one checkpoint is needed to recover the run configuration")
        cfg = config_from_checkpoint(ckpts[0])
    teams = cfg.teams
    if len(sources) != len(teams):
        raise ValueError(f"expected {len(teams)} policy source(s) for teams {', '.join(teams)}")
    policies = {}
    for team, src in zip(teams, sources):
        pol, meta = load_policy(src, cfg)
        if meta.get("team") not in (None, team):
            raise CheckpointError(f"{src}: checkpoint belongs to team {meta['team']!r}, not {team!r}")
        policies[team] = pol
    if level is None and ckpts:
        level = load_checkpoint(ckpts[0])[2].get("curriculum_level")
    return evaluate(cfg, policies, episodes, seed, level)


def final_checkpoints(run_dir: str, cfg: RunConfig) -> list[str]:
    return [os.path.join(run_dir, "checkpoints", f"{t}_final.ckpt") for t in cfg.teams]


def export_replay(run_dir: str, episode: int, out_path: str, every: int = 1) -> dict:
    """Re-simulate evaluation episode ``episode`` of a finished run with its
    final greedy policies and write one JSON record per physics tick."""
    with open(os.path.join(run_dir, RESOLVED_CONFIG), encoding="utf-8") as fh:
        cfg = parse_text(fh.read(), source=RESOLVED_CONFIG)
    policies = {}
    level = cfg.curriculum.start_level
    for team, path in zip(cfg.teams, final_checkpoints(run_dir, cfg)):
        params, _, meta, _ = load_checkpoint(path, expected_hash(cfg))
        policies[team] = PolicySource.greedy(params)
        level = meta.get("curriculum_level", level)
    inst = Instance.create(cfg.run.seed, EVAL_STREAM)
    inst.episode = episode - 1
    rng = np.random.default_rng()
    rng.bit_generator.state = inst.rng_state
    reset_instance(inst, cfg, level)
    with open(out_path, "w", encoding="utf-8") as fh:
        header = {"format": REPLAY_FORMAT, "version": REPLAY_VERSION, "episode": episode, "seed": cfg.run.seed,
                  "scenario": cfg.run.scenario, "level": inst.level}
        fh.write(json.dumps(header) + "\n")

        def tick_record(events):
            w = inst.world
            return {"tick": int(w.tick), "bodies": [body_record(w, i) for i in range(w.n)],
                    "events": events}

        fh.write(json.dumps(tick_record([])) + "\n")
        records = 1
        while not inst.status.done:
            actions, _ = decide(inst, cfg, policies, rng)
            # step tick by tick so every frame is recorded
            for _ in range(cfg.episode.decision_interval):
                ledger: list = []
                _one_tick(inst, cfg, actions, ledger)
                evs = [{"agent": a, "amount": amt, "cause": c} for _, _, _, a, amt, c in ledger]
                if inst.world.tick % every == 0 or evs or inst.status.done:
                    fh.write(json.dumps(tick_record(evs)) + "\n")
                    records += 1
                if inst.status.done:
                    break
    summary = summarize(inst, cfg)
    summary["ticks"] = int(inst.world.tick)
    summary["records"] = records
    return summary


def _one_tick(inst: Instance, cfg, actions, ledger) -> None:
    inst.world, inst.status, events = step_episode(inst.world, inst.status, actions, cfg.episode_config(inst.level))
    for ev in events:
        ledger.append((inst.instance_id, inst.episode, ev.tick, ev.agent_id, ev.amount, ev.cause))


def read_replay(path: str) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        lines = [json.loads(x) for x in fh if x.strip()]
    if not lines or lines[0].get("format") != REPLAY_FORMAT:
        raise ValueError(f"{path}: not a replay file")
    return lines[0], lines[1:]


__all__ = [
    "aggregate", "config_from_checkpoint", "evaluate", "evaluate_checkpoints", "expected_hash",
    "export_replay", "final_checkpoints", "load_policy", "play_episode", "read_replay", "team_members",
]
