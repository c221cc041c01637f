"""Phase-structured training loop."""

from __future__ import annotations

import hashlib
import math
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig, dump_config
from ..curriculum import CurriculumState, maybe_advance
from ..learn.checkpoint import save_checkpoint
from ..learn.mlp import PolicyParams, init_params
from ..learn.ppo import poca_update, ppo_update
from .metrics import (
    CURRICULUM_COLUMNS, EPISODE_COLUMNS, LEDGER_COLUMNS, METRICS_COLUMNS, CsvSink,
)
from .rollout import TEAM_IDS, PolicySource, RolloutEngine

RESOLVED_CONFIG = "config.resolved.ini"


@dataclass
class TrainResult:
    run_dir: str
    metrics_path: str
    checkpoints: dict = field(default_factory=dict)  # team -> final checkpoint path
    all_checkpoints: list = field(default_factory=list)
    global_step: int = 0
    updates: int = 0
    curriculum_level: int = 1
    params: dict = field(default_factory=dict)


def initial_params(cfg: RunConfig) -> dict:
    spec = cfg.mlp_spec()
    out = {}
    for team in cfg.teams:
        seed = int(np.random.SeedSequence([cfg.run.seed, TEAM_IDS[team], 0xBEEF]).generate_state(1)[0])
        out[team] = init_params(spec, seed)
    return out


def opponent_source(policy: str, params: PolicyParams) -> PolicySource:
    if policy == "frozen_checkpoint":
        return PolicySource.learned(params.copy())
    if policy.startswith("scripted_"):
        return PolicySource.scripted(policy[len("scripted_"):])
    return PolicySource.scripted("stationary")


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


class _Run:
    def __init__(self, cfg: RunConfig, run_dir: str, workers, log):
        self.cfg = cfg
        self.dir = run_dir
        self.log = log or (lambda msg: None)
        os.makedirs(os.path.join(run_dir, "checkpoints"), exist_ok=True)
        with open(os.path.join(run_dir, RESOLVED_CONFIG), "w", encoding="utf-8") as fh:
            fh.write(dump_config(cfg))
        self.metrics = CsvSink(os.path.join(run_dir, "metrics.csv"), METRICS_COLUMNS)
        self.levels = CsvSink(os.path.join(run_dir, "curriculum.csv"), CURRICULUM_COLUMNS)
        self.episodes = CsvSink(os.path.join(run_dir, "episodes.csv"), EPISODE_COLUMNS)
        self.ledger = CsvSink(os.path.join(run_dir, "rewards.csv"), LEDGER_COLUMNS) if cfg.run.rewards_ledger else None
        self.engine = RolloutEngine(cfg, workers)
        self.layout = cfg.observation_config().layout_id()
        self.digest = config_digest(cfg)
        self.params = initial_params(cfg)
        c = cfg.curriculum
        self.curriculum = CurriculumState(difficulty=c.start_level, threshold=c.threshold, window=c.window,
                                          enabled=c.enabled)
        self.global_step = 0
        self.update = 0
        self.episode_count = 0
        self.recent = {t: deque(maxlen=cfg.parallel.instances) for t in cfg.teams}
        self.recent_len: deque = deque(maxlen=cfg.parallel.instances)
        self.recent_hidden: deque = deque(maxlen=cfg.parallel.instances)
        self.smoothed = {t: math.nan for t in cfg.teams}
        self.checkpoints: list = []

    def close(self):
        self.engine.close()
        for sink in (self.metrics, self.levels, self.episodes, self.ledger):
            if sink is not None:
                sink.close()

    def save(self, tag: str) -> dict:
        out = {}
        for team, p in self.params.items():
            path = os.path.join(self.dir, "checkpoints", f"{team}_{tag}.ckpt")
            meta = {
                "team": team,
                "scenario": self.cfg.run.scenario,
                "seed": self.cfg.run.seed,
                "config_sha256": self.digest,
                "config": dump_config(self.cfg),
                "curriculum_level": self.curriculum.difficulty,
            }
            save_checkpoint(path, p, self.global_step, meta, self.layout)
            out[team] = path
            self.checkpoints.append(path)
        return out

    def _record_episodes(self, summaries, learner):
        for ep in summaries:
            self.episode_count += 1
            row = dict(ep, update=self.update, global_step=self.global_step)
            self.episodes.write(row)
            for team in self.cfg.teams:
                self.recent[team].append(ep[f"reward_{team}"])
            self.recent_len.append(ep["length"])
            if "hidden_fraction" in ep:
                self.recent_hidden.append(ep["hidden_fraction"])
            old = self.curriculum.difficulty
            self.curriculum = maybe_advance(self.curriculum, ep[f"reward_{learner}"])
            if self.curriculum.difficulty != old:
                self.levels.write({"global_step": self.global_step, "old_level": old,
                                   "new_level": self.curriculum.difficulty})
                self.log(f"curriculum: level {old} -> {self.curriculum.difficulty} at step {self.global_step}")

    def _write_metrics(self, learner, stats):
        factor = self.cfg.run.metrics_smoothing
        for team in self.cfg.teams:
            vals = self.recent[team]
            mean = float(np.mean(vals)) if vals else math.nan
            if not math.isnan(mean):
                prev = self.smoothed[team]
                self.smoothed[team] = mean if math.isnan(prev) else factor * prev + (1.0 - factor) * mean
            row = {
                "global_step": self.global_step,
                "update": self.update,
                "episodes": self.episode_count,
                "team": team,
                "learning": int(team == learner),
                "cumulative_reward_mean": mean,
                "cumulative_reward_smoothed": self.smoothed[team],
                "episode_length_mean": float(np.mean(self.recent_len)) if self.recent_len else math.nan,
                "curriculum_level": self.curriculum.difficulty,
                "hidden_fraction_mean": float(np.mean(self.recent_hidden)) if self.recent_hidden else math.nan,
            }
            if team == learner:
                row.update({k: stats[k] for k in ("policy_loss", "value_loss", "entropy", "mean_ratio",
                                                   "clip_fraction", "approx_kl", "grad_norm")})
            self.metrics.write(row)
        self.metrics.flush()

    def run_phase(self, index: int, phase):
        cfg = self.cfg
        learner = phase.learning_team
        hp = cfg.learn.hyper(cfg.run.seed)
        update_fn = poca_update if learner == "seekers" else ppo_update
        policies = {t: opponent_source(phase.opponent_policy, self.params[t]) for t in cfg.teams if t != learner}
        frozen = {t: self.params[t].flat.copy() for t in policies}
        spent = 0
        self.log(f"phase {index}: training {learner} vs {phase.opponent_policy} for {phase.step_budget} steps")
        while spent < phase.step_budget:
            policies[learner] = PolicySource.learned(self.params[learner])
            buf, res = self.engine.collect(policies, learner, self.curriculum.difficulty, cfg.run.rewards_ledger)
            new, stats = update_fn(buf, self.params[learner], hp, cfg.learn.minibatch_size or None)
            self.params[learner] = new
            self.update += 1
            self.global_step += res.ticks
            spent += res.ticks
            if self.ledger is not None:
                for inst, ep, tick, agent, amount, cause in res.ledger:
                    self.ledger.write({"update": self.update, "instance": inst, "episode": ep, "tick": tick,
                                       "agent": agent, "amount": amount, "cause": cause})
            self._record_episodes(res.summaries, learner)
            self._write_metrics(learner, stats)
            if self.update % cfg.run.checkpoint_interval == 0:
                self.save(f"{self.global_step:012d}")
        for t, flat in frozen.items():
            assert np.array_equal(self.params[t].flat, flat), "non-learning team parameters changed"
        self.save(f"phase{index}")


def train(cfg: RunConfig, run_dir: str, workers: int | None = None, log=None) -> TrainResult:
    """Run every phase of ``cfg``; writes metrics, curriculum transitions,
    episode summaries and checkpoints under ``run_dir``."""
    cfg.validate()
    run = _Run(cfg, run_dir, workers, log)
    try:
        for i, phase in enumerate(cfg.phases):
            run.run_phase(i, phase)
        final = run.save("final")
    finally:
        run.close()
    return TrainResult(
        run_dir=run_dir,
        metrics_path=os.path.join(run_dir, "metrics.csv"),
        checkpoints=final,
        all_checkpoints=list(run.checkpoints),
        global_step=run.global_step,
        updates=run.update,
        curriculum_level=run.curriculum.difficulty,
        params=run.params,
    )
