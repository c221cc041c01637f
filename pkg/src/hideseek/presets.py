"""Bundled scenario presets: the three single-team pre-experiments and the
hide-and-seek level, curriculum and fixed-level configurations."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .config import CurriculumConfig, EpisodeSection, RunConfig, RunSection, TrainPhase
from .game import PhaseConfig, RewardConfig, scenario_rewards
from .world import ArenaConfig

PRESET_NAMES = (
    "hummingbird",
    "drone_target",
    "eye",
    "hideseek_level1",
    "hideseek_level2",
    "hideseek_level3",
    "hideseek_level4",
    "hideseek_curriculum",
    "hideseek_traditional",
)


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    config: RunConfig

    @property
    def arena(self) -> ArenaConfig:
        return self.config.arena

    @property
    def agent_counts(self) -> dict:
        e = self.config.episode
        if self.config.is_hideseek:
            return {"hiders": e.hiders, "seekers": e.seekers}
        return {"agents": e.agents}

    @property
    def rewards(self) -> RewardConfig:
        return self.config.rewards

    @property
    def phase(self) -> PhaseConfig:
        return self.config.episode.phase

    @property
    def curriculum_enabled(self) -> bool:
        return self.config.curriculum.enabled


TOTAL = 3_000_000


def _self_play_plan(total: int) -> tuple:
    """Bootstrap hiders against random seekers, then alternate teams
    against the other side's latest frozen parameters."""
    third = total // 3
    return (
        TrainPhase("hiders", "scripted_random", third),
        TrainPhase("seekers", "frozen_checkpoint", third),
        TrainPhase("hiders", "frozen_checkpoint", total - 2 * third),
    )


def _scenario(name: str, arena: ArenaConfig, agents: int) -> RunConfig:
    return RunConfig(
        run=RunSection(scenario=name, total_env_steps=TOTAL),
        episode=EpisodeSection(agents=agents),
        rewards=scenario_rewards(name),
        curriculum=CurriculumConfig(enabled=False),
        arena=arena,
        phases=(TrainPhase("single_agent", "none", TOTAL),),
    )


def _hideseek(name: str, level: int, curriculum: bool) -> RunConfig:
    return RunConfig(
        run=RunSection(scenario=name, total_env_steps=TOTAL),
        episode=EpisodeSection(hiders=1, seekers=1),
        rewards=RewardConfig(),
        curriculum=CurriculumConfig(enabled=curriculum, start_level=level),
        arena=ArenaConfig(),
        phases=_self_play_plan(TOTAL),
    )


def _build(name: str) -> RunConfig:
    if name == "hummingbird":
        # stationary target, wide boundaries
        return _scenario(name, ArenaConfig(layout="open", size_x=30.0, size_z=30.0, obstacle_count=0,
                                           target="stationary"), 1)
    if name == "drone_target":
        # moving target, normal boundaries
        return _scenario(name, ArenaConfig(layout="open", size_x=10.0, size_y=6.0, size_z=10.0,
                                           obstacle_count=0, target="fleeing"), 1)
    if name == "eye":
        # moving target, small boundaries, two allies that must not collide
        return _scenario(name, ArenaConfig(layout="open", size_x=8.0, size_y=5.0, size_z=8.0,
                                           obstacle_count=0, target="drift"), 2)
    if name.startswith("hideseek_level"):
        return _hideseek(name, int(name[-1]), curriculum=False)
    if name == "hideseek_curriculum":
        return _hideseek(name, 1, curriculum=True)
    if name == "hideseek_traditional":
        return _hideseek(name, 4, curriculum=False)
    raise KeyError(f"unknown preset {name!r}; valid names: {', '.join(PRESET_NAMES)}")


def preset(name: str) -> ScenarioPreset:
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; valid names: {', '.join(PRESET_NAMES)}")
    cfg = _build(name)
    # scenario target motion follows the arena's target setting
    if not cfg.is_hideseek:
        cfg = dataclasses.replace(cfg, episode=dataclasses.replace(cfg.episode, target_mode=cfg.arena.target))
    return ScenarioPreset(name, cfg.validate())
