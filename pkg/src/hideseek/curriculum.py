"""Difficulty scheduling: level specs, threshold advancement and prop counts."""

from __future__ import annotations

import dataclasses
from collections import deque
from dataclasses import dataclass, field

MAX_LEVEL = 4


@dataclass(frozen=True)
class LevelSpec:
    level: int
    enabled_wall_chunks: frozenset
    enabled_openings: int
    obstacle_count: int = 5
    reward_scale: float = 1.0

    def __post_init__(self):
        if not 1 <= self.level <= MAX_LEVEL:
            raise ValueError(f"level must be in 1..{MAX_LEVEL}")
        if not 0 < self.reward_scale <= 1:
            raise ValueError("reward_scale must lie in (0, 1]")

    @property
    def prop_count(self) -> int:
        return prop_count(self.level)


def level_spec(level: int, level4_reward_scale: float = 0.5) -> LevelSpec:
    """Level k enables k framed openings (one wall chunk each) and k props."""
    return LevelSpec(
        level=level,
        enabled_wall_chunks=frozenset(range(level)),
        enabled_openings=level,
        obstacle_count=5,
        reward_scale=level4_reward_scale if level == MAX_LEVEL else 1.0,
    )


DEFAULT_SCHEDULE = tuple(level_spec(k) for k in range(1, MAX_LEVEL + 1))


def prop_count(level: int, reward_number: float = 0.0) -> int:
    """Props at a level. ``reward_number`` is accepted but has no effect."""
    if not 1 <= level <= MAX_LEVEL:
        raise ValueError(f"level must be in 1..{MAX_LEVEL}")
    return min(level, MAX_LEVEL)


@dataclass(frozen=True)
class CurriculumState:
    difficulty: int = 1
    threshold: float = 1.0
    window: int = 100
    recent_rewards: tuple = ()
    iteration: int = 0
    enabled: bool = True
    schedule: tuple = field(default=DEFAULT_SCHEDULE, repr=False)

    def __post_init__(self):
        if not 1 <= self.difficulty <= MAX_LEVEL:
            raise ValueError(f"difficulty must be in 1..{MAX_LEVEL}")
        if self.window < 1:
            raise ValueError("window must be >= 1")

    @property
    def windowed_mean(self) -> float | None:
        if not self.recent_rewards:
            return None
        return sum(self.recent_rewards) / len(self.recent_rewards)


def task_for_iteration(t: int, state: CurriculumState) -> LevelSpec:
    """The level spec in force at iteration ``t`` (a lookup on D)."""
    if t < 0:
        raise ValueError("iteration must be >= 0")
    return state.schedule[state.difficulty - 1]


def maybe_advance(state: CurriculumState, episode_reward: float) -> CurriculumState:
    """Record one episode reward; advance D when a full window's mean beats T_r."""
    window = deque(state.recent_rewards, maxlen=state.window)
    window.append(float(episode_reward))
    out = dataclasses.replace(state, recent_rewards=tuple(window), iteration=state.iteration + 1)
    if not state.enabled or len(window) < state.window:
        return out
    mean = sum(window) / len(window)
    if mean > state.threshold and state.difficulty < MAX_LEVEL:
        return dataclasses.replace(out, difficulty=state.difficulty + 1, recent_rewards=())
    return out
