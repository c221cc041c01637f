"""Episode orchestration: prep/test gating, visibility, rewards and termination."""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from . import kernels
from .sensors import FRONTAL, GridSensorConfig
from .world import (
    BOUNDARY,
    HIDER,
    OBSTACLE,
    PROP,
    SEEKER,
    TARGET,
    WALL,
    ZERO_ACTION,
    AgentAction,
    WorldState,
    _boxes_overlap,
    agent_contacts,
    detect_tags,
    forward_vector,
    opening_blocked,
    step_physics,
    try_manipulate,
)

CAUSES = ("hidden_frame", "sight_frame", "tag", "tagged", "blocked_opening", "scenario_specific")
SCENARIOS = ("hummingbird", "drone_target", "eye")
DONE_REASONS = ("tag", "step_limit", "target", "collide")


class EpisodeFinished(RuntimeError):
    """Raised when stepping an episode that has already ended."""


@functools.lru_cache(maxsize=256)
def prep_steps(max_steps: int, fraction: float = 0.4) -> int:
    """Ticks in the prep phase: floor(S_m * fraction), computed exactly."""
    if max_steps < 0:
        raise ValueError("max_steps must be >= 0")
    return math.floor(Fraction(max_steps) * Fraction(str(fraction)))


def test_steps(max_steps: int, fraction: float = 0.4) -> int:
    """Complement of ``prep_steps`` so the two phases sum to S_m."""
    return max_steps - prep_steps(max_steps, fraction)


@dataclass(frozen=True)
class PhaseConfig:
    max_env_steps: int = 3072
    prep_fraction: float = 0.40
    decision_interval: int = 3

    def __post_init__(self):
        if not 0 < self.prep_fraction < 1:
            raise ValueError("prep_fraction must lie in (0, 1)")
        if self.decision_interval < 1:
            raise ValueError("decision_interval must be >= 1")
        if self.max_env_steps < 1 or self.max_env_steps % self.decision_interval:
            raise ValueError("max_env_steps must be a positive multiple of decision_interval")

    @property
    def prep(self) -> int:
        return prep_steps(self.max_env_steps, self.prep_fraction)

    @property
    def decisions(self) -> int:
        return self.max_env_steps // self.decision_interval


@dataclass(frozen=True)
class RewardConfig:
    hider_hidden_per_frame: float = 0.001
    seeker_sight_per_frame: float = 0.001
    seeker_tag: float = 1.0
    hider_tagged: float = 0.0
    opening_blocked_bonus: float = 0.1
    team_shared: bool = True
    # pre-experiment schedule; "hideseek" disables it
    scenario: str = "hideseek"
    in_target_per_frame: float = 0.0
    reach_target: float = 0.0
    look_at_target_per_frame: float = 0.0
    collide: float = 0.0
    wall_collide: float = 0.0
    terminal_collide: bool = False


def scenario_rewards(name: str) -> RewardConfig:
    """Reward schedules of the three single-team pre-experiments."""
    if name == "hummingbird":
        return RewardConfig(scenario=name, in_target_per_frame=0.01, wall_collide=-0.5)
    if name == "drone_target":
        return RewardConfig(scenario=name, reach_target=1.0, wall_collide=-1.0, terminal_collide=True)
    if name == "eye":
        return RewardConfig(
            scenario=name, reach_target=1.0, look_at_target_per_frame=0.001,
            collide=-0.2, wall_collide=-0.5,
        )
    raise KeyError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")


@dataclass(frozen=True)
class RewardEvent:
    tick: int
    agent_id: int
    amount: float
    cause: str


@dataclass(frozen=True)
class EpisodeConfig:
    phase: PhaseConfig = field(default_factory=PhaseConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)
    frontal: GridSensorConfig = FRONTAL
    reward_scale: float = 1.0  # multiplies per-frame rewards (level 4 uses 0.5)
    target_mode: str = "auto"  # auto picks the scenario's default motion
    target_speed: float = 1.5

    def resolved_target_mode(self) -> str:
        if self.target_mode != "auto":
            return self.target_mode
        return _TARGET_MODES.get(self.rewards.scenario, "none")


@dataclass
class EpisodeStatus:
    phase: str = "prep"
    done: bool = False
    done_reason: str | None = None
    cumulative_reward: dict = field(default_factory=dict)
    decisions: int = 0
    hidden_decisions: dict = field(default_factory=dict)
    blocked: frozenset = frozenset()

    def copy(self) -> "EpisodeStatus":
        return dataclasses.replace(
            self,
            cumulative_reward=dict(self.cumulative_reward),
            hidden_decisions=dict(self.hidden_decisions),
        )


def new_status(state: WorldState, config: EpisodeConfig) -> EpisodeStatus:
    agents = state.agent_ids
    phase = "prep" if state.tick < config.phase.prep and config.rewards.scenario == "hideseek" else "test"
    return EpisodeStatus(
        phase=phase,
        cumulative_reward={a: 0.0 for a in agents},
        hidden_decisions={h: 0 for h in state.ids_of(HIDER)},
    )


def signal_strength(p1, p2, forward) -> float:
    """Forward alignment of the offset p2 - p1 divided by its length."""
    a = np.asarray(p2, dtype=np.float64) - np.asarray(p1, dtype=np.float64)
    r = math.sqrt(float(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]))
    if r == 0.0:
        raise ValueError("signal_strength undefined for coincident points")
    t = np.asarray(forward, dtype=np.float64)
    d = float(t[0] * (a[0] / r) + t[1] * (a[1] / r) + t[2] * (a[2] / r))
    return d / r


def in_fov(state: WorldState, viewer: int, point, config: GridSensorConfig = FRONTAL) -> bool:
    """Is ``point`` inside the viewer's sensor cone and range?"""
    rel = np.asarray(point, dtype=np.float64) - state.pos[viewer]
    dist = float(np.linalg.norm(rel))
    if dist > config.max_distance:
        return False
    if dist == 0.0:
        return True
    yaw = float(state.yaw[viewer])
    c, s = math.cos(yaw), math.sin(yaw)
    x = rel[0] * c - rel[2] * s
    z = rel[0] * s + rel[2] * c
    lat = math.degrees(math.atan2(rel[1], math.hypot(x, z)))
    lon = math.degrees(math.atan2(x, z))
    return -config.lat_angle_south <= lat <= config.lat_angle_north and abs(lon) <= config.lon_angle


def occluders(state: WorldState) -> np.ndarray:
    """Ids of bodies that block sight: walls, boundaries and locked props."""
    k = state.kind
    return np.flatnonzero((k == WALL) | (k == BOUNDARY) | ((k == PROP) & state.locked))


def line_clear(state: WorldState, a, b, blockers=None) -> bool:
    ids = occluders(state) if blockers is None else blockers
    if ids.size == 0:
        return True
    lo = state.pos[ids] - state.half[ids]
    hi = state.pos[ids] + state.half[ids]
    return kernels.segment_first_hit(np.asarray(a, float), np.asarray(b, float), lo, hi) < 0


def visible(state: WorldState, seeker_id: int, hider_id: int, config: GridSensorConfig = FRONTAL,
            blockers=None) -> bool:
    """Seeker sees hider: hider centre in the frontal cone, in range, and the
    segment between centres touches no wall, boundary or locked prop."""
    for i in (seeker_id, hider_id):
        if not 0 <= i < state.n:
            raise KeyError(f"unknown agent id {i}")
    if not in_fov(state, seeker_id, state.pos[hider_id], config):
        return False
    return line_clear(state, state.pos[seeker_id], state.pos[hider_id], blockers)


def visibility_matrix(state: WorldState, config: GridSensorConfig = FRONTAL) -> np.ndarray:
    """Boolean [seeker, hider] table in id order, from ``visible``."""
    seekers, hiders = state.ids_of(SEEKER), state.ids_of(HIDER)
    blockers = occluders(state)
    out = np.zeros((len(seekers), len(hiders)), dtype=bool)
    for a, s in enumerate(seekers):
        for b, h in enumerate(hiders):
            out[a, b] = visible(state, s, h, config, blockers)
    return out


def _apply_manipulation(state: WorldState, actions: Mapping[int, AgentAction]) -> WorldState:
    for aid in sorted(actions):
        m = actions[aid].manipulate
        if m != "none":
            state = try_manipulate(state, aid, m)
    return state


def _emit(events, status, tick, agent, amount, cause):
    events.append(RewardEvent(tick, agent, float(amount), cause))
    status.cumulative_reward[agent] = status.cumulative_reward.get(agent, 0.0) + float(amount)


def step_episode(state: WorldState, status: EpisodeStatus, actions: Mapping[int, AgentAction],
                 config: EpisodeConfig):
    """Advance one physics tick. Returns ``(state, status, events)``.

    Actions are applied every tick; manipulation requests only on the tick a
    decision is taken (tick divisible by the decision interval). Per-frame
    rewards are emitted when the new tick closes a decision.
    """
    if status.done:
        raise EpisodeFinished("episode already finished")
    if config.rewards.scenario != "hideseek":
        return _step_scenario(state, status, actions, config)
    phase = config.phase
    rw = config.rewards
    seekers = state.ids_of(SEEKER)
    hiders = state.ids_of(HIDER)
    acts = dict(actions)
    frozen = ()
    if state.tick < phase.prep:
        for s in seekers:
            acts[s] = ZERO_ACTION
        frozen = seekers
    if state.tick % phase.decision_interval == 0:
        state = _apply_manipulation(state, acts)
    new = step_physics(state, acts, frozen=frozen)
    st = status.copy()
    events: list[RewardEvent] = []
    tick = new.tick
    if tick % phase.decision_interval == 0:
        st.decisions += 1
        vis = visibility_matrix(new, config.frontal)
        scale = config.reward_scale
        for b, h in enumerate(hiders):
            if not vis[:, b].any():
                st.hidden_decisions[h] = st.hidden_decisions.get(h, 0) + 1
                _emit(events, st, tick, h, scale * rw.hider_hidden_per_frame, "hidden_frame")
        for a, s in enumerate(seekers):
            sees = vis.any() if rw.team_shared else vis[a].any()
            if sees:
                _emit(events, st, tick, s, scale * rw.seeker_sight_per_frame, "sight_frame")
        newly = [op.id for op in new.openings
                 if op.enabled and op.id not in st.blocked and opening_blocked(new, op.id)]
        for _ in newly:
            for h in hiders:
                _emit(events, st, tick, h, rw.opening_blocked_bonus, "blocked_opening")
        st.blocked = st.blocked | frozenset(newly)
    # seekers are inert during prep, so contact only counts once they are released
    tags = detect_tags(new) if tick > phase.prep else []
    if tags:
        for s in seekers:
            _emit(events, st, tick, s, rw.seeker_tag, "tag")
        for h in sorted(set(h for _, h in tags)):
            _emit(events, st, tick, h, rw.hider_tagged, "tagged")
        st.done, st.done_reason = True, "tag"
    elif tick >= phase.max_env_steps:
        st.done, st.done_reason = True, "step_limit"
    st.phase = "prep" if tick < phase.prep else "test"
    return new, st, events


# --- single-team pre-experiments ------------------------------------------


def move_target(state: WorldState, mode: str, speed: float) -> WorldState:
    """Scripted target motion, in place. ``fleeing`` runs horizontally away
    from the nearest agent; ``drift`` follows a slow deterministic circle."""
    tid = state.ids_of(TARGET)
    if not tid or mode in ("none", "stationary"):
        return state
    t = tid[0]
    dt = state.params.dt
    if mode == "fleeing":
        agents = state.agent_ids
        rel = state.pos[t] - state.pos[agents]
        nearest = int(np.argmin(np.linalg.norm(rel, axis=1)))
        away = rel[nearest] * np.array([1.0, 0.0, 1.0])
        norm = float(np.linalg.norm(away))
        v = np.zeros(3) if norm == 0.0 else away * (speed / norm)
    elif mode == "drift":
        w = 2.0 * math.pi / 400.0
        phase = w * state.tick
        v = speed * np.array([math.cos(phase), 0.0, math.sin(phase)])
    else:
        raise ValueError(f"unknown target mode {mode!r}")
    inset = state.half[t] + np.array([0.4, 0.0, 0.4])
    state.pos[t] = np.clip(state.pos[t] + v * dt, state.bounds_lo + inset, state.bounds_hi - inset)
    state.vel[t] = v
    return state


def _solid_contact(state: WorldState, agent: int) -> bool:
    for j in agent_contacts(state, agent):
        if j < 0 or state.kind[j] in (WALL, BOUNDARY, OBSTACLE, PROP):
            return True
    return False


def _ally_contact(state: WorldState, agent: int) -> bool:
    lo, hi = state.box_lo(), state.box_hi()
    for j in state.agent_ids:
        if j != agent and _boxes_overlap(lo[agent], hi[agent], lo[j], hi[j]):
            return True
    return False


def _step_scenario(state, status, actions, config: EpisodeConfig):
    rw = config.rewards
    phase = config.phase
    new = step_physics(state, actions)
    move_target(new, config.resolved_target_mode(), config.target_speed)
    st = status.copy()
    st.phase = "test"
    events: list[RewardEvent] = []
    tick = new.tick
    agents = new.agent_ids
    tid = new.ids_of(TARGET)
    lo, hi = new.box_lo(), new.box_hi()
    reached = [a for a in agents if tid and _boxes_overlap(lo[a], hi[a], lo[tid[0]], hi[tid[0]])]
    decision = tick % phase.decision_interval == 0
    if decision:
        st.decisions += 1
        for a in agents:
            if rw.in_target_per_frame and a in reached:
                _emit(events, st, tick, a, rw.in_target_per_frame, "scenario_specific")
            if rw.look_at_target_per_frame and tid and in_fov(new, a, new.pos[tid[0]], config.frontal):
                if line_clear(new, new.pos[a], new.pos[tid[0]]):
                    _emit(events, st, tick, a, rw.look_at_target_per_frame, "scenario_specific")
            if rw.collide and _ally_contact(new, a):
                _emit(events, st, tick, a, rw.collide, "scenario_specific")
            if rw.wall_collide and not rw.terminal_collide and _solid_contact(new, a):
                _emit(events, st, tick, a, rw.wall_collide, "scenario_specific")
    if rw.terminal_collide and rw.wall_collide:
        crashed = [a for a in agents if _solid_contact(new, a)]
        for a in crashed:
            _emit(events, st, tick, a, rw.wall_collide, "scenario_specific")
        if crashed:
            st.done, st.done_reason = True, "collide"
    if not st.done and rw.reach_target and reached:
        for a in reached:
            _emit(events, st, tick, a, rw.reach_target, "scenario_specific")
        st.done, st.done_reason = True, "target"
    if not st.done and tick >= phase.max_env_steps:
        st.done, st.done_reason = True, "step_limit"
    return new, st, events


_TARGET_MODES = {"hummingbird": "stationary", "drone_target": "fleeing", "eye": "drift"}

