import math

import numpy as np
import pytest

from hideseek.game import (
    EpisodeConfig, EpisodeFinished, PhaseConfig, RewardConfig, in_fov, new_status, prep_steps, scenario_rewards,
    signal_strength, step_episode, visible,
)
from hideseek.game import test_steps as phase_test_steps
from hideseek.world import (
    HIDER, PROP, SEEKER, TARGET, AgentAction, ArenaConfig, build_arena, build_open_arena, try_manipulate,
)

COUNTS = {"hiders": 1, "seekers": 1}


@pytest.mark.parametrize("m,prep", [(3072, 1228), (10, 4), (600, 240), (1, 0), (0, 0)])
def test_prep_split_is_exact(m, prep):
    assert prep_steps(m) == prep
    assert prep_steps(m) + phase_test_steps(m) == m


def test_prep_rejects_negative():
    with pytest.raises(ValueError):
        prep_steps(-1)


@pytest.mark.parametrize("kw", [{"prep_fraction": 0.0}, {"decision_interval": 0}, {"max_env_steps": 10}])
def test_phase_config_validation(kw):
    with pytest.raises(ValueError):
        PhaseConfig(**kw)


def test_scenario_rewards():
    assert scenario_rewards("drone_target").terminal_collide
    assert scenario_rewards("hummingbird").in_target_per_frame == 0.01
    with pytest.raises(KeyError):
        scenario_rewards("tag")


def test_signal_strength_sign_and_falloff():
    fwd = (0.0, 0.0, 1.0)
    assert signal_strength((0, 0, 0), (0, 0, 2), fwd) == pytest.approx(0.5)
    assert signal_strength((0, 0, 0), (0, 0, -4), fwd) == pytest.approx(-0.25)
    assert signal_strength((0, 0, 0), (3, 0, 0), fwd) == 0.0
    with pytest.raises(ValueError):
        signal_strength((1, 1, 1), (1, 1, 1), fwd)


def _pair_in_open_floor():
    w = build_arena(1, 1, COUNTS, 0)
    s, h, p = w.ids_of(SEEKER)[0], w.ids_of(HIDER)[0], w.ids_of(PROP)[0]
    w.pos[s] = (-7.0, 0.6, 7.0)
    w.pos[h] = (-7.0, 0.6, 7.0) + np.array([0.0, 0.0, -5.0])
    w.yaw[s] = math.pi  # facing -z toward the hider
    w.pos[p] = (20.0, 0.6, 20.0)
    return w, s, h, p


def test_in_fov_cone_and_range():
    w, s, h, _ = _pair_in_open_floor()
    assert in_fov(w, s, w.pos[h])
    assert not in_fov(w, s, w.pos[s] + np.array([0.0, 0.0, 3.0]))  # behind
    assert not in_fov(w, s, w.pos[s] + np.array([0.0, 0.0, -25.0]))  # out of range


def test_only_locked_props_block_sight():
    w, s, h, p = _pair_in_open_floor()
    assert visible(w, s, h)
    w.pos[p] = 0.5 * (w.pos[s] + w.pos[h])
    assert visible(w, s, h)
    w.locked[p] = True
    assert not visible(w, s, h)
    with pytest.raises(KeyError):
        visible(w, s, 99)


def _run(w, cfg, actions=None, ticks=None):
    st = new_status(w, cfg)
    events = []
    n = 0
    while not st.done and (ticks is None or n < ticks):
        w, st, ev = step_episode(w, st, actions or {}, cfg)
        events += ev
        n += 1
    return w, st, events


def test_episode_runs_to_step_limit_and_refuses_more():
    cfg = EpisodeConfig(phase=PhaseConfig(max_env_steps=30))
    w = build_arena(1, 1, COUNTS, 1)
    w, st, events = _run(w, cfg)
    assert st.done_reason == "step_limit" and w.tick == 30 and st.decisions == 10
    with pytest.raises(EpisodeFinished):
        step_episode(w, st, {}, cfg)


def test_per_frame_reward_scale():
    w = build_arena(1, 1, COUNTS, 1)
    full = _run(w, EpisodeConfig(phase=PhaseConfig(max_env_steps=30)))[1]
    half = _run(w, EpisodeConfig(phase=PhaseConfig(max_env_steps=30), reward_scale=0.5))[1]
    for a in w.agent_ids:
        assert half.cumulative_reward[a] == pytest.approx(0.5 * full.cumulative_reward[a])


def test_no_tag_during_prep():
    cfg = EpisodeConfig(phase=PhaseConfig(max_env_steps=30))
    w = build_arena(1, 1, COUNTS, 0)
    s, h = w.ids_of(SEEKER)[0], w.ids_of(HIDER)[0]
    w.pos[s] = w.pos[h] + np.array([0.7, 0.0, 0.0])
    _, st, events = _run(w, cfg, ticks=prep_steps(30))
    assert not st.done and not [e for e in events if e.cause == "tag"]


def test_tag_after_prep_ends_episode():
    cfg = EpisodeConfig(phase=PhaseConfig(max_env_steps=30))
    w = build_arena(1, 1, COUNTS, 0)
    w.tick = prep_steps(30)
    s, h = w.ids_of(SEEKER)[0], w.ids_of(HIDER)[0]
    w.pos[s] = w.pos[h] + np.array([0.7, 0.0, 0.0])
    _, st, events = _run(w, cfg)
    assert st.done_reason == "tag"
    assert [(e.agent_id, e.amount) for e in events if e.cause == "tag"] == [(s, 1.0)]


def test_blocked_opening_bonus_paid_once():
    cfg = EpisodeConfig(phase=PhaseConfig(max_env_steps=30))
    w = build_arena(1, 1, {"hiders": 2, "seekers": 1}, 0)
    h, p = w.ids_of(HIDER)[0], w.ids_of(PROP)[0]
    op = w.openings[0]
    w.pos[p] = op.slot_center
    w.pos[h] = op.slot_center + np.array([0.0, 0.0, 0.0])
    w.locked[p] = True
    _, st, events = _run(w, cfg)
    bonus = [e for e in events if e.cause == "blocked_opening"]
    assert sorted(e.agent_id for e in bonus) == sorted(w.ids_of(HIDER))
    assert all(e.amount == 0.1 for e in bonus)
    assert st.blocked == frozenset({op.id})


def test_drone_reaching_target_ends_episode():
    cfg = EpisodeConfig(phase=PhaseConfig(max_env_steps=300), rewards=scenario_rewards("drone_target"),
                        target_mode="stationary")
    w = build_open_arena(1, 0, ArenaConfig(layout="open", target="stationary", obstacle_count=0))
    a, t = w.agent_ids[0], w.ids_of(TARGET)[0]
    w.pos[a] = w.pos[t] + np.array([0.0, 0.0, -1.5])
    w.yaw[a] = 0.0
    _, st, events = _run(w, cfg, {a: AgentAction((0.0, 0.0, 1.0))})
    assert st.done_reason == "target"
    assert st.cumulative_reward[a] == 1.0


def test_drone_crash_is_terminal():
    cfg = EpisodeConfig(phase=PhaseConfig(max_env_steps=300), rewards=scenario_rewards("drone_target"),
                        target_mode="stationary")
    w = build_open_arena(1, 0, ArenaConfig(layout="open", target="stationary", obstacle_count=0))
    a = w.agent_ids[0]
    w.pos[a, 1] = 3.0
    _, st, _ = _run(w, cfg, {a: AgentAction((0.0, -1.0, 0.0))})
    assert st.done_reason == "collide" and st.cumulative_reward[a] == -1.0


def test_hideseek_status_starts_in_prep():
    w = build_arena(1, 1, COUNTS, 0)
    assert new_status(w, EpisodeConfig()).phase == "prep"
    assert new_status(w, EpisodeConfig(rewards=RewardConfig(scenario="eye"))).phase == "test"
