import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hideseek.world import (
    BOUNDARY, HIDER, PROP, SEEKER, WALL, AgentAction, ArenaConfig, ConfigError, WorldParams,
    build_arena, build_open_arena, detect_tags, drag_anchor, dumps_state, loads_state, opening_blocked,
    overlap_volume, step_physics, try_manipulate, validate_hideseek,
)

COUNTS = {"hiders": 1, "seekers": 1}


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_arena_invariants(level):
    for seed in range(5):
        w = build_arena(level, level, {"hiders": 2, "seekers": 3}, seed)
        validate_hideseek(w)
        assert len(w.openings) == level
        assert [op.kind for op in w.openings] == ["door", "window", "door", "window"][:level]
        assert len(w.ids_of(PROP)) == level


def test_arena_is_deterministic_per_seed():
    a = build_arena(2, 2, COUNTS, 11)
    b = build_arena(2, 2, COUNTS, 11)
    c = build_arena(2, 2, COUNTS, 12)
    assert dumps_state(a) == dumps_state(b)
    assert dumps_state(a) != dumps_state(c)


def test_seekers_start_outside_room():
    arena = ArenaConfig()
    limit = arena.room_half + arena.wall_thickness
    for seed in range(20):
        w = build_arena(1, 1, {"hiders": 1, "seekers": 4}, seed)
        for s in w.ids_of(SEEKER):
            x, _, z = w.pos[s]
            assert abs(x) > limit or abs(z) > limit


@pytest.mark.parametrize("level,props,counts", [
    (0, 1, COUNTS), (5, 1, COUNTS), (1, 0, COUNTS), (1, 5, COUNTS),
    (1, 1, {"hiders": 3, "seekers": 1}), (1, 1, {"hiders": 1, "seekers": 0}),
])
def test_arena_rejects_bad_counts(level, props, counts):
    with pytest.raises(ConfigError):
        build_arena(level, props, counts, 0)


def test_open_arena_has_target_away_from_agents():
    w = build_open_arena(2, 3, ArenaConfig(layout="open", target="stationary", obstacle_count=0))
    t = w.ids_of(6)[0]
    for a in w.agent_ids:
        assert np.linalg.norm(w.pos[t] - w.pos[a]) >= 3.0
    assert np.sum(w.kind == BOUNDARY) == 4


def _open_world(**kw):
    return build_open_arena(1, 0, ArenaConfig(layout="open", size_x=60, size_z=60, obstacle_count=0, **kw))


def test_speed_follows_exact_exponential_approach():
    w = _open_world()
    a = w.agent_ids[0]
    w.pos[a] = (0.0, 4.0, 0.0)
    p = w.params
    for n in range(1, 51):
        w = step_physics(w, {a: AgentAction((0.0, 0.0, 1.0))})
        expected = p.terminal_speed * (1.0 - math.exp(-p.drag * n * p.dt))
        assert np.linalg.norm(w.vel[a]) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_step_does_not_mutate_input_and_advances_tick():
    w = build_arena(1, 1, COUNTS, 0)
    before = dumps_state(w)
    nxt = step_physics(w, {a: AgentAction((1.0, 0.0, 0.0), 0.5) for a in w.agent_ids})
    assert dumps_state(w) == before
    assert nxt.tick == w.tick + 1


def test_frozen_agents_do_not_move():
    w = build_arena(1, 1, COUNTS, 2)
    s = w.ids_of(SEEKER)[0]
    start = w.pos[s].copy()
    for _ in range(30):
        w = step_physics(w, {s: AgentAction((1.0, 1.0, 1.0))}, frozen=[s])
    assert np.array_equal(w.pos[s], start)


def test_step_rejects_bad_actions():
    w = build_arena(1, 1, COUNTS, 0)
    with pytest.raises(KeyError):
        step_physics(w, {w.ids_of(PROP)[0]: AgentAction()})
    with pytest.raises(ValueError):
        step_physics(w, {w.agent_ids[0]: AgentAction((math.nan, 0.0, 0.0))})
    with pytest.raises(ValueError):
        step_physics(w, {}, dt=0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.tuples(*[st.floats(-1, 1)] * 4), min_size=5, max_size=40))
def test_agents_never_sink_into_static_geometry(seed, actions):
    w = build_arena(2, 2, COUNTS, seed)
    static = np.flatnonzero((w.kind == WALL) | (w.kind == BOUNDARY))
    for t in actions:
        w = step_physics(w, {a: AgentAction(t[:3], t[3]) for a in w.agent_ids})
        lo, hi = w.box_lo(), w.box_hi()
        for a in w.agent_ids:
            assert np.all(lo[a] >= w.bounds_lo - 1e-9) and np.all(hi[a] <= w.bounds_hi + 1e-9)
            for j in static:
                assert overlap_volume(lo[a], hi[a], lo[j], hi[j]) < 1e-9


def _hider_next_to_prop(seed=0):
    w = build_arena(1, 1, COUNTS, seed)
    h, p = w.ids_of(HIDER)[0], w.ids_of(PROP)[0]
    # open floor between the room and the +x boundary, hider facing -x
    w.pos[p] = (6.0, 0.6, 6.0)
    w.pos[h] = (7.5, 0.6, 6.0)
    w.yaw[h] = 1.5 * math.pi
    others = [i for i in range(w.n) if i not in (h, p) and w.kind[i] not in (WALL, BOUNDARY)]
    w.pos[others] = w.pos[others] * np.array([0.1, 1.0, 0.1])  # keep clutter near the room
    return w, h, p


def test_grab_drag_and_release():
    w, h, p = _hider_next_to_prop()
    g = try_manipulate(w, h, "grab_or_lock")
    assert g.dragged_by[p] == h and w.dragged_by[p] == -1
    g = step_physics(g, {h: AgentAction()})
    np.testing.assert_allclose(g.pos[p], drag_anchor(g, h, p))
    r = try_manipulate(g, h, "release")
    assert r.dragged_by[p] == -1


def test_grab_out_of_reach_is_noop():
    w, h, p = _hider_next_to_prop()
    w.pos[h] = w.pos[p] + np.array([5.0, 0.0, 0.0])
    assert try_manipulate(w, h, "grab_or_lock") is w


def test_seekers_cannot_manipulate():
    w = build_arena(1, 1, COUNTS, 0)
    s, p = w.ids_of(SEEKER)[0], w.ids_of(PROP)[0]
    w.pos[s] = w.pos[p] + np.array([1.2, 0.0, 0.0])
    assert try_manipulate(w, s, "grab_or_lock") is w


def test_lock_into_opening_blocks_it_and_freezes_prop():
    w, h, p = _hider_next_to_prop()
    w = try_manipulate(w, h, "grab_or_lock")
    op = w.openings[0]
    w.pos[p] = op.slot_center + np.array([0.05, 0.0, 0.05])
    w = try_manipulate(w, h, "grab_or_lock")
    assert w.locked[p] and w.dragged_by[p] == -1
    assert np.array_equal(w.pos[p], op.slot_center)
    assert opening_blocked(w, op.id)
    # locked props are immovable, even when pushed
    before = w.pos[p].copy()
    w.pos[h] = before + np.array([0.0, 0.0, 1.0])
    for _ in range(20):
        w = step_physics(w, {h: AgentAction((0.0, 0.0, -1.0))})
    assert np.array_equal(w.pos[p], before)


def test_opening_blocked_unknown_id():
    w = build_arena(1, 1, COUNTS, 0)
    assert not opening_blocked(w, 0)
    with pytest.raises(KeyError):
        opening_blocked(w, 7)


def test_manipulate_validation():
    w = build_arena(1, 1, COUNTS, 0)
    with pytest.raises(ValueError):
        try_manipulate(w, w.agent_ids[0], "throw")
    with pytest.raises(KeyError):
        try_manipulate(w, w.ids_of(PROP)[0], "release")


def test_detect_tags_on_overlap():
    w = build_arena(1, 1, COUNTS, 0)
    h, s = w.ids_of(HIDER)[0], w.ids_of(SEEKER)[0]
    assert detect_tags(w) == []
    w.pos[s] = w.pos[h] + np.array([0.7, 0.0, 0.0])
    assert detect_tags(w) == [(s, h)]


def test_state_round_trip():
    w = build_arena(3, 3, {"hiders": 2, "seekers": 2}, 4)
    w = step_physics(w, {a: AgentAction((0.3, 0.2, -0.1), 0.4) for a in w.agent_ids})
    text = dumps_state(w)
    assert dumps_state(loads_state(text)) == text
    with pytest.raises(ValueError):
        loads_state(text.replace("hideseek.world", "other", 1))


def test_world_params_terminal_speed():
    assert WorldParams().terminal_speed == 5.0
