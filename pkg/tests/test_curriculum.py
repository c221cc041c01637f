import pytest

from hideseek.curriculum import (
    DEFAULT_SCHEDULE, MAX_LEVEL, CurriculumState, LevelSpec, level_spec, maybe_advance, prop_count,
    task_for_iteration,
)


def test_level_specs():
    assert [s.enabled_openings for s in DEFAULT_SCHEDULE] == [1, 2, 3, 4]
    assert [s.prop_count for s in DEFAULT_SCHEDULE] == [1, 2, 3, 4]
    assert [s.reward_scale for s in DEFAULT_SCHEDULE] == [1.0, 1.0, 1.0, 0.5]
    assert level_spec(4, 0.25).reward_scale == 0.25
    with pytest.raises(ValueError):
        LevelSpec(5, frozenset(), 0)
    with pytest.raises(ValueError):
        LevelSpec(2, frozenset(), 2, reward_scale=0.0)


def test_prop_count_ignores_reward_number():
    assert prop_count(3, 0.0) == prop_count(3, 99.0) == 3
    with pytest.raises(ValueError):
        prop_count(0)


def test_advance_needs_a_full_window():
    st = CurriculumState(threshold=0.5, window=3)
    for r in (1.0, 1.0):
        st = maybe_advance(st, r)
        assert st.difficulty == 1
    st = maybe_advance(st, 1.0)
    assert st.difficulty == 2 and st.recent_rewards == ()
    assert st.iteration == 3


def test_mean_must_strictly_exceed_threshold():
    st = CurriculumState(threshold=1.0, window=2)
    st = maybe_advance(maybe_advance(st, 1.0), 1.0)
    assert st.difficulty == 1
    st = maybe_advance(st, 1.5)
    assert st.difficulty == 2


def test_never_past_max_or_when_disabled():
    st = CurriculumState(difficulty=MAX_LEVEL, threshold=0.0, window=1)
    assert maybe_advance(st, 10.0).difficulty == MAX_LEVEL
    off = CurriculumState(threshold=0.0, window=1, enabled=False)
    assert maybe_advance(off, 10.0).difficulty == 1


def test_task_lookup_follows_difficulty():
    st = CurriculumState(difficulty=3)
    assert task_for_iteration(0, st).level == 3
    with pytest.raises(ValueError):
        task_for_iteration(-1, st)


def test_state_validation():
    with pytest.raises(ValueError):
        CurriculumState(difficulty=0)
    with pytest.raises(ValueError):
        CurriculumState(window=0)
    assert CurriculumState().windowed_mean is None
