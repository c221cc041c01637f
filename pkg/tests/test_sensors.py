import math

import numpy as np
import pytest

from hideseek.sensors import (
    DEFAULT_CHANNELS, FRONTAL, SPATIAL, CandidateBuffer, GridSensorConfig, ProprioVector, RaycastConfig,
    _direction_cells, cell_center, cell_features, cell_occupancy, cell_size_at_distance, direction_cell,
    gather_candidates, grid_scan, proprio, ray_angles, raycast_sweep,
)
from hideseek.world import OBSTACLE, ArenaConfig, AgentAction, build_arena, build_open_arena, step_physics


def _lonely_agent(obstacles=1, yaw=0.0):
    w = build_open_arena(1, 0, ArenaConfig(layout="open", size_x=60, size_z=60, size_y=20, obstacle_count=obstacles,
                                           target="none"))
    a = w.agent_ids[0]
    w.pos[a] = (0.0, 10.0, 0.0)
    w.yaw[a] = yaw
    return w, a


def test_default_grid_shapes():
    assert (SPATIAL.rows, SPATIAL.cols, len(SPATIAL.feature_channels)) == (18, 36, 8)
    assert (FRONTAL.rows, FRONTAL.cols, len(FRONTAL.feature_channels)) == (15, 14, 8)
    assert RaycastConfig().size == 112
    assert ProprioVector.SIZE == 12


@pytest.mark.parametrize("kw", [
    {"cell_arc": 7.0}, {"min_distance": 0.0}, {"min_distance": 30.0}, {"normalization_exponent": 0.0},
    {"initial_collider_buffer": 0}, {"feature_channels": ("colour",)},
])
def test_grid_config_validation(kw):
    with pytest.raises(ValueError):
        GridSensorConfig(**kw)


def test_cell_center_and_size():
    np.testing.assert_array_equal(cell_center([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]), [2.0, 4.0, 6.0])
    assert cell_size_at_distance(10.0, 20.0) == pytest.approx(2 * math.pi * 20 / 36)
    with pytest.raises(ValueError):
        cell_size_at_distance(0.0, 1.0)


def test_cell_occupancy_closed_boxes():
    cell = (np.zeros(3), np.ones(3))
    assert cell_occupancy(*cell, []) == 0
    assert cell_occupancy(*cell, [((1.0, 0.2, 0.2), (2.0, 0.5, 0.5))]) == 1  # touching face
    assert cell_occupancy(*cell, [((1.01, 0.2, 0.2), (2.0, 0.5, 0.5))]) == 0


def test_cell_features_tags_and_distance():
    lo, hi = np.zeros(3), np.full(3, 2.0)
    empty = cell_features(lo, hi, [])
    assert empty[DEFAULT_CHANNELS.index("distance")] == 1.0 and empty[0] == 0.0
    feats = cell_features(lo, hi, [((1.5, 0.0, 0.0), (3.0, 2.0, 2.0), "wall"), ((5, 5, 5), (6, 6, 6), "hider")])
    assert feats[DEFAULT_CHANNELS.index("wall")] == 1.0
    assert feats[DEFAULT_CHANNELS.index("hider")] == 0.0
    assert feats[DEFAULT_CHANNELS.index("distance")] == pytest.approx(0.5 / math.sqrt(3.0))


def test_candidate_buffer_doubles():
    buf = CandidateBuffer(2)
    for i in range(5):
        buf.push(i)
    assert buf.capacity == 8 and list(buf.view()) == [0, 1, 2, 3, 4]
    buf.extend(range(5, 20))
    assert buf.capacity == 32 and list(buf.view()) == list(range(20))


def test_small_buffer_gives_identical_scan():
    w = build_arena(4, 4, {"hiders": 2, "seekers": 4}, 3)
    a = w.agent_ids[0]
    small = GridSensorConfig(90, 90, 180, 0.1, 20, 10, 0.5, 1)
    big = grid_scan(w, a, SPATIAL)
    tiny = grid_scan(w, a, small)
    assert np.array_equal(big.values, tiny.values)
    assert tiny.capacity >= len(gather_candidates(w, a, 20.0, 1).view())


def test_box_straight_ahead_lands_in_centre_cell():
    w, a = _lonely_agent()
    o = w.ids_of(OBSTACLE)[0]
    w.pos[o] = w.pos[a] + np.array([0.0, 0.0, 5.0])
    obs = grid_scan(w, a, SPATIAL)
    g = obs.grid()
    r, c = direction_cell((0.0, 0.0, 1.0), SPATIAL)
    assert (r, c) == (9, 18)
    assert g[r, c, DEFAULT_CHANNELS.index("obstacle")] == 1.0
    t = 5.0 - w.half[o, 2]
    assert obs.channel("distance")[r, c] == pytest.approx((t / 20.0) ** 0.5, abs=1e-12)
    assert obs.channel("occupancy").sum() >= 1
    # behind the agent there is nothing
    assert g[9, 0, 0] == 0.0


def test_scan_is_yaw_equivariant():
    w, a = _lonely_agent()
    o = w.ids_of(OBSTACLE)[0]
    w.half[o] = (1.0, 1.0, 1.0)  # boxes stay axis aligned, so only quarter turns are exact
    w.pos[o] = w.pos[a] + np.array([3.0, 1.0, 4.0])
    base = grid_scan(w, a, FRONTAL).values
    yaw = 0.5 * math.pi
    c, s = math.cos(yaw), math.sin(yaw)
    rel = w.pos[o] - w.pos[a]
    w.pos[o] = w.pos[a] + np.array([rel[0] * c + rel[2] * s, rel[1], rel[2] * c - rel[0] * s])
    w.yaw[a] = yaw
    np.testing.assert_allclose(grid_scan(w, a, FRONTAL).values, base, atol=1e-9)


def test_out_of_range_and_inside_min_distance_ignored():
    w, a = _lonely_agent()
    o = w.ids_of(OBSTACLE)[0]
    w.pos[o] = w.pos[a] + np.array([0.0, 0.0, 25.0])
    cfg = GridSensorConfig(10, 10, 10, 0.1, 20, 10, 0.5, 4)
    assert grid_scan(w, a, cfg).values[0] == 0.0


def test_direction_cells_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    d = rng.normal(size=(500, 3))
    for cfg in (SPATIAL, FRONTAL):
        flat = _direction_cells(d, cfg)
        for v, f in zip(d, flat):
            rc = direction_cell(v, cfg)
            assert f == (-1 if rc is None else rc[0] * cfg.cols + rc[1])


def test_scan_rejects_non_agent():
    w = build_arena(1, 1, {"hiders": 1, "seekers": 1}, 0)
    with pytest.raises(KeyError):
        grid_scan(w, 0, SPATIAL)
    with pytest.raises(KeyError):
        raycast_sweep(w, 0, RaycastConfig())


def test_ray_angles_symmetric_ascending():
    ang = ray_angles(RaycastConfig(rays_per_direction=4, max_ray_degrees=90))
    np.testing.assert_allclose(np.degrees(ang), [-78.75, -56.25, -33.75, -11.25, 11.25, 33.75, 56.25, 78.75])


def test_raycast_hits_wall_ahead():
    w, a = _lonely_agent()
    o = w.ids_of(OBSTACLE)[0]
    w.pos[o] = w.pos[a] + np.array([0.0, 0.0, 4.0])
    cfg = RaycastConfig(rays_per_direction=1, max_ray_degrees=2.0, sphere_radius=0.3, ray_length=20.0)
    out = raycast_sweep(w, a, cfg).reshape(2, -1)
    expected = (4.0 - w.half[o, 2] - 0.3) / math.cos(math.radians(1.0)) / 20.0
    np.testing.assert_allclose(out[:, 0], expected, atol=1e-9)
    assert np.all(out[:, 1 + cfg.tags.index("obstacle")] == 1.0)


def test_proprio_vector():
    w = build_arena(1, 1, {"hiders": 1, "seekers": 1}, 0)
    a = w.agent_ids[0]
    w = step_physics(w, {a: AgentAction((1.0, 0.0, 0.0))})
    v = proprio(w, a, 3072).as_array()
    assert v.shape == (12,)
    assert np.all(v[:3] >= 0) and np.all(v[:3] <= 1)
    assert v[-1] == pytest.approx(1 / 3072)
    with pytest.raises(ValueError):
        proprio(w, a, 0)
