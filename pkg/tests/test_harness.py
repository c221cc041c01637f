import dataclasses
import math

import numpy as np
import pytest

from conftest import small_config
from hideseek.config import TrainPhase
from hideseek.harness import (
    PolicySource, evaluate, evaluate_checkpoints, export_replay, read_csv, read_replay, run_rollouts, smooth, train,
)
from hideseek.harness.metrics import METRICS_COLUMNS, column
from hideseek.harness.observe import RELATIVE_SIZE, relative_features
from hideseek.harness.rollout import gae_with_dones, split_blocks
from hideseek.harness.train import initial_params
from hideseek.learn import buffer_size, load_checkpoint
from hideseek.world import HIDER, PROP, SEEKER, build_arena


def test_smooth_examples():
    assert smooth([1.0, 2.0, 3.0], 0.5) == [1.0, 1.5, 2.25]
    assert smooth([4.0, 0.0], 0.0) == [4.0, 0.0]
    out = smooth([math.nan, 2.0, math.nan, 4.0], 0.5)
    assert math.isnan(out[0]) and out[1:] == [2.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        smooth([1.0], 1.0)


def test_split_blocks_contiguous():
    assert split_blocks(list(range(5)), 2) == [[0, 1, 2], [3, 4]]
    assert split_blocks([1], 4) == [[1]]


def test_gae_with_dones_cuts_at_episode_end():
    adv, ret = gae_with_dones(np.array([1.0, 1.0]), np.array([0.0, 0.0]), np.array([True, False]), 10.0, 0.5, 1.0)
    np.testing.assert_allclose(adv, [1.0, 1.0 + 0.5 * 10.0])


def test_rollout_buffer_size_and_worker_invariance(tiny_cfg):
    one = run_rollouts(tiny_cfg, _policies(tiny_cfg), "hiders", updates=2, workers=1)
    two = run_rollouts(tiny_cfg, _policies(tiny_cfg), "hiders", updates=2, workers=2)
    expected = buffer_size(tiny_cfg.learn.batch_size, tiny_cfg.parallel.env_count,
                           tiny_cfg.parallel.instances_per_env)
    for (b1, r1), (b2, r2) in zip(one, two):
        assert len(b1) == expected == len(b2)
        assert b1.checksum() == b2.checksum()
        assert r1.ticks == r2.ticks and r1.summaries == r2.summaries


def _policies(cfg, seekers="random"):
    p = initial_params(cfg)
    return {"hiders": PolicySource.learned(p["hiders"]), "seekers": PolicySource.scripted(seekers)}


def test_evaluate_zero_episodes(tiny_cfg):
    out = evaluate(tiny_cfg, _policies(tiny_cfg), 0, 1)
    assert out["episodes"] == 0 and out["seed"] == 1
    with pytest.raises(ValueError):
        evaluate(tiny_cfg, _policies(tiny_cfg), -1, 1)


def test_random_seekers_tag_stationary_hiders():
    cfg = small_config(steps=900, seekers=3)
    pol = {"hiders": PolicySource.scripted("stationary"), "seekers": PolicySource.scripted("pursuit")}
    assert evaluate(cfg, pol, 5, 0, level=1)["tag_rate"] > 0
    pol["seekers"] = PolicySource.scripted("random")
    out = evaluate(cfg, pol, 30, 0, level=1)
    assert out["tag_rate"] > 0 and out["episodes"] == 30


def _seal_room(world):
    h = world.ids_of(HIDER)
    for op, p in zip(world.openings, world.ids_of(PROP)):
        world.pos[p] = op.slot_center
        world.locked[p] = True
    world.pos[h] = [(0.5 * i, 0.6, 0.0) for i in range(len(h))]
    return world


def test_hidden_fraction_is_one_behind_locked_props():
    cfg = small_config(steps=300, seekers=3)
    pol = {"hiders": PolicySource.scripted("stationary"), "seekers": PolicySource.scripted("random")}
    for level in (1, 4):
        out = evaluate(cfg, pol, 5, 2, level=level, setup=_seal_room)
        assert out["hidden_fraction"] == 1.0 and out["tag_rate"] == 0.0
        assert out["blocked_rate"] == 1.0


def test_relative_features():
    cfg = small_config()
    w = build_arena(1, 1, {"hiders": 1, "seekers": 1}, 0)
    h, s = w.ids_of(HIDER)[0], w.ids_of(SEEKER)[0]
    w.pos[h], w.pos[s] = (-7.0, 0.6, 2.0), (-7.0, 0.6, 7.0)
    w.yaw[h], w.yaw[s] = 0.0, math.pi
    f = relative_features(w, h)
    assert f.shape == (RELATIVE_SIZE,)
    np.testing.assert_allclose(f[:3], [0.0, 0.0, 1.0], atol=1e-12)
    assert f[3] == pytest.approx(5.0 / float(np.max(w.bounds_hi - w.bounds_lo)))
    assert f[4] == 1.0
    w.yaw[s] = 0.0
    assert relative_features(w, h)[4] == 0.0
    assert cfg.observation_config().size() > RELATIVE_SIZE


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    phases = (TrainPhase("hiders", "scripted_random", 1200), TrainPhase("seekers", "frozen_checkpoint", 1200))
    cfg = small_config(steps=300, phases=phases)
    run = tmp_path_factory.mktemp("run")
    return cfg, train(cfg, run)


def test_train_outputs(trained):
    cfg, res = trained
    rows = read_csv(res.metrics_path)
    assert list(rows[0]) == list(METRICS_COLUMNS)
    assert {r["team"] for r in rows} == {"hiders", "seekers"}
    learning = column(rows, "learning", team="hiders")
    assert learning[0] == 1 and learning[-1] == 0  # hiders freeze in the seeker phase
    for team in ("hiders", "seekers"):
        params, step, meta, _ = load_checkpoint(res.checkpoints[team])
        assert meta["team"] == team and step == res.global_step
        assert meta["scenario"] == cfg.run.scenario
    assert res.global_step >= cfg.run.total_env_steps
    phase0 = load_checkpoint(res.run_dir / "checkpoints" / "hiders_phase0.ckpt")[0]
    final = load_checkpoint(res.checkpoints["hiders"])[0]
    assert np.array_equal(phase0.flat, final.flat)  # frozen while seekers learn


def test_eval_and_replay_from_run(trained, tmp_path):
    cfg, res = trained
    out = evaluate_checkpoints([str(res.checkpoints["hiders"]), str(res.checkpoints["seekers"])], 2, 3)
    assert out["episodes"] == 2
    with pytest.raises(ValueError):
        evaluate_checkpoints([str(res.checkpoints["hiders"])], 1, 3)
    path = tmp_path / "ep.jsonl"
    info = export_replay(str(res.run_dir), 1, str(path), every=10)
    header, ticks = read_replay(str(path))
    assert header["episode"] == 1
    assert len(ticks) == info["records"]
    assert ticks[0]["tick"] == 0 and ticks[-1]["tick"] == info["ticks"]
    # sparse frames keep every tick that carries a reward event
    assert all(t["tick"] % 10 == 0 or t["events"] or t is ticks[-1] for t in ticks)
    assert ticks[0]["bodies"]


def test_asynchronous_merge_keeps_buffer_contents(tiny_cfg):
    cfg = dataclasses.replace(tiny_cfg, parallel=dataclasses.replace(tiny_cfg.parallel, asynchronous=True))
    sync = run_rollouts(tiny_cfg, _policies(tiny_cfg), "hiders", updates=1, workers=2)
    free = run_rollouts(cfg, _policies(cfg), "hiders", updates=1, workers=2)
    (b1, r1), (b2, r2) = sync[0], free[0]
    assert len(b1) == len(b2)
    # same experience, merge order may differ
    assert sorted(map(repr, r1.summaries)) == sorted(map(repr, r2.summaries))
