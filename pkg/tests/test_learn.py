import math

import numpy as np
import pytest

from oracles import lambda_return_oracle
from hideseek.learn import (
    HyperParams, MlpSpec, RolloutBuffer, buffer_size, gae, gradient_check, init_params, load_checkpoint,
    mlp_forward, poca_update, pool_teammates, ppo_update, save_checkpoint, spec_hash,
)
from hideseek.learn.checkpoint import CheckpointError
from hideseek.learn.ppo import apply_gradient, clipped_objective, loss_and_grad

SPEC = MlpSpec(input_dim=5, hidden_units=8)


def test_buffer_size_values_and_errors():
    assert buffer_size(3072, 8, 3) == 73728
    assert buffer_size(64000, 5, 1) == 320000
    with pytest.raises(ValueError):
        buffer_size(0, 1, 1)
    with pytest.raises(ValueError):
        buffer_size(2.5, 1, 1)
    with pytest.raises(OverflowError):
        buffer_size(2**40, 2**20, 2**10)


def test_gae_limits():
    rng = np.random.default_rng(0)
    r, v = rng.normal(size=6), rng.normal(size=7)
    adv, ret = gae(r, v, 0.9, 0.0)
    np.testing.assert_allclose(adv, r + 0.9 * v[1:] - v[:-1])
    np.testing.assert_allclose(ret, adv + v[:-1])
    adv, _ = gae(r, v, 1.0, 1.0)
    mc = np.array([r[t:].sum() + v[-1] for t in range(6)])
    np.testing.assert_allclose(adv, mc - v[:-1])
    np.testing.assert_allclose(gae(r, v, 0.95, 0.7)[0], lambda_return_oracle(r, v, 0.95, 0.7), atol=1e-12)
    with pytest.raises(ValueError):
        gae(r, v[:-1], 0.9, 0.9)


def test_fresh_policy_is_neutral():
    p = init_params(SPEC, 0)
    dist, value = mlp_forward(p, np.ones(5))
    assert np.all(dist.mean == 0) and np.all(value == 0)
    np.testing.assert_allclose(dist.probs, 1 / 3)
    with pytest.raises(ValueError):
        mlp_forward(p, np.ones(4))


def test_log_prob_matches_closed_form():
    rng = np.random.default_rng(1)
    p = init_params(SPEC, 0)
    p.flat += 0.2 * rng.normal(size=p.flat.size)
    dist, _ = mlp_forward(p, rng.normal(size=(3, 5)))
    cont, disc = dist.sample(rng)
    std = np.exp(dist.log_std)
    gauss = np.sum(-0.5 * ((cont - dist.mean) / std) ** 2 - np.log(std * math.sqrt(2 * math.pi)), axis=1)
    cat = np.log(dist.probs[np.arange(3), disc])
    np.testing.assert_allclose(dist.log_prob(cont, disc), gauss + cat, atol=1e-12)


def test_gradient_check_wide_network_subset():
    rng = np.random.default_rng(2)
    p = init_params(MlpSpec(input_dim=6, hidden_units=16), 0)
    p.flat += 0.1 * rng.normal(size=p.flat.size)
    assert gradient_check(p, rng.normal(size=(3, 6)), max_params=200) < 1e-4
    with pytest.raises(ValueError):
        gradient_check(p, np.zeros(6), epsilon=1e-2)


def _batch(rng, n=12):
    p = init_params(SPEC, 4)
    p.flat += 0.1 * rng.normal(size=p.flat.size)
    obs = rng.normal(size=(n, 5))
    dist, _ = mlp_forward(p, obs)
    cont, disc = dist.sample(rng)
    return p, {
        "obs": obs, "pool": rng.normal(size=(n, 5)), "act_cont": cont, "act_disc": disc,
        # behaviour log-probs slightly off so the ratio is not identically 1
        "log_prob": dist.log_prob(cont, disc) + 0.05 * rng.normal(size=n),
        "advantage": rng.normal(size=n), "ret": rng.normal(size=n),
    }


def test_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    p, batch = _batch(rng)
    hp = HyperParams(clip_epsilon=0.5, entropy_coefficient=0.01)
    _, grad, _ = loss_and_grad(p, batch, hp)
    work = p.copy()
    eps = 1e-6
    for i in np.linspace(0, p.flat.size - 1, 120).astype(int):
        work.flat[i] = p.flat[i] + eps
        up = loss_and_grad(work, batch, hp)[0]
        work.flat[i] = p.flat[i] - eps
        down = loss_and_grad(work, batch, hp)[0]
        work.flat[i] = p.flat[i]
        num = (up - down) / (2 * eps)
        assert abs(num - grad[i]) <= 1e-6 + 1e-4 * abs(num)


def test_clipped_objective():
    np.testing.assert_allclose(clipped_objective([1.5, 0.5, 1.5], [1.0, 1.0, -1.0], 0.2), [1.2, 0.5, -1.5])


def test_adam_and_sgd_steps():
    p = init_params(SPEC, 0)
    g = np.ones_like(p.flat)
    q = p.copy()
    apply_gradient(q, g, HyperParams(learning_rate=0.1))
    np.testing.assert_allclose(q.flat, p.flat - 0.1)
    q = p.copy()
    apply_gradient(q, g, HyperParams(learning_rate=0.1, optimizer="adam"))
    np.testing.assert_allclose(q.flat, p.flat - 0.1, rtol=1e-6)
    assert q.opt_state["t"] == 1


def _filled_buffer(rng, n=40, teams=None):
    p, b = _batch(rng, n)
    buf = RolloutBuffer(n, 5)
    b["team_id"] = np.zeros(n, dtype=np.int64) if teams is None else teams
    b["reward"] = np.zeros(n)
    buf.extend(b)
    return p, buf


def test_ppo_update_is_deterministic_and_clears_buffer():
    hp = HyperParams(batch_size=16, seed=3)
    p, buf = _filled_buffer(np.random.default_rng(5))
    q, buf2 = _filled_buffer(np.random.default_rng(5))
    a, sa = ppo_update(buf, p, hp)
    b, sb = ppo_update(buf2, q, hp)
    assert np.array_equal(a.flat, b.flat) and sa == sb
    assert len(buf) == 0 and a.version == p.version + 1
    assert not np.array_equal(a.flat, p.flat)
    assert sa["minibatches"] == 3 * 3
    with pytest.raises(ValueError):
        ppo_update(buf, p, hp)


def test_poca_uses_pool_and_rejects_mixed_teams():
    hp = HyperParams(batch_size=40, seed=3)
    p, buf = _filled_buffer(np.random.default_rng(6))
    q, buf2 = _filled_buffer(np.random.default_rng(6))
    a, _ = ppo_update(buf, p, hp)
    b, _ = poca_update(buf2, q, hp)
    assert not np.array_equal(a.flat, b.flat)  # teammate pool reaches the critic
    _, mixed = _filled_buffer(np.random.default_rng(6), teams=np.arange(40) % 2)
    with pytest.raises(ValueError):
        poca_update(mixed, p, hp)


def test_buffer_overflow():
    buf = RolloutBuffer(1, 2)
    buf.add(np.zeros(2), np.zeros(4), 0, 0.0, 0.0, 0.0, False)
    assert buf.full
    with pytest.raises(OverflowError):
        buf.add(np.zeros(2), np.zeros(4), 0, 0.0, 0.0, 0.0, False)


def test_pool_teammates_is_order_invariant():
    rng = np.random.default_rng(7)
    obs = rng.normal(size=(4, 3))
    perm = [2, 0, 3, 1]
    np.testing.assert_array_equal(pool_teammates(obs)[perm], pool_teammates(obs[perm]))
    np.testing.assert_allclose(pool_teammates(obs)[0], obs[1:].mean(axis=0))
    assert np.all(pool_teammates(obs[:1]) == 0)


def test_checkpoint_round_trip(tmp_path):
    p = init_params(SPEC, 1)
    apply_gradient(p, np.ones_like(p.flat), HyperParams(optimizer="adam"))
    p.version = 7
    path = tmp_path / "a.ckpt"
    save_checkpoint(path, p, 1234, {"team": "hiders"}, obs_layout="L")
    q, step, meta, digest = load_checkpoint(path, spec_hash(SPEC, "L"))
    assert step == 1234 and meta["team"] == "hiders" and q.version == 7
    assert np.array_equal(q.flat, p.flat) and q.opt_state["t"] == 1
    assert np.array_equal(q.opt_state["m"], p.opt_state["m"])
    with pytest.raises(CheckpointError):
        load_checkpoint(path, spec_hash(SPEC, "other"))
    path.write_bytes(path.read_bytes()[:50])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    bad = tmp_path / "b.ckpt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
