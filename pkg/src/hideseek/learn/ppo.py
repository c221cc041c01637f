"""Rollout storage, advantage estimation and clipped policy-gradient updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mlp import PolicyParams, actor_backward, actor_forward, critic_backward, critic_forward

INT64_MAX = 2**63 - 1


def buffer_size(b: int, env_count: int, instance_count: int) -> int:
    """Experience per update, b * E_n * P_n. Raises on int64 overflow."""
    for name, v in (("b", b), ("env_count", env_count), ("instance_count", instance_count)):
        if int(v) != v or v <= 0:
            raise ValueError(f"{name} must be a positive integer")
    out = int(b) * int(env_count) * int(instance_count)
    if out > INT64_MAX:
        raise OverflowError("buffer size overflows a 64-bit count")
    return out


@dataclass(frozen=True)
class HyperParams:
    batch_size: int = 3072
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    learning_rate: float = 3e-4
    epochs_per_update: int = 3
    entropy_coefficient: float = 0.005
    value_coefficient: float = 0.5
    max_grad_norm: float = 0.5  # 0 disables clipping
    optimizer: str = "sgd"  # sgd | adam
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 <= self.gae_lambda <= 1:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be positive")
        if self.batch_size < 1 or self.epochs_per_update < 1:
            raise ValueError("batch_size and epochs_per_update must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def gae(rewards, values, gamma: float, lam: float):
    """Generalized advantage estimates and value targets.

    ``values`` has one more entry than ``rewards``; its last entry is the
    bootstrap value (0 if the episode ended).
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (r.shape[0] + 1,):
        raise ValueError("values must have exactly one more entry than rewards")
    adv = np.zeros_like(r)
    running = 0.0
    for t in range(r.shape[0] - 1, -1, -1):
        delta = r[t] + gamma * v[t + 1] - v[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv, adv + v[:-1]


class RolloutBuffer:
    """Fixed-capacity experience store; one row per agent decision."""

    FIELDS = ("log_prob", "reward", "value", "done", "team_id", "instance_id", "agent_id",
              "entry_id", "advantage", "ret", "act_disc")

    def __init__(self, capacity: int, obs_dim: int, continuous_dim: int = 4):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim))
        self.pool = np.zeros((capacity, obs_dim))
        self.act_cont = np.zeros((capacity, continuous_dim))
        self.act_disc = np.zeros(capacity, dtype=np.int64)
        self.log_prob = np.zeros(capacity)
        self.reward = np.zeros(capacity)
        self.value = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.team_id = np.zeros(capacity, dtype=np.int64)
        self.instance_id = np.zeros(capacity, dtype=np.int64)
        self.agent_id = np.zeros(capacity, dtype=np.int64)
        self.entry_id = np.zeros(capacity, dtype=np.int64)
        self.advantage = np.zeros(capacity)
        self.ret = np.zeros(capacity)
        self.size = 0

    def __len__(self) -> int:
        return self.size

    @property
    def full(self) -> bool:
        return self.size == self.capacity

    def add(self, obs, act_cont, act_disc, log_prob, reward, value, done, team_id=0,
            instance_id=0, agent_id=0, pool=None, advantage=0.0, ret=0.0, entry_id=None) -> int:
        if self.size >= self.capacity:
            raise OverflowError(f"rollout buffer capacity {self.capacity} exceeded")
        i = self.size
        self.obs[i] = obs
        if pool is not None:
            self.pool[i] = pool
        self.act_cont[i] = act_cont
        self.act_disc[i] = act_disc
        self.log_prob[i] = log_prob
        self.reward[i] = reward
        self.value[i] = value
        self.done[i] = done
        self.team_id[i] = team_id
        self.instance_id[i] = instance_id
        self.agent_id[i] = agent_id
        self.entry_id[i] = i if entry_id is None else entry_id
        self.advantage[i] = advantage
        self.ret[i] = ret
        self.size += 1
        return i

    def extend(self, rows: dict) -> None:
        """Append a block of rows given as a dict of equal-length arrays."""
        n = len(rows["reward"])
        if self.size + n > self.capacity:
            raise OverflowError(f"rollout buffer capacity {self.capacity} exceeded")
        sl = slice(self.size, self.size + n)
        for name in ("obs", "pool", "act_cont") + self.FIELDS:
            if name in rows:
                getattr(self, name)[sl] = rows[name]
        if "entry_id" not in rows:
            self.entry_id[sl] = np.arange(self.size, self.size + n)
        self.size += n

    def clear(self) -> None:
        self.size = 0

    def checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name in ("obs", "pool", "act_cont", "act_disc", "log_prob", "reward", "value", "done",
                     "team_id", "instance_id", "agent_id", "entry_id", "advantage", "ret"):
            h.update(np.ascontiguousarray(getattr(self, name)[: self.size]).tobytes())
        return h.hexdigest()


# --- optimizers -----------------------------------------------------------


def apply_gradient(params: PolicyParams, grad: np.ndarray, hp: HyperParams) -> None:
    """One descent step on the loss, in place."""
    if hp.optimizer == "sgd":
        params.flat -= hp.learning_rate * grad
        return
    st = params.opt_state
    if "m" not in st:
        st["m"] = np.zeros_like(params.flat)
        st["v"] = np.zeros_like(params.flat)
        st["t"] = 0
    st["t"] += 1
    st["m"] = hp.adam_beta1 * st["m"] + (1.0 - hp.adam_beta1) * grad
    st["v"] = hp.adam_beta2 * st["v"] + (1.0 - hp.adam_beta2) * grad * grad
    m_hat = st["m"] / (1.0 - hp.adam_beta1 ** st["t"])
    v_hat = st["v"] / (1.0 - hp.adam_beta2 ** st["t"])
    params.flat -= hp.learning_rate * m_hat / (np.sqrt(v_hat) + hp.adam_eps)


# --- clipped update -------------------------------------------------------


def clipped_objective(ratio, advantage, eps):
    """Per-sample PPO surrogate min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantage)


def loss_and_grad(params: PolicyParams, batch: dict, hp: HyperParams):
    """Loss = -surrogate + c_v*(V - R)^2 - c_e*entropy, averaged over the
    batch, and its gradient with respect to the flat parameters."""
    n = batch["obs"].shape[0]
    dist, a_acts = actor_forward(params, batch["obs"])
    value, c_acts = critic_forward(params, batch["obs"], batch["pool"])
    cont, disc = batch["act_cont"], batch["act_disc"]
    logp = dist.log_prob(cont, disc)
    ratio = np.exp(logp - batch["log_prob"])
    adv = batch["advantage"]
    eps = hp.clip_epsilon
    surrogate = clipped_objective(ratio, adv, eps)
    clipped = ((adv > 0) & (ratio > 1.0 + eps)) | ((adv < 0) & (ratio < 1.0 - eps))
    entropy = dist.entropy()
    v_err = value - batch["ret"]
    loss = -surrogate.mean() + hp.value_coefficient * np.mean(v_err ** 2) - hp.entropy_coefficient * entropy.mean()

    # d loss / d log_prob per sample
    d_logp = np.where(clipped, 0.0, -ratio * adv) / n
    std = np.exp(dist.log_std)
    z = (cont - dist.mean) / std
    d_mean = d_logp[:, None] * z / std
    d_log_std = (d_logp[:, None] * (z * z - 1.0)).sum(axis=0)
    probs = dist.probs
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), disc] = 1.0
    d_logits = d_logp[:, None] * (onehot - probs)
    # entropy bonus
    c_e = hp.entropy_coefficient
    d_log_std -= c_e * np.ones_like(dist.log_std)
    log_p = dist.log_softmax()
    h_d = -np.sum(probs * log_p, axis=1)
    d_logits -= (c_e / n) * (-probs * (log_p + h_d[:, None]))
    grad = np.zeros_like(params.flat)
    actor_backward(params, dist, a_acts, d_mean, d_log_std, d_logits, grad)
    critic_backward(params, c_acts, (2.0 * hp.value_coefficient / n) * v_err, grad)
    stats = {
        "loss": float(loss),
        "policy_loss": float(-surrogate.mean()),
        "value_loss": float(np.mean(v_err ** 2)),
        "entropy": float(entropy.mean()),
        "mean_ratio": float(ratio.mean()),
        "clip_fraction": float(clipped.mean()),
        "approx_kl": float(np.mean(batch["log_prob"] - logp)),
    }
    return loss, grad, stats


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    std = adv.std()
    return (adv - adv.mean()) / (std + 1e-8)


def _update(buffer: RolloutBuffer, params: PolicyParams, hp: HyperParams, use_pool: bool,
            minibatch_size: int | None = None):
    if buffer.size == 0:
        raise ValueError("cannot update from an empty buffer")
    n = buffer.size
    data = {
        "obs": buffer.obs[:n].copy(),
        "pool": buffer.pool[:n].copy() if use_pool else np.zeros_like(buffer.obs[:n]),
        "act_cont": buffer.act_cont[:n].copy(),
        "act_disc": buffer.act_disc[:n].copy(),
        "log_prob": buffer.log_prob[:n].copy(),
        "advantage": normalize_advantages(buffer.advantage[:n]),
        "ret": buffer.ret[:n].copy(),
    }
    out = params.copy()
    rng = np.random.default_rng([hp.seed, params.version])
    mb = min(n, minibatch_size or hp.batch_size)
    totals: dict = {}
    count = 0
    grad_norms = []
    for _ in range(hp.epochs_per_update):
        order = rng.permutation(n)
        for start in range(0, n, mb):
            idx = order[start:start + mb]
            batch = {k: v[idx] for k, v in data.items()}
            _, grad, stats = loss_and_grad(out, batch, hp)
            gnorm = float(np.sqrt(np.dot(grad, grad)))
            grad_norms.append(gnorm)
            if hp.max_grad_norm > 0 and gnorm > hp.max_grad_norm:
                grad = grad * (hp.max_grad_norm / gnorm)
            apply_gradient(out, grad, hp)
            if not out.is_finite():
                raise FloatingPointError("update produced a non-finite parameter")
            for k, v in stats.items():
                totals[k] = totals.get(k, 0.0) + v
            count += 1
    out.version = params.version + 1
    summary = {k: v / count for k, v in totals.items()}
    summary["grad_norm"] = float(np.mean(grad_norms))
    summary["minibatches"] = count
    buffer.clear()
    return out, summary


def ppo_update(buffer: RolloutBuffer, params: PolicyParams, hp: HyperParams, minibatch_size: int | None = None):
    """Clipped-surrogate update; the critic sees no teammate information."""
    return _update(buffer, params, hp, use_pool=False, minibatch_size=minibatch_size)


def poca_update(team_buffer: RolloutBuffer, params: PolicyParams, hp: HyperParams,
                minibatch_size: int | None = None):
    """Shared-policy team update with a centralized critic whose input
    includes the mean-pooled observations of the acting agent's teammates."""
    n = team_buffer.size
    if n and np.any(team_buffer.team_id[:n] != team_buffer.team_id[0]):
        raise ValueError("poca_update needs entries from a single team")
    return _update(team_buffer, params, hp, use_pool=True, minibatch_size=minibatch_size)


def pool_teammates(obs_by_agent: np.ndarray) -> np.ndarray:
    """Row i: mean of every other row, summed in a canonical order so the
    result does not depend on how teammates are listed. Zeros for a team of 1."""
    obs = np.asarray(obs_by_agent, dtype=np.float64)
    m = obs.shape[0]
    out = np.zeros_like(obs)
    if m < 2:
        return out
    for i in range(m):
        others = np.delete(obs, i, axis=0)
        keys = [tuple(r) for r in others]
        order = sorted(range(m - 1), key=lambda j: keys[j])
        acc = np.zeros(obs.shape[1])
        for j in order:
            acc = acc + others[j]
        out[i] = acc / (m - 1)
    return out
