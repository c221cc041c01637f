"""Deterministic parallel rollout collection.

Every environment instance owns its seed stream: episode worlds are built
from ``SeedSequence([seed, instance, episode])`` and action sampling draws
from a per-instance generator whose state travels with the instance. An
instance therefore evolves identically no matter which worker steps it, and
results are merged in instance-id order.
"""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from ..curriculum import prop_count
from ..game import EpisodeStatus, new_status, step_episode
from ..learn.mlp import PolicyParams, actor_forward, critic_forward
from ..learn.ppo import RolloutBuffer, gae, pool_teammates
from ..world import HIDER, MANIPULATE, SEEKER, AgentAction, WorldState, build_arena, build_open_arena
from .observe import observe
from .scripted import scripted_action

TEAM_IDS = {"hiders": 0, "seekers": 1, "single_agent": 2}


@dataclass(frozen=True)
class PolicySource:
    """How one team acts: ``learned`` samples from params, ``greedy`` takes
    the distribution mode, ``scripted`` runs a hand-written policy."""

    mode: str
    params: PolicyParams | None = None
    script: str = "random"

    @staticmethod
    def learned(params: PolicyParams) -> "PolicySource":
        return PolicySource("learned", params)

    @staticmethod
    def greedy(params: PolicyParams) -> "PolicySource":
        return PolicySource("greedy", params)

    @staticmethod
    def scripted(name: str) -> "PolicySource":
        return PolicySource("scripted", None, name)


def episode_seed(seed: int, instance_id: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, instance_id, episode]).generate_state(1)[0])


def team_members(state: WorldState, team: str) -> list[int]:
    if team == "hiders":
        return state.ids_of(HIDER)
    if team == "seekers":
        return state.ids_of(SEEKER)
    return state.agent_ids


@dataclass
class Instance:
    instance_id: int
    seed: int
    rng_state: dict
    episode: int = -1
    level: int = 1
    world: WorldState | None = None
    status: EpisodeStatus | None = None

    @classmethod
    def create(cls, seed: int, instance_id: int) -> "Instance":
        rng = np.random.default_rng(np.random.SeedSequence([seed, instance_id, 0x5EED]))
        return cls(instance_id, seed, rng.bit_generator.state)

    @property
    def needs_reset(self) -> bool:
        return self.status is None or self.status.done


def reset_instance(inst: Instance, cfg, level: int) -> None:
    inst.episode += 1
    inst.level = level if cfg.is_hideseek else 1
    s = episode_seed(inst.seed, inst.instance_id, inst.episode)
    if cfg.is_hideseek:
        counts = {"hiders": cfg.episode.hiders, "seekers": cfg.episode.seekers}
        inst.world = build_arena(inst.level, prop_count(inst.level), counts, s, cfg.arena, cfg.world)
    else:
        inst.world = build_open_arena(cfg.episode.agents, s, cfg.arena, cfg.world)
    inst.status = new_status(inst.world, cfg.episode_config(inst.level))


def to_action(cont: np.ndarray, disc: int) -> AgentAction:
    return AgentAction((float(cont[0]), float(cont[1]), float(cont[2])), float(cont[3]), MANIPULATE[int(disc)])


def summarize(inst: Instance, cfg) -> dict:
    st, w = inst.status, inst.world
    rec = {
        "instance": inst.instance_id,
        "episode": inst.episode,
        "level": inst.level,
        "length": st.decisions,
        "done_reason": st.done_reason,
    }
    for team in cfg.teams:
        ids = team_members(w, team)
        rec[f"reward_{team}"] = float(np.mean([st.cumulative_reward.get(a, 0.0) for a in ids])) if ids else 0.0
    if cfg.is_hideseek:
        hs = st.hidden_decisions
        rec["hidden_fraction"] = (
            float(np.mean([hs[h] / st.decisions for h in hs])) if st.decisions and hs else 0.0
        )
        rec["blocked"] = len(st.blocked)
        rec["tagged"] = int(st.done_reason == "tag")
    return rec


def _team_obs(inst: Instance, cfg, ids) -> np.ndarray:
    oc = cfg.observation_config()
    s_m = cfg.episode.max_env_steps
    return np.stack([observe(inst.world, a, oc, s_m) for a in ids]) if ids else np.zeros((0, oc.size()))


def decide(inst: Instance, cfg, policies: dict, rng: np.random.Generator, learner: str | None = None):
    """Actions for every agent at the current decision, plus the learner
    team's (obs, pool, cont, disc, logp, value) record when ``learner`` is set."""
    actions = {}
    record = None
    for team in cfg.teams:
        ids = team_members(inst.world, team)
        if not ids:
            continue
        src = policies.get(team, PolicySource.scripted("stationary"))
        if src.mode == "scripted":
            for a in ids:
                actions[a] = scripted_action(src.script, inst.world, a, rng)
            continue
        obs = _team_obs(inst, cfg, ids)
        dist, _ = actor_forward(src.params, obs)
        if src.mode == "greedy":
            cont, disc = dist.mode()
        else:
            cont, disc = dist.sample(rng)
        for j, a in enumerate(ids):
            actions[a] = to_action(cont[j], disc[j])
        if team == learner:
            pool = pool_teammates(obs) if team == "seekers" else np.zeros_like(obs)
            value, _ = critic_forward(src.params, obs, pool)
            record = (ids, obs, pool, cont, disc, dist.log_prob(cont, disc), value)
    return actions, record


def advance(inst: Instance, cfg, actions: dict, rewards: dict, ledger: list | None = None) -> int:
    """Hold ``actions`` for one decision interval. Returns ticks stepped."""
    ec = cfg.episode_config(inst.level)
    ticks = 0
    for _ in range(cfg.episode.decision_interval):
        inst.world, inst.status, events = step_episode(inst.world, inst.status, actions, ec)
        ticks += 1
        for ev in events:
            rewards[ev.agent_id] = rewards.get(ev.agent_id, 0.0) + ev.amount
            if ledger is not None:
                ledger.append((inst.instance_id, inst.episode, ev.tick, ev.agent_id, ev.amount, ev.cause))
        if inst.status.done:
            break
    return ticks


def gae_with_dones(rewards, values, dones, bootstrap, gamma, lam):
    """GAE over a stream that may contain episode ends; each episode is an
    independent segment with terminal value 0, the open tail bootstraps."""
    n = len(rewards)
    adv = np.zeros(n)
    ret = np.zeros(n)
    start = 0
    for t in range(n):
        if dones[t] or t == n - 1:
            tail = 0.0 if dones[t] else bootstrap
            a, r = gae(rewards[start:t + 1], np.append(values[start:t + 1], tail), gamma, lam)
            adv[start:t + 1], ret[start:t + 1] = a, r
            start = t + 1
    return adv, ret


@dataclass
class CollectResult:
    rows: dict
    summaries: list = field(default_factory=list)
    ticks: int = 0
    ledger: list = field(default_factory=list)


def collect(inst: Instance, cfg, policies: dict, learner: str, n_decisions: int, level: int,
            record_ledger: bool = False) -> CollectResult:
    """Step one instance for ``n_decisions`` learner decisions, resetting
    finished episodes at ``level``. Returns learner rows with advantages."""
    rng = np.random.default_rng()
    rng.bit_generator.state = inst.rng_state
    hp = cfg.learn
    m = cfg.team_size(learner)
    D = cfg.observation_config().size()
    n = n_decisions * m
    rows = {
        "obs": np.zeros((n, D)), "pool": np.zeros((n, D)), "act_cont": np.zeros((n, 4)),
        "act_disc": np.zeros(n, dtype=np.int64), "log_prob": np.zeros(n), "reward": np.zeros(n),
        "value": np.zeros(n), "done": np.zeros(n, dtype=bool), "agent_id": np.zeros(n, dtype=np.int64),
    }
    out = CollectResult(rows)
    ledger = out.ledger if record_ledger else None
    for d in range(n_decisions):
        if inst.needs_reset:
            reset_instance(inst, cfg, level)
        actions, rec = decide(inst, cfg, policies, rng, learner)
        ids, obs, pool, cont, disc, logp, value = rec
        rewards: dict = {}
        out.ticks += advance(inst, cfg, actions, rewards, ledger)
        sl = slice(d * m, (d + 1) * m)
        rows["obs"][sl], rows["pool"][sl], rows["act_cont"][sl] = obs, pool, cont
        rows["act_disc"][sl], rows["log_prob"][sl], rows["value"][sl] = disc, logp, value
        rows["reward"][sl] = [rewards.get(a, 0.0) for a in ids]
        rows["done"][sl] = inst.status.done
        rows["agent_id"][sl] = ids
        if inst.status.done:
            out.summaries.append(summarize(inst, cfg))
    # bootstrap the open tail with the critic's current estimate
    if inst.needs_reset:
        boot = np.zeros(m)
    else:
        ids = team_members(inst.world, learner)
        obs = _team_obs(inst, cfg, ids)
        pool = pool_teammates(obs) if learner == "seekers" else np.zeros_like(obs)
        boot, _ = critic_forward(policies[learner].params, obs, pool)
    adv = np.zeros(n)
    ret = np.zeros(n)
    for j in range(m):
        idx = np.arange(j, n, m)
        a, r = gae_with_dones(rows["reward"][idx], rows["value"][idx], rows["done"][idx], float(boot[j]),
                              hp.gamma, hp.gae_lambda)
        adv[idx], ret[idx] = a, r
    rows["advantage"], rows["ret"] = adv, ret
    rows["team_id"] = np.full(n, TEAM_IDS[learner], dtype=np.int64)
    rows["instance_id"] = np.full(n, inst.instance_id, dtype=np.int64)
    inst.rng_state = rng.bit_generator.state
    return out


def _collect_block(cfg, block, policies, learner, n_decisions, level, record_ledger):
    results = [collect(inst, cfg, policies, learner, n_decisions, level, record_ledger) for inst in block]
    return block, results


def split_blocks(items: list, workers: int) -> list:
    """Contiguous, near-equal blocks preserving order."""
    k = max(1, min(workers, len(items)))
    size, extra = divmod(len(items), k)
    out, start = [], 0
    for i in range(k):
        end = start + size + (1 if i < extra else 0)
        out.append(items[start:end])
        start = end
    return out


class RolloutEngine:
    """Steps a fixed set of instances, optionally across worker processes."""

    def __init__(self, cfg, workers: int | None = None):
        self.cfg = cfg
        self.instances = [Instance.create(cfg.run.seed, i) for i in range(cfg.parallel.instances)]
        self.workers = max(1, min(workers or cfg.parallel.workers, len(self.instances)))
        self._pool = None
        if self.workers > 1:
            ctx = multiprocessing.get_context("fork")
            self._pool = ProcessPoolExecutor(self.workers, mp_context=ctx)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def collect(self, policies: dict, learner: str, level: int, record_ledger: bool = False):
        """One update's worth of experience: ``batch_size`` learner entries
        from every instance, merged in instance-id order.  With
        ``parallel.asynchronous`` set, worker blocks are merged as they finish,
        which gives up bit-for-bit reproducibility across runs."""
        cfg = self.cfg
        m = cfg.team_size(learner)
        n_decisions = cfg.learn.batch_size // m
        blocks = split_blocks(self.instances, self.workers)
        args = (policies, learner, n_decisions, level, record_ledger)
        if self._pool is None:
            done = [_collect_block(cfg, b, *args) for b in blocks]
        elif cfg.parallel.asynchronous:
            futures = [self._pool.submit(_collect_block, cfg, b, *args) for b in blocks]
            done = [f.result() for f in as_completed(futures)]
        else:
            futures = [self._pool.submit(_collect_block, cfg, b, *args) for b in blocks]
            done = [f.result() for f in futures]
        self.instances = sorted((inst for block, _ in done for inst in block), key=lambda i: i.instance_id)
        results = [r for _, rs in done for r in rs]
        buf = RolloutBuffer(cfg.buffer_capacity, cfg.observation_config().size())
        for r in results:
            buf.extend(r.rows)
        merged = CollectResult({}, [s for r in results for s in r.summaries], sum(r.ticks for r in results),
                               [e for r in results for e in r.ledger])
        return buf, merged


def run_rollouts(cfg, policies: dict, learner: str, level: int = 1, updates: int = 1, workers: int | None = None):
    """Collect ``updates`` consecutive buffers with fixed policies."""
    out = []
    with RolloutEngine(cfg, workers) as eng:
        for _ in range(updates):
            out.append(eng.collect(policies, learner, level))
    return out
