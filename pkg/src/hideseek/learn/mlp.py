"""Actor-critic MLP in plain numpy with hand-written backpropagation.

The actor is a tanh trunk feeding three heads: a tanh-squashed mean for the
4 continuous controls, a state-independent log standard deviation, and logits
over the 3 manipulate options. The critic is a separate tanh trunk whose
input is the agent's observation concatenated with a pooled teammate
observation (zeros when there are no teammates).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_layers: int = 2
    hidden_units: int = 256
    continuous_dim: int = 4
    discrete_options: int = 3
    init_log_std: float = -0.5

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError("hidden_layers must be >= 1")
        for name in ("input_dim", "hidden_units", "continuous_dim", "discrete_options"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def critic_input_dim(self) -> int:
        return 2 * self.input_dim

    def layout(self) -> list[tuple[str, tuple]]:
        """Ordered (name, shape) entries of the flat parameter vector."""
        h = self.hidden_units
        out = []
        for prefix, d_in in (("actor", self.input_dim), ("critic", self.critic_input_dim)):
            prev = d_in
            for i in range(self.hidden_layers):
                out.append((f"{prefix}.W{i}", (prev, h)))
                out.append((f"{prefix}.b{i}", (h,)))
                prev = h
        out += [
            ("mean.W", (h, self.continuous_dim)),
            ("mean.b", (self.continuous_dim,)),
            ("log_std", (self.continuous_dim,)),
            ("logits.W", (h, self.discrete_options)),
            ("logits.b", (self.discrete_options,)),
            ("value.W", (h, 1)),
            ("value.b", (1,)),
        ]
        return out

    def size(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.layout())

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


def _slices(spec: MlpSpec) -> dict:
    out, off = {}, 0
    for name, shape in spec.layout():
        n = int(np.prod(shape))
        out[name] = (off, off + n, shape)
        off += n
    return out


@dataclass
class PolicyParams:
    spec: MlpSpec
    flat: np.ndarray
    version: int = 0
    opt_state: dict = field(default_factory=dict)

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64)
        if self.flat.shape != (self.spec.size(),):
            raise ValueError(f"parameter vector has {self.flat.size} entries, layout needs {self.spec.size()}")
        self._slices = _slices(self.spec)

    def view(self, name: str, vec: np.ndarray | None = None) -> np.ndarray:
        a, b, shape = self._slices[name]
        return (self.flat if vec is None else vec)[a:b].reshape(shape)

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            self.spec, self.flat.copy(), self.version,
            {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.opt_state.items()},
        )

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat)))


def init_params(spec: MlpSpec, seed: int) -> PolicyParams:
    """Scaled-normal hidden weights, zero biases and zero output layers, so
    a fresh policy has mean 0, uniform logits and value 0."""
    rng = np.random.default_rng(seed)
    p = PolicyParams(spec, np.zeros(spec.size()))
    for name, shape in spec.layout():
        if ".W" in name and name.split(".")[0] in ("actor", "critic"):
            p.view(name)[...] = rng.standard_normal(shape) / math.sqrt(shape[0])
    p.view("log_std")[...] = spec.init_log_std
    return p


# --- distribution ---------------------------------------------------------


@dataclass
class ActionDistribution:
    """Diagonal Gaussian over controls and a categorical over manipulate,
    batched along the leading axis."""

    mean: np.ndarray  # (n, c)
    log_std: np.ndarray  # (c,)
    logits: np.ndarray  # (n, k)

    @property
    def probs(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)

    def log_softmax(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=-1, keepdims=True)
        return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def sample(self, rng: np.random.Generator):
        std = np.exp(self.log_std)
        cont = self.mean + std * rng.standard_normal(self.mean.shape)
        u = rng.random(self.mean.shape[0])
        cdf = np.cumsum(self.probs, axis=-1)
        disc = np.minimum((u[:, None] >= cdf).sum(axis=-1), self.logits.shape[-1] - 1)
        return cont, disc

    def mode(self):
        return self.mean.copy(), np.argmax(self.logits, axis=-1)

    def log_prob(self, cont, disc) -> np.ndarray:
        z = (cont - self.mean) / np.exp(self.log_std)
        lp_c = np.sum(-0.5 * z * z - self.log_std - 0.5 * LOG_2PI, axis=-1)
        lp_d = np.take_along_axis(self.log_softmax(), np.asarray(disc)[:, None], axis=-1)[:, 0]
        return lp_c + lp_d

    def entropy(self) -> np.ndarray:
        h_c = np.sum(0.5 + 0.5 * LOG_2PI + self.log_std)
        p = self.probs
        h_d = -np.sum(p * self.log_softmax(), axis=-1)
        return h_c + h_d


# --- forward / backward ---------------------------------------------------


def _trunk(params: PolicyParams, prefix: str, x: np.ndarray):
    acts = [x]
    h = x
    for i in range(params.spec.hidden_layers):
        h = np.tanh(h @ params.view(f"{prefix}.W{i}") + params.view(f"{prefix}.b{i}"))
        acts.append(h)
    return acts


def _as_batch(params: PolicyParams, obs) -> np.ndarray:
    x = np.asarray(obs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise ValueError(f"observation dim {x.shape[-1]} does not match spec input_dim {params.spec.input_dim}")
    return x


def actor_forward(params: PolicyParams, obs):
    x = _as_batch(params, obs)
    acts = _trunk(params, "actor", x)
    h = acts[-1]
    mean = np.tanh(h @ params.view("mean.W") + params.view("mean.b"))
    logits = h @ params.view("logits.W") + params.view("logits.b")
    dist = ActionDistribution(mean, params.view("log_std").copy(), logits)
    return dist, acts


def critic_forward(params: PolicyParams, obs, pool=None):
    x = _as_batch(params, obs)
    pool = np.zeros_like(x) if pool is None else np.asarray(pool, dtype=np.float64).reshape(x.shape)
    acts = _trunk(params, "critic", np.concatenate([x, pool], axis=1))
    value = (acts[-1] @ params.view("value.W") + params.view("value.b"))[:, 0]
    return value, acts


def mlp_forward(params: PolicyParams, observation, pool=None):
    """Returns ``(ActionDistribution, value)``; a single observation vector
    gives batch size 1."""
    dist, _ = actor_forward(params, observation)
    value, _ = critic_forward(params, observation, pool)
    return dist, value


def _trunk_backward(params, prefix, acts, d_h, grad):
    for i in reversed(range(params.spec.hidden_layers)):
        d_z = d_h * (1.0 - acts[i + 1] ** 2)
        params.view(f"{prefix}.W{i}", grad)[...] += acts[i].T @ d_z
        params.view(f"{prefix}.b{i}", grad)[...] += d_z.sum(axis=0)
        if i:
            d_h = d_z @ params.view(f"{prefix}.W{i}").T


def actor_backward(params, dist, acts, d_mean, d_log_std, d_logits, grad):
    """Accumulate into ``grad`` the parameter gradient given output grads."""
    h = acts[-1]
    d_zm = d_mean * (1.0 - dist.mean ** 2)
    params.view("mean.W", grad)[...] += h.T @ d_zm
    params.view("mean.b", grad)[...] += d_zm.sum(axis=0)
    params.view("log_std", grad)[...] += d_log_std
    params.view("logits.W", grad)[...] += h.T @ d_logits
    params.view("logits.b", grad)[...] += d_logits.sum(axis=0)
    d_h = d_zm @ params.view("mean.W").T + d_logits @ params.view("logits.W").T
    _trunk_backward(params, "actor", acts, d_h, grad)


def critic_backward(params, acts, d_value, grad):
    h = acts[-1]
    params.view("value.W", grad)[...] += h.T @ d_value[:, None]
    params.view("value.b", grad)[...] += d_value.sum()
    d_h = d_value[:, None] @ params.view("value.W").T
    _trunk_backward(params, "critic", acts, d_h, grad)


def _probe_weights(spec: MlpSpec):
    wm = np.linspace(0.5, 1.5, spec.continuous_dim)
    wl = np.linspace(-1.0, 1.0, spec.discrete_options)
    return wm, wl


def probe_scalar(params: PolicyParams, observation) -> float:
    """Fixed linear combination of every head, used for gradient checks."""
    wm, wl = _probe_weights(params.spec)
    dist, value = mlp_forward(params, observation)
    return float(np.sum(dist.mean * wm) + np.sum(dist.logits * wl) + np.sum(dist.log_std) + np.sum(value))


def probe_gradient(params: PolicyParams, observation) -> np.ndarray:
    wm, wl = _probe_weights(params.spec)
    dist, a_acts = actor_forward(params, observation)
    value, c_acts = critic_forward(params, observation)
    n = dist.mean.shape[0]
    grad = np.zeros_like(params.flat)
    actor_backward(params, dist, a_acts, np.tile(wm, (n, 1)), np.ones(params.spec.continuous_dim),
                   np.tile(wl, (n, 1)), grad)
    critic_backward(params, c_acts, np.ones(n), grad)
    return grad


def gradient_check(params: PolicyParams, observation, epsilon: float = 1e-5, max_params: int | None = None) -> float:
    """Max relative error between analytic and central-difference gradients
    of ``probe_scalar``. With ``max_params`` only an evenly spaced subset of
    coordinates is checked."""
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon must be in [1e-6, 1e-3]")
    analytic = probe_gradient(params, observation)
    n = params.flat.size
    idx = np.arange(n) if max_params is None or max_params >= n else np.linspace(0, n - 1, max_params).astype(int)
    work = params.copy()
    worst = 0.0
    for i in idx:
        orig = work.flat[i]
        work.flat[i] = orig + epsilon
        up = probe_scalar(work, observation)
        work.flat[i] = orig - epsilon
        down = probe_scalar(work, observation)
        work.flat[i] = orig
        numeric = (up - down) / (2.0 * epsilon)
        denom = max(abs(analytic[i]), abs(numeric), 1e-6)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
