"""Policy networks and policy-gradient updates."""

from .checkpoint import load_checkpoint, save_checkpoint, spec_hash
from .mlp import ActionDistribution, MlpSpec, PolicyParams, gradient_check, init_params, mlp_forward
from .ppo import HyperParams, RolloutBuffer, buffer_size, gae, poca_update, pool_teammates, ppo_update

__all__ = [
    "ActionDistribution", "HyperParams", "MlpSpec", "PolicyParams", "RolloutBuffer", "buffer_size",
    "gae", "gradient_check", "init_params", "load_checkpoint", "mlp_forward", "poca_update",
    "pool_teammates", "ppo_update", "save_checkpoint", "spec_hash",
]
