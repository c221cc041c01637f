"""Rollout collection, training, evaluation and metrics."""

from .evaluate import evaluate, evaluate_checkpoints, export_replay, read_replay
from .metrics import read_csv, smooth
from .rollout import Instance, PolicySource, RolloutEngine, run_rollouts
from .train import TrainResult, train

__all__ = [
    "Instance", "PolicySource", "RolloutEngine", "TrainResult", "evaluate", "evaluate_checkpoints",
    "export_replay", "read_csv", "run_rollouts", "smooth", "train", "read_replay",
]
