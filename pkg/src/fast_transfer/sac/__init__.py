from .checkpoint import load_policy, save_policy
from .core import (
    PAPER_SAC_PRESETS,
    Policy,
    ReplayBuffer,
    SacHyperparams,
    SacLearner,
    compute_return,
    sac_update,
    select_action,
    soft_update,
)
from .train import TARGET, TrainResult, run_training, train_baseline

__all__ = [
    "load_policy", "save_policy", "PAPER_SAC_PRESETS", "Policy", "ReplayBuffer", "SacHyperparams",
    "SacLearner", "compute_return", "sac_update", "select_action", "soft_update", "TARGET",
    "TrainResult", "run_training", "train_baseline",
]
