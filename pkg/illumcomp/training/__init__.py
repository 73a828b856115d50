"""
Training package: losses, optimizer, alternating training loop, evaluation.
"""

from illumcomp.training.config import LossWeights, TrainConfig
from illumcomp.training.evaluation import EvalMetrics, evaluate, evaluate_shadow_direction
from illumcomp.training.losses import LossParts, global_adv_losses, identity_loss, local_adv_losses, total_losses
from illumcomp.training.optimizer import Adadelta
from illumcomp.training.trainer import TrainState, init_state, load_state, save_state, train, train_step

__all__ = [
    "LossWeights",
    "TrainConfig",
    "LossParts",
    "local_adv_losses",
    "global_adv_losses",
    "identity_loss",
    "total_losses",
    "Adadelta",
    "TrainState",
    "init_state",
    "save_state",
    "load_state",
    "train_step",
    "train",
    "EvalMetrics",
    "evaluate",
    "evaluate_shadow_direction",
]
