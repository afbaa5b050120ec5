from setattn.ppo.gae import compute_gae
from setattn.ppo.loss import Adam, Minibatch, NonFiniteLoss, clipped_surrogate, ppo_clip_loss
from setattn.ppo.policy import ActorCritic, gaussian_log_prob, policy_forward, sample_action
from setattn.ppo.trainer import (
    EpochRecord,
    TrainConfig,
    TrainingCurve,
    TrainingDiverged,
    load_policy,
    role_rng,
    train,
    train_policy,
)

__all__ = [
    "ActorCritic",
    "Adam",
    "EpochRecord",
    "Minibatch",
    "NonFiniteLoss",
    "TrainConfig",
    "TrainingCurve",
    "TrainingDiverged",
    "clipped_surrogate",
    "compute_gae",
    "gaussian_log_prob",
    "load_policy",
    "policy_forward",
    "ppo_clip_loss",
    "role_rng",
    "sample_action",
    "train",
    "train_policy",
]
