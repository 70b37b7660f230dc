"""PPO with GAE and the two-stage tracking-to-catching curriculum."""

from mobicatch.ppo.algo import PpoConfig, load_ppo_config, ppo_loss, ppo_update
from mobicatch.ppo.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from mobicatch.ppo.gae import compute_gae
from mobicatch.ppo.network import PolicyNet, policy_forward
from mobicatch.ppo.normalizer import RunningMeanStd
from mobicatch.ppo.rollout import RolloutBatch, rollout
from mobicatch.ppo.train import (
    TrainSetup, Trainer, evaluate, train_catching, train_tracking, transfer_to_catching,
)

__all__ = [
    "Checkpoint", "PolicyNet", "PpoConfig", "RolloutBatch", "RunningMeanStd", "TrainSetup", "Trainer",
    "compute_gae", "evaluate", "load_checkpoint", "load_ppo_config", "policy_forward", "ppo_loss",
    "ppo_update", "rollout", "save_checkpoint", "train_catching", "train_tracking",
    "transfer_to_catching",
]
