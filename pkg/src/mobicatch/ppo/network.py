"""Actor-critic networks with head-wise transfer between stages."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from mobicatch.ppo.normalizer import RunningMeanStd
from mobicatch.simenv.types import (
    BASE_ARM_ACTION_DIM, CATCHING, FULL_OBS_DIM, NUM_HAND_JOINTS, ROLL_INDEX, TRACK_OBS_DIM,
    TRACKING, check_stage,
)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0


def mlp(sizes, activation=nn.Tanh) -> nn.Sequential:
    layers = []
    for i in range(len(sizes) - 1):
        layers.append(nn.Linear(sizes[i], sizes[i + 1]))
        if i < len(sizes) - 2:
            layers.append(activation())
    return nn.Sequential(*layers)


def _orthogonal(module: nn.Module, gain: float):
    for m in module.modules():
        if isinstance(m, nn.Linear):
            nn.init.orthogonal_(m.weight, gain)
            nn.init.zeros_(m.bias)


class PolicyNet(nn.Module):
    """Gaussian policy with a shared trunk and separate base/arm and hand heads.

    The trunk always takes the full 26-dim observation; in the tracking
    stage the hand slots are zero and their input weights start at zero, so
    a transferred network ignores the new hand inputs until training moves
    those weights.  The critic is its own MLP so large return magnitudes do
    not pull on the actor's features.
    """

    def __init__(self, stage: str, hidden=(256, 256), init_log_std: float = -0.5,
                 roll_enabled: bool = True, obs_clip: float = 10.0):
        super().__init__()
        self.stage = check_stage(stage)
        self.hidden = tuple(int(h) for h in hidden)
        self.obs_dim = FULL_OBS_DIM
        self.act_dim = BASE_ARM_ACTION_DIM + (NUM_HAND_JOINTS if stage == CATCHING else 0)
        self.trunk = mlp((self.obs_dim,) + self.hidden)
        self.trunk.append(nn.Tanh())
        self.arm_head = nn.Linear(self.hidden[-1], BASE_ARM_ACTION_DIM)
        self.hand_head = nn.Linear(self.hidden[-1], NUM_HAND_JOINTS) if stage == CATCHING else None
        self.log_std = nn.Parameter(torch.full((self.act_dim,), float(init_log_std)))
        self.value_net = mlp((self.obs_dim,) + self.hidden + (1,))
        _orthogonal(self.trunk, np.sqrt(2.0))
        _orthogonal(self.value_net, np.sqrt(2.0))
        nn.init.orthogonal_(self.value_net[-1].weight, 1.0)
        for head in (self.arm_head, self.hand_head):
            if head is not None:
                nn.init.zeros_(head.weight)
                nn.init.zeros_(head.bias)
        if stage == TRACKING:
            with torch.no_grad():
                self.trunk[0].weight[:, TRACK_OBS_DIM:] = 0.0
        mask = torch.ones(self.act_dim)
        if not roll_enabled:
            mask[ROLL_INDEX] = 0.0
        self.register_buffer("action_mask", mask)
        self.normalizer = RunningMeanStd(self.obs_dim, clip=obs_clip)
        # Observation columns that carry information in this stage.
        self.active_obs = np.arange(TRACK_OBS_DIM if stage == TRACKING else FULL_OBS_DIM)

    @property
    def roll_enabled(self) -> bool:
        return bool(self.action_mask[ROLL_INDEX] > 0)

    def distribution_params(self, obs_n: torch.Tensor):
        """Mean, std and value for already-normalized observations."""
        if obs_n.shape[-1] != self.obs_dim:
            raise ValueError(f"expected observation width {self.obs_dim}, got {obs_n.shape[-1]}")
        h = self.trunk(obs_n)
        mean = self.arm_head(h)
        if self.hand_head is not None:
            mean = torch.cat([mean, self.hand_head(h)], dim=-1)
        mean = mean * self.action_mask
        log_std = torch.clamp(self.log_std, LOG_STD_MIN, LOG_STD_MAX)
        std = torch.exp(log_std).expand_as(mean)
        value = self.value_net(obs_n).squeeze(-1)
        return mean, std, value

    def log_prob_entropy(self, obs_n, actions):
        mean, std, value = self.distribution_params(obs_n)
        dist = torch.distributions.Normal(mean, std)
        m = self.action_mask
        logp = (dist.log_prob(actions) * m).sum(-1)
        ent = (dist.entropy() * m).sum(-1)
        return logp, ent, value

    def normalize(self, obs) -> torch.Tensor:
        obs = np.asarray(obs, dtype=float)
        if obs.shape[-1] != self.obs_dim:
            raise ValueError(f"expected observation width {self.obs_dim}, got {obs.shape[-1]}")
        dtype = next(self.parameters()).dtype
        return torch.as_tensor(self.normalizer.normalize(obs), dtype=dtype)


def policy_forward(net: PolicyNet, obs):
    """Raw observations in, (action mean, action std, value) out."""
    with torch.no_grad():
        return net.distribution_params(net.normalize(obs))


def sample_actions(net: PolicyNet, obs_n: torch.Tensor, generator: torch.Generator | None,
                   deterministic: bool = False):
    """Draw actions (masked dims exactly 0) with their log-probs and values."""
    with torch.no_grad():
        mean, std, value = net.distribution_params(obs_n)
        if deterministic:
            act = mean.clone()
        else:
            noise = torch.randn(mean.shape, generator=generator, dtype=mean.dtype)
            act = (mean + std * noise) * net.action_mask
        dist = torch.distributions.Normal(mean, std)
        logp = (dist.log_prob(act) * net.action_mask).sum(-1)
    return act, logp, value


def transfer_hand_free(src: PolicyNet, dst: PolicyNet):
    """Copy trunk, base/arm head, the shared log-stds, critic and normalizer."""
    with torch.no_grad():
        dst.trunk.load_state_dict(src.trunk.state_dict())
        dst.arm_head.load_state_dict(src.arm_head.state_dict())
        dst.value_net.load_state_dict(src.value_net.state_dict())
        dst.log_std[:BASE_ARM_ACTION_DIM] = src.log_std[:BASE_ARM_ACTION_DIM]
    dst.normalizer = src.normalizer.copy()
    # Hand inputs were always zero during tracking; start their statistics fresh.
    dst.normalizer.reset(np.arange(TRACK_OBS_DIM, FULL_OBS_DIM))
