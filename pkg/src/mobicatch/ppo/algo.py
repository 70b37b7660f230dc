"""Clipped-surrogate PPO update."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
import torch
import yaml

from mobicatch.ppo.network import PolicyNet


@dataclass(frozen=True)
class PpoConfig:
    num_envs: int = 64
    horizon: int = 128
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    lr: float = 3e-4
    ent_coef: float = 0.0
    vf_coef: float = 0.5
    max_grad_norm: float = 0.5
    total_steps: int = 5_000_000
    seed: int = 0
    hidden: tuple = (256, 256)
    init_log_std: float = -0.5
    obs_clip: float = 10.0
    eval_every: int = 0  # updates; 0 disables periodic evaluation
    eval_episodes: int = 256
    checkpoint_every: int = 0  # updates; 0 keeps only the final checkpoint

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.lam <= 1.0):
            raise ValueError("gamma and lam must lie in [0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be positive")
        if self.num_envs < 1 or self.horizon < 1 or self.epochs < 1 or self.minibatches < 1:
            raise ValueError("num_envs, horizon, epochs and minibatches must be >= 1")
        if self.lr <= 0 or self.max_grad_norm <= 0:
            raise ValueError("lr and max_grad_norm must be positive")

    @property
    def steps_per_update(self) -> int:
        return self.num_envs * self.horizon

    def num_updates(self, total_steps: int | None = None) -> int:
        total = self.total_steps if total_steps is None else total_steps
        return max(1, int(total) // self.steps_per_update)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict | None) -> "PpoConfig":
        d = dict(d or {})
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown ppo config keys: {sorted(unknown)}")
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


def load_ppo_config(path: str | Path | None) -> PpoConfig:
    if path is None:
        return PpoConfig()
    return PpoConfig.from_dict(yaml.safe_load(Path(path).read_text()))


def ppo_loss(net: PolicyNet, obs_n, actions, old_logp, adv, returns, cfg: PpoConfig):
    """Total loss and its parts for one minibatch (advantages already normalized)."""
    logp, ent, value = net.log_prob_entropy(obs_n, actions)
    log_ratio = logp - old_logp
    ratio = torch.exp(log_ratio)
    surr1 = ratio * adv
    surr2 = torch.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv
    policy_loss = -torch.min(surr1, surr2).mean()
    value_loss = 0.5 * ((value - returns) ** 2).mean()
    entropy = ent.mean()
    loss = policy_loss + cfg.vf_coef * value_loss - cfg.ent_coef * entropy
    with torch.no_grad():
        clip_frac = ((ratio - 1.0).abs() > cfg.clip).to(ratio.dtype).mean()
        approx_kl = ((ratio - 1.0) - log_ratio).mean()
    return loss, {"policy_loss": policy_loss.detach(), "value_loss": value_loss.detach(),
                  "entropy": entropy.detach(), "clip_frac": clip_frac, "approx_kl": approx_kl}


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    std = adv.std()
    return (adv - adv.mean()) / (std + 1e-8)


def ppo_update(net: PolicyNet, optimizer: torch.optim.Optimizer, batch, cfg: PpoConfig,
               generator: torch.Generator | None = None) -> dict:
    """Run the configured epochs over ``batch``; returns mean loss statistics.

    Raises FloatingPointError as soon as a loss is non-finite, before the
    optimizer touches the parameters.
    """
    obs, act, old_logp, adv, ret = batch.flat()
    dtype = next(net.parameters()).dtype
    adv = normalize_advantages(adv)
    tensors = [torch.as_tensor(x, dtype=dtype) for x in (obs, act, old_logp, adv, ret)]
    n = tensors[0].shape[0]
    if n == 0:
        raise ValueError("empty batch")
    mb_size = max(1, n // cfg.minibatches)
    sums: dict[str, float] = {}
    count = 0
    first_clip = None
    # Actor and critic gradients are clipped separately: large return
    # magnitudes would otherwise dominate the joint norm and starve the policy.
    critic = [p for p in net.value_net.parameters() if p.requires_grad]
    critic_ids = {id(p) for p in critic}
    actor = [p for p in net.parameters() if p.requires_grad and id(p) not in critic_ids]
    groups = [g for g in (actor, critic) if g]
    for _ in range(cfg.epochs):
        perm = torch.randperm(n, generator=generator)
        for start in range(0, mb_size * cfg.minibatches, mb_size):
            idx = perm[start:start + mb_size]
            loss, stats = ppo_loss(net, *(t[idx] for t in tensors), cfg)
            if not torch.isfinite(loss):
                raise FloatingPointError(f"non-finite PPO loss ({float(loss.detach())}); update aborted")
            if first_clip is None:
                first_clip = float(stats["clip_frac"])
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            norms = [torch.nn.utils.clip_grad_norm_(g, cfg.max_grad_norm) for g in groups]
            if not all(torch.isfinite(x) for x in norms):
                raise FloatingPointError("non-finite gradient norm; update aborted")
            optimizer.step()
            for k, v in stats.items():
                sums[k] = sums.get(k, 0.0) + float(v)
            count += 1
    out = {k: v / count for k, v in sums.items()}
    out["first_clip_frac"] = first_clip
    return out
