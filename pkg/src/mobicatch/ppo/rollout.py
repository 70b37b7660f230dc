"""Experience collection from a vectorized environment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from mobicatch.ppo.gae import compute_gae
from mobicatch.ppo.network import PolicyNet, sample_actions
from mobicatch.rewards import TERMS


@dataclass
class EpisodeStats:
    returns: list = field(default_factory=list)
    touched: list = field(default_factory=list)
    caught: list = field(default_factory=list)
    faults: int = 0

    def summary(self) -> dict:
        def mean(x):
            return float(np.mean(x)) if x else float("nan")
        return {"episodes": len(self.returns), "episode_return": mean(self.returns),
                "success_touch": mean(self.touched), "success_catch": mean(self.caught),
                "faults": self.faults}


@dataclass
class RolloutBatch:
    """Transitions laid out (T, N); ``obs`` is stored already normalized."""

    obs: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    valid: np.ndarray
    last_value: np.ndarray
    terms: np.ndarray
    episodes: EpisodeStats
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __post_init__(self):
        t, n = self.rewards.shape
        for name in ("logp", "values", "dones", "valid"):
            if getattr(self, name).shape != (t, n):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(t, n)}")
        if self.obs.shape[:2] != (t, n) or self.actions.shape[:2] != (t, n):
            raise ValueError("obs/actions must be laid out (T, N, ...)")

    def __len__(self) -> int:
        return int(self.valid.sum())

    def compute_advantages(self, gamma: float, lam: float):
        self.advantages, self.returns = compute_gae(
            self.rewards, self.values, self.dones, self.last_value, gamma, lam, self.valid)
        return self

    def flat(self):
        """Valid transitions flattened in (t, env) order."""
        if self.advantages is None:
            raise RuntimeError("call compute_advantages first")
        m = self.valid.astype(bool)
        return (self.obs[m], self.actions[m], self.logp[m], self.advantages[m], self.returns[m])

    def term_means(self) -> dict:
        m = self.valid.astype(bool)
        return {f"r_{t}": float(self.terms[m][:, i].mean()) if m.any() else float("nan")
                for i, t in enumerate(TERMS)}


def rollout(env, net: PolicyNet, horizon: int, generator: torch.Generator | None = None,
            update_normalizer: bool = True) -> RolloutBatch:
    """Step every env ``horizon`` times with sampled actions.

    Finished episodes are reset in place; their outcome is recorded in the
    batch's episode statistics.  A faulted transition is kept out of the
    learning signal (``valid`` False) and its env starts over.
    """
    n = env.n
    dtype = next(net.parameters()).dtype
    obs_buf = np.zeros((horizon, n, net.obs_dim))
    act_buf = np.zeros((horizon, n, net.act_dim))
    logp_buf = np.zeros((horizon, n))
    rew_buf = np.zeros((horizon, n))
    val_buf = np.zeros((horizon, n))
    done_buf = np.zeros((horizon, n))
    valid_buf = np.ones((horizon, n))
    terms_buf = np.zeros((horizon, n, len(TERMS)))
    stats = EpisodeStats()
    obs = env.current_obs()
    for t in range(horizon):
        if update_normalizer:
            net.normalizer.update(obs, net.active_obs)
        obs_n = net.normalize(obs)
        act, logp, value = sample_actions(net, obs_n, generator)
        act_np = act.double().numpy()
        obs_buf[t] = obs_n.double().numpy()
        act_buf[t] = act_np
        logp_buf[t] = logp.double().numpy()
        val_buf[t] = value.double().numpy()
        obs, reward, done, info = env.step(act_np)
        rew_buf[t] = reward
        terms_buf[t] = info["terms"]
        done_buf[t] = done
        fault = info["fault"] & done
        valid_buf[t] = ~fault
        finished = np.flatnonzero(done)
        for i in finished:
            if fault[i]:
                stats.faults += 1
                continue
            stats.returns.append(float(env.episode_return[i]))
            stats.touched.append(bool(env.touched[i]))
            stats.caught.append(bool(env.caught[i]))
        if finished.size:
            obs = env.reset_envs(finished)
    with torch.no_grad():
        _, _, last_value = net.distribution_params(net.normalize(obs).to(dtype))
    return RolloutBatch(obs_buf, act_buf, logp_buf, rew_buf, val_buf, done_buf, valid_buf,
                        last_value.double().numpy(), terms_buf, stats)
