"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np


def compute_gae(rewards, values, dones, last_value, gamma: float, lam: float, valid=None):
    """Advantages and returns by the backward recursion.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
    A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}

    Arrays are (T,) or (T, N); ``last_value`` bootstraps step T.  Entries
    with ``valid == False`` (dropped transitions) get A = 0, which also cuts
    the recursion of the step before them down to its one-step TD error.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise ValueError("rewards, values and dones must share a shape")
    ok = np.ones_like(rewards) if valid is None else np.asarray(valid, dtype=float)
    steps = rewards.shape[0]
    adv = np.zeros_like(rewards)
    next_value = np.asarray(last_value, dtype=float) * np.ones_like(rewards[0])
    next_adv = np.zeros_like(rewards[0])
    for t in range(steps - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        a = (delta + gamma * lam * live * next_adv) * ok[t]
        adv[t] = a
        next_adv = a
        next_value = values[t]
    return adv, adv + values
