from __future__ import annotations

import numpy as np


def compute_gae(rewards, values, dones, bootstrap, gamma=0.99, lam=0.9):
    """Generalised advantage estimates and value targets.

    Works on 1-D sequences or on (T, n_envs) arrays; time is axis 0.
    ``bootstrap`` is the value of the state after the last step, and is
    ignored where that step was terminal.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise ValueError(
            f"rewards {rewards.shape}, values {values.shape} and dones {dones.shape} must share a shape"
        )
    if not 0.0 < gamma <= 1.0 or not 0.0 <= lam <= 1.0:
        raise ValueError("need 0 < gamma <= 1 and 0 <= lam <= 1")
    steps = rewards.shape[0]
    next_value = np.broadcast_to(np.asarray(bootstrap, dtype=np.float64), rewards.shape[1:])
    advantages = np.zeros_like(rewards)
    running = np.zeros(rewards.shape[1:])
    for t in reversed(range(steps)):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        running = delta + gamma * lam * live * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values
