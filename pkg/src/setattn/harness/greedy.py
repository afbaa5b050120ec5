from __future__ import annotations

import numpy as np

from setattn.envs import Env, to_flat_baseline
from setattn.ppo.trainer import role_rng


def run_greedy_episode(env: Env, episode=0, records=None):
    """Play one episode with the greedy policy; returns (return, length)."""
    env.reset()
    total, steps = 0.0, 0
    while True:
        action = env.greedy_action()
        flat = to_flat_baseline(env.state) if records is not None else None
        result = env.step(action)
        total += result.reward
        steps += 1
        if records is not None:
            records.append((episode, steps - 1, flat, action, result.reward, result.done))
        if result.done:
            return total, steps


def estimate_greedy_return(task: str, m: int, episodes: int, seed: int = 0, records=None):
    """Monte-Carlo mean and (population) standard deviation of the greedy return."""
    if episodes < 1:
        raise ValueError("need at least one episode")
    env = Env(task, m, role_rng(seed, "greedy"))
    returns = np.array([run_greedy_episode(env, ep, records)[0] for ep in range(episodes)])
    return float(returns.mean()), float(returns.std())
