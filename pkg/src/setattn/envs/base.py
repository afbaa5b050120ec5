from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Any

import numpy as np


class EpisodeDone(RuntimeError):
    """Raised when stepping a state that is already terminal."""


@dataclass(frozen=True)
class StepResult:
    state: Any
    reward: float
    done: bool
    info: tuple = ()


def clip_norm(action, limit):
    a = np.asarray(action, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"action must be finite, got {a}")
    norm = float(np.hypot(a[0], a[1]))
    if norm > limit:
        a = a * (limit / norm)
    return a


def write_trajectory_dump(path, records):
    """Write step records ``(episode, step, flat_state, action, reward, done)`` as CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode", "step", "state", "action", "reward", "done"])
        for episode, step, state, action, reward, done in records:
            writer.writerow([
                episode,
                step,
                " ".join(repr(float(x)) for x in state),
                " ".join(repr(float(x)) for x in action),
                repr(float(reward)),
                int(bool(done)),
            ])
