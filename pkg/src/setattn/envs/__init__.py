"""Environments and the conversions from their states to network inputs."""
from __future__ import annotations

from functools import singledispatch

import numpy as np

from setattn.encoder import ClassSpec, EncoderSpec, ObjectSet, default_abstract_dim
from setattn.envs import convoy, scavenger
from setattn.envs.base import EpisodeDone, StepResult, write_trajectory_dump
from setattn.envs.convoy import ConvoyState, convoy_greedy_policy, convoy_reset, convoy_step
from setattn.envs.scavenger import ScavengerState, greedy_policy, scavenger_reset, scavenger_step

TASKS = ("scavenger1", "scavenger2", "convoy")

# average live attackers used to size the convoy attacker block
CONVOY_MEAN_ATTACKERS = 4


@singledispatch
def to_object_set(state) -> ObjectSet:
    raise TypeError(f"no object-set view for {type(state).__name__}")


@singledispatch
def to_flat_baseline(state, max_objects=None) -> np.ndarray:
    raise TypeError(f"no baseline view for {type(state).__name__}")


to_object_set.register(ScavengerState, scavenger.scavenger_object_set)
to_object_set.register(ConvoyState, convoy.convoy_object_set)
to_flat_baseline.register(ScavengerState, scavenger.scavenger_flat)
to_flat_baseline.register(ConvoyState, convoy.convoy_flat)


def _check_task(task):
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {TASKS}")


class Env:
    """Stateful wrapper that owns the current state and a random stream."""

    def __init__(self, task: str, m: int = 1, rng=None):
        _check_task(task)
        self.task = task
        self.m = m
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.state = None

    @property
    def action_scale(self):
        if self.task == "convoy":
            return convoy.DEFAULT_PARAMS.defender_step
        return scavenger.DEFAULT_PARAMS.a_max

    def reset(self):
        if self.task == "convoy":
            self.state = convoy_reset()
        else:
            self.state = scavenger_reset(int(self.task[-1]), self.m, self.rng)
        return self.state

    def step(self, action) -> StepResult:
        if self.task == "convoy":
            result = convoy_step(self.state, action, self.rng)
        else:
            result = scavenger_step(self.state, action)
        self.state = result.state
        return result

    def greedy_action(self):
        if self.task == "convoy":
            return convoy_greedy_policy(self.state)
        return greedy_policy(self.state)


def default_encoder_spec(task: str, m: int = 1, hidden=(64,), abstract_dims=None) -> EncoderSpec:
    """Per-class output width defaults to (average count) x (object dim), rounded up."""
    _check_task(task)
    if task == "scavenger1":
        dims, means, ego = [2], [m], 2
    elif task == "scavenger2":
        dims, means, ego = [2, 2], [m, m], 2
    else:
        dims, means, ego = [4, 4], [convoy.DEFAULT_PARAMS.n_members, CONVOY_MEAN_ATTACKERS], 3
    if abstract_dims is None:
        abstract_dims = [default_abstract_dim(mu, n) for mu, n in zip(means, dims)]
    if len(abstract_dims) != len(dims):
        raise ValueError(f"{task} has {len(dims)} object classes, got {len(abstract_dims)} abstract dims")
    classes = tuple(ClassSpec(n, int(k), tuple(hidden)) for n, k in zip(dims, abstract_dims))
    return EncoderSpec(classes, ego_dim=ego)


def baseline_dim(task: str, m: int = 1) -> int:
    _check_task(task)
    if task == "scavenger1":
        return 2 * m + 2
    if task == "scavenger2":
        return 4 * m + 2
    p = convoy.DEFAULT_PARAMS
    return 5 * (p.n_members + p.max_attackers) + 3


__all__ = [
    "TASKS",
    "ConvoyState",
    "Env",
    "EpisodeDone",
    "ScavengerState",
    "StepResult",
    "baseline_dim",
    "convoy_greedy_policy",
    "convoy_reset",
    "convoy_step",
    "default_encoder_spec",
    "greedy_policy",
    "scavenger_reset",
    "scavenger_step",
    "to_flat_baseline",
    "to_object_set",
    "write_trajectory_dump",
]
