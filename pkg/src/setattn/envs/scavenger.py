"""Continuous 2-D scavenger tasks.

Task 1: an agent starting at the world centre must reach any of ``m`` food
particles. Task 2 adds ``m`` poison particles that end the episode with a
penalty. Positions are updated as ``ego + dt * action`` with the action
clipped to ``a_max`` in norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from setattn.encoder import ObjectSet
from setattn.envs.base import EpisodeDone, StepResult, clip_norm

FOOD_REWARD = 1.0
POISON_REWARD = -1.0
STEP_REWARD = -0.05


@dataclass(frozen=True)
class ScavengerParams:
    world_half: float = 1.0  # world is [-world_half, world_half]^2
    dt: float = 1.0
    a_max: float = 0.05
    capture_radius: float = 0.05
    step_limit: int = 200


DEFAULT_PARAMS = ScavengerParams()


@dataclass(frozen=True)
class ScavengerState:
    task: int
    ego: np.ndarray
    food: np.ndarray  # absolute positions, m x 2
    poison: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    steps: int = 0
    done: bool = False

    @property
    def m(self):
        return len(self.food)

    @property
    def food_offsets(self):
        return self.food - self.ego

    @property
    def poison_offsets(self):
        return self.poison - self.ego


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def scavenger_reset(task: int, m: int, rng_seed, params: ScavengerParams = DEFAULT_PARAMS) -> ScavengerState:
    if task not in (1, 2):
        raise ValueError(f"scavenger task must be 1 or 2, got {task}")
    if m < 1:
        raise ValueError("a scavenger episode needs at least one food particle")
    rng = _rng(rng_seed)
    h = params.world_half
    food = rng.uniform(-h, h, size=(m, 2))
    poison = rng.uniform(-h, h, size=(m, 2)) if task == 2 else np.zeros((0, 2))
    return ScavengerState(task=task, ego=np.zeros(2), food=food, poison=poison)


def scavenger_step(state: ScavengerState, action, params: ScavengerParams = DEFAULT_PARAMS) -> StepResult:
    if state.done:
        raise EpisodeDone("step called on a terminal scavenger state")
    a = clip_norm(action, params.a_max)
    ego = state.ego + params.dt * a
    steps = state.steps + 1
    r2 = params.capture_radius ** 2

    # poison is checked first: touching both in one step counts as poisoned
    if len(state.poison) and np.min(np.sum((state.poison - ego) ** 2, axis=1)) <= r2:
        reward, done, info = POISON_REWARD, True, ("reached-poison",)
    elif np.min(np.sum((state.food - ego) ** 2, axis=1)) <= r2:
        reward, done, info = FOOD_REWARD, True, ("reached-food",)
    else:
        reward, done, info = STEP_REWARD, False, ()
    if not done and steps >= params.step_limit:
        done, info = True, ("timeout",)
    return StepResult(replace(state, ego=ego, steps=steps, done=done), reward, done, info)


def greedy_policy(state: ScavengerState, params: ScavengerParams = DEFAULT_PARAMS) -> np.ndarray:
    """Full speed toward the nearest food; lowest index wins ties."""
    offsets = state.food_offsets
    if len(offsets) == 0:
        raise ValueError("greedy policy needs at least one food particle")
    dist = np.hypot(offsets[:, 0], offsets[:, 1])
    j = int(np.argmin(dist))
    reach = params.dt * params.a_max
    if dist[j] <= reach:
        return offsets[j] / params.dt
    return offsets[j] * (params.a_max / dist[j])


def scavenger_object_set(state: ScavengerState) -> ObjectSet:
    if state.task == 1:
        return ObjectSet((state.food_offsets,), ego=state.ego)
    return ObjectSet((state.food_offsets, state.poison_offsets), ego=state.ego)


def scavenger_flat(state: ScavengerState, max_objects=None) -> np.ndarray:
    """Fixed-order concatenation: food offsets, poison offsets, ego position."""
    if max_objects is not None and state.m > max_objects:
        raise ValueError(f"{state.m} food particles exceed baseline capacity {max_objects}")
    return np.concatenate([state.food_offsets.ravel(), state.poison_offsets.ravel(), state.ego])
