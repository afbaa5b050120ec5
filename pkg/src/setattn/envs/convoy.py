"""Kinematic convoy-protection task on the unit square.

Three convoy members drive left to right at constant speed. Attackers spawn
at random times on eight perimeter points and chase the nearest live
member at twice the convoy speed. The defender moves by clipped position
deltas and blocks any attacker it comes close to.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from setattn.encoder import ObjectSet
from setattn.envs.base import EpisodeDone, StepResult, clip_norm

BLOCK_REWARD = 0.1
LOSS_REWARD = -1.0

LOST, ACTIVE, ARRIVED = 0, 1, 2

# eight points evenly spaced along the perimeter, offset from the corners
SPAWN_POINTS = np.array([
    [0.25, 0.0], [0.75, 0.0], [1.0, 0.25], [1.0, 0.75],
    [0.75, 1.0], [0.25, 1.0], [0.0, 0.75], [0.0, 0.25],
])


@dataclass(frozen=True)
class ConvoyParams:
    n_members: int = 3
    member_spacing: float = 0.1
    convoy_speed: float = 0.005
    goal_x: float = 1.0
    spawn_prob: float = 0.02
    max_attackers: int = 6
    block_radius: float = 0.06
    attack_radius: float = 0.04
    defender_step: float = 0.02
    defender_start: tuple = (0.15, 0.5)
    step_limit: int = 400

    @property
    def attacker_speed(self):
        return 2.0 * self.convoy_speed


DEFAULT_PARAMS = ConvoyParams()


@dataclass(frozen=True)
class ConvoyState:
    members: np.ndarray          # n_members x 2
    member_status: np.ndarray    # LOST / ACTIVE / ARRIVED
    attackers: np.ndarray        # max_attackers x 2, slot positions
    attacker_active: np.ndarray  # bool per slot
    defender: np.ndarray
    heading: float = 0.0
    time: int = 0
    done: bool = False

    @property
    def active_attackers(self):
        return self.attackers[self.attacker_active]

    @property
    def active_members(self):
        return self.members[self.member_status == ACTIVE]


def convoy_reset(rng_seed=None, params: ConvoyParams = DEFAULT_PARAMS) -> ConvoyState:
    """Initial state. The start layout is fixed; ``rng_seed`` is accepted for interface symmetry."""
    n = params.n_members
    ys = 0.5 + params.member_spacing * (np.arange(n) - (n - 1) / 2.0)
    members = np.column_stack([np.zeros(n), ys])
    return ConvoyState(
        members=members,
        member_status=np.full(n, ACTIVE),
        attackers=np.zeros((params.max_attackers, 2)),
        attacker_active=np.zeros(params.max_attackers, dtype=bool),
        defender=np.array(params.defender_start, dtype=np.float64),
    )


def convoy_step(state: ConvoyState, action, rng: np.random.Generator,
                params: ConvoyParams = DEFAULT_PARAMS) -> StepResult:
    if state.done:
        raise EpisodeDone("step called on a terminal convoy state")
    info = []
    reward = 0.0

    delta = clip_norm(action, params.defender_step)
    defender = np.clip(state.defender + delta, 0.0, 1.0)
    moved = defender - state.defender
    heading = float(np.arctan2(moved[1], moved[0])) if np.any(moved) else state.heading

    members = state.members.copy()
    status = state.member_status.copy()
    live = status == ACTIVE
    members[live, 0] += params.convoy_speed
    arrived = live & (members[:, 0] >= params.goal_x - 1e-12)
    if arrived.any():
        members[arrived, 0] = params.goal_x
        status[arrived] = ARRIVED
        info.append("arrived")

    attackers = state.attackers.copy()
    active = state.attacker_active.copy()
    live = status == ACTIVE
    if live.any():
        targets = members[live]
        for i in np.flatnonzero(active):
            d = targets - attackers[i]
            dist = np.hypot(d[:, 0], d[:, 1])
            k = int(np.argmin(dist))
            if dist[k] > 0.0:
                attackers[i] += d[k] * (min(params.attacker_speed, dist[k]) / dist[k])

    # blocks resolve before attacks
    for i in np.flatnonzero(active):
        if np.hypot(*(attackers[i] - defender)) <= params.block_radius:
            active[i] = False
            reward += BLOCK_REWARD
            info.append("blocked")
    for i in np.flatnonzero(active):
        live_idx = np.flatnonzero(status == ACTIVE)
        if len(live_idx) == 0:
            break
        d = members[live_idx] - attackers[i]
        dist = np.hypot(d[:, 0], d[:, 1])
        k = int(np.argmin(dist))
        if dist[k] <= params.attack_radius:
            status[live_idx[k]] = LOST
            active[i] = False
            reward += LOSS_REWARD
            info.append("member-lost")

    # one draw per spawn point every step keeps the random stream state-independent
    draws = rng.random(len(SPAWN_POINTS))
    for p in np.flatnonzero(draws < params.spawn_prob):
        free = np.flatnonzero(~active)
        if len(free) == 0:
            break
        attackers[free[0]] = SPAWN_POINTS[p]
        active[free[0]] = True
    attackers[~active] = 0.0

    time = state.time + 1
    done = False
    if not np.any(status == ACTIVE):
        done = True
        info.append("convoy-finished")
    elif time >= params.step_limit:
        done = True
        info.append("timeout")
    new = ConvoyState(members, status, attackers, active, defender, heading, time, done)
    return StepResult(new, reward, done, tuple(info))


def convoy_greedy_policy(state: ConvoyState, params: ConvoyParams = DEFAULT_PARAMS) -> np.ndarray:
    """Chase the attacker closest to any live member; otherwise shadow the convoy."""
    live = state.active_members
    if len(live) == 0:
        return np.zeros(2)
    attackers = state.active_attackers
    if len(attackers):
        gaps = np.hypot(*(attackers[:, None, :] - live[None, :, :]).transpose(2, 0, 1))
        target = attackers[int(np.argmin(gaps.min(axis=1)))]
    else:
        target = live.mean(axis=0)
    return target - state.defender


def _features(points, defender):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return np.column_stack([points - defender, points]) if len(points) else np.zeros((0, 4))


def convoy_object_set(state: ConvoyState) -> ObjectSet:
    """Live members and active attackers as ``(dx, dy, x, y)`` rows; inactive ones are dropped."""
    ego = np.array([state.defender[0], state.defender[1], state.heading])
    return ObjectSet(
        (_features(state.active_members, state.defender), _features(state.active_attackers, state.defender)),
        ego=ego,
    )


def convoy_flat(state: ConvoyState, max_objects=None) -> np.ndarray:
    """Fixed slots of ``(dx, dy, x, y, status)``; empty slots are all zero."""
    capacity = len(state.attackers) if max_objects is None else int(max_objects)
    used = np.flatnonzero(state.attacker_active)
    if len(used) and used.max() >= capacity:
        raise ValueError(f"attacker in slot {used.max()} exceeds baseline capacity {capacity}")
    n = len(state.members)
    member_rows = np.zeros((n, 5))
    live = state.member_status == ACTIVE
    member_rows[live, :4] = _features(state.members[live], state.defender)
    member_rows[live, 4] = 1.0
    attacker_rows = np.zeros((capacity, 5))
    attacker_rows[used, :4] = _features(state.attackers[used], state.defender)
    attacker_rows[used, 4] = 1.0
    ego = np.array([state.defender[0], state.defender[1], state.heading])
    return np.concatenate([member_rows.ravel(), attacker_rows.ravel(), ego])
