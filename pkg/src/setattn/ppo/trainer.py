"""PPO training loop with GAE over vectorised environment copies."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from setattn.core import params_io
from setattn.core.tape import Tape, backward
from setattn.encoder import concat_packed
from setattn.envs import Env, baseline_dim, default_encoder_spec, to_flat_baseline, to_object_set
from setattn.ppo.gae import compute_gae
from setattn.ppo.loss import Adam, Minibatch, NonFiniteLoss, ppo_clip_loss
from setattn.ppo.policy import ActorCritic, gaussian_log_prob

log = logging.getLogger(__name__)

ROLES = {"env": 1, "init": 2, "sample": 3, "shuffle": 4, "greedy": 5}


def role_rng(seed: int, role: str, index: int = 0) -> np.random.Generator:
    """Independent generator per (seed, role, index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), ROLES[role], int(index)]))


@dataclass
class TrainConfig:
    epochs: int = 1000
    steps_per_epoch: int = 1000
    minibatch: int = 256
    clip: float = 0.1
    gamma: float = 0.99
    lam: float = 0.9
    entropy_coef: float = 0.0
    lr: float = 3e-4
    update_passes: int = 4
    value_coef: float = 0.5
    seed: int = 0
    num_envs: int = 8
    log_std_init: float = -0.5
    # policy action units per env speed bound; at 3 the initial noise nearly always saturates the bound
    action_gain: float = 3.0
    hidden: tuple = (64, 64, 64, 64)
    slope: float = 0.01
    normalize_advantages: bool = True
    checkpoint_every: int = 0

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if self.action_gain <= 0.0:
            raise ValueError("action_gain must be positive")
        if self.clip <= 0.0:
            raise ValueError("clip must be positive")
        if self.entropy_coef != 0.0:
            raise ValueError("entropy bonus is not supported; entropy_coef must be 0")
        if self.epochs < 0 or self.steps_per_epoch < 1 or self.minibatch < 1 or self.update_passes < 1:
            raise ValueError("epochs >= 0 and steps_per_epoch, minibatch, update_passes >= 1 required")
        if self.num_envs < 1 or self.steps_per_epoch % self.num_envs:
            raise ValueError("steps_per_epoch must be a positive multiple of num_envs")


@dataclass
class EpochRecord:
    epoch: int
    mean_return: float
    mean_episode_len: float
    policy_loss: float
    value_loss: float
    seed: int


CURVE_FIELDS = ("epoch", "mean_return", "mean_episode_len", "policy_loss", "value_loss", "seed")


def _fmt(x):
    return repr(float(x)) if isinstance(x, float) else str(x)


@dataclass
class TrainingCurve:
    records: list = field(default_factory=list)
    diverged_at: int | None = None

    def __len__(self):
        return len(self.records)

    @property
    def returns(self):
        return np.array([r.mean_return for r in self.records], dtype=np.float64)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CURVE_FIELDS)
            for r in self.records:
                writer.writerow([_fmt(getattr(r, f)) for f in CURVE_FIELDS])

    @classmethod
    def from_csv(cls, path) -> "TrainingCurve":
        curve = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != CURVE_FIELDS:
                raise ValueError(f"{path}:1: expected header {','.join(CURVE_FIELDS)}")
            for line, row in enumerate(reader, start=2):
                try:
                    if len(row) != len(CURVE_FIELDS):
                        raise ValueError(f"expected {len(CURVE_FIELDS)} fields, got {len(row)}")
                    curve.records.append(EpochRecord(
                        int(row[0]), float(row[1]), float(row[2]), float(row[3]), float(row[4]), int(row[5])))
                except ValueError as exc:
                    raise ValueError(f"{path}:{line}: {exc}") from None
        return curve


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, curve, reason):
        super().__init__(f"training diverged at epoch {epoch}: {reason}")
        self.epoch = epoch
        self.curve = curve


@dataclass
class Rollout:
    inputs: object          # flat array or PackedSets, t-major over (step, env)
    actions: np.ndarray
    logp: np.ndarray
    rewards: np.ndarray     # (T, n_envs); timeouts include gamma * V(final state)
    values: np.ndarray
    dones: np.ndarray
    bootstrap: np.ndarray   # (n_envs,)


def featurizer(representation):
    return to_object_set if representation == "encoder" else to_flat_baseline


def build_policy(task, m, representation, config: TrainConfig, encoder_spec=None, rng=None):
    if representation == "encoder" and encoder_spec is None:
        encoder_spec = default_encoder_spec(task, m)
    policy = ActorCritic(
        representation=representation,
        input_dim=baseline_dim(task, m),
        action_dim=2,
        encoder_spec=encoder_spec if representation == "encoder" else None,
        hidden=config.hidden,
        slope=config.slope,
    )
    rng = rng if rng is not None else role_rng(config.seed, "init")
    return policy.init_params(rng, log_std_init=config.log_std_init)


def load_policy(path) -> ActorCritic:
    """Load a checkpoint written during training."""
    params, header = params_io.load(path)
    return ActorCritic.from_header(header, params)


class EnvPool:
    """Environment copies plus their running episode totals."""

    def __init__(self, envs):
        self.envs = list(envs)
        for env in self.envs:
            env.reset()
        self.ep_return = np.zeros(len(self.envs))
        self.ep_len = np.zeros(len(self.envs), dtype=np.int64)

    def __len__(self):
        return len(self.envs)

    def __getitem__(self, i):
        return self.envs[i]

    def __iter__(self):
        return iter(self.envs)


def collect_rollout(policy: ActorCritic, envs: EnvPool, featurize, n_steps, gamma, rng, episode_log,
                    action_gain=1.0):
    """Step every env ``n_steps`` times; ``episode_log`` receives (return, length) pairs."""
    n_envs = len(envs)
    inputs, actions, logps = [], [], []
    rewards = np.zeros((n_steps, n_envs))
    values = np.zeros((n_steps, n_envs))
    dones = np.zeros((n_steps, n_envs))
    for t in range(n_steps):
        batch = policy.batch([featurize(env.state) for env in envs])
        mean, std, value = policy.evaluate(batch)
        action = mean + std * rng.standard_normal(mean.shape)
        inputs.append(batch)
        actions.append(action)
        logps.append(gaussian_log_prob(action, mean, std))
        values[t] = value
        timed_out = []
        for i, env in enumerate(envs):
            result = env.step(action[i] * (action_gain * env.action_scale))
            envs.ep_return[i] += result.reward
            envs.ep_len[i] += 1
            rewards[t, i] = result.reward
            if result.done:
                dones[t, i] = 1.0
                if "timeout" in result.info:
                    timed_out.append(i)
                episode_log.append((envs.ep_return[i], envs.ep_len[i]))
        if timed_out:
            final = policy.batch([featurize(envs[i].state) for i in timed_out])
            rewards[t, timed_out] += gamma * policy.value(final)
        for i in np.flatnonzero(dones[t]):
            envs[i].reset()
            envs.ep_return[i], envs.ep_len[i] = 0.0, 0
    bootstrap = policy.value(policy.batch([featurize(env.state) for env in envs]))
    if policy.representation == "encoder":
        all_inputs = concat_packed(inputs)
    else:
        all_inputs = np.concatenate(inputs, axis=0)
    return Rollout(all_inputs, np.concatenate(actions), np.concatenate(logps),
                   rewards, values, dones, bootstrap)


def update(policy: ActorCritic, optimizer: Adam, rollout: Rollout, config: TrainConfig, rng):
    adv, ret = compute_gae(rollout.rewards, rollout.values, rollout.dones, rollout.bootstrap,
                           config.gamma, config.lam)
    adv, ret = adv.reshape(-1), ret.reshape(-1)
    if config.normalize_advantages:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    n = len(adv)
    stats = []
    for _ in range(config.update_passes):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch):
            idx = order[start:start + config.minibatch]
            mb = Minibatch(ActorCritic.select(rollout.inputs, idx), rollout.actions[idx],
                           rollout.logp[idx], adv[idx], ret[idx])
            tape = Tape()
            loss, s = ppo_clip_loss(tape, policy, mb, config.clip, config.value_coef)
            optimizer.step(policy.params, backward(tape, loss))
            stats.append(s)
    return stats


def train(task: str, m: int, representation: str, config: TrainConfig, encoder_spec=None,
          checkpoint_dir=None, progress=None) -> TrainingCurve:
    """Train a policy with PPO and return per-epoch statistics."""
    return train_policy(task, m, representation, config, encoder_spec, checkpoint_dir, progress)[1]


def train_policy(task: str, m: int, representation: str, config: TrainConfig, encoder_spec=None,
                 checkpoint_dir=None, progress=None):
    """Like :func:`train` but also returns the trained :class:`ActorCritic`.

    Environment draws depend only on ``config.seed``, so baseline and
    encoder runs with the same seed face the same sequence of episodes.
    """
    policy = build_policy(task, m, representation, config, encoder_spec)
    envs = EnvPool(Env(task, m, role_rng(config.seed, "env", i)) for i in range(config.num_envs))
    featurize = featurizer(representation)
    sample_rng = role_rng(config.seed, "sample")
    shuffle_rng = role_rng(config.seed, "shuffle")
    optimizer = Adam(lr=config.lr)
    curve = TrainingCurve()
    steps = config.steps_per_epoch // config.num_envs
    for epoch in range(config.epochs):
        episodes = []
        try:
            rollout = collect_rollout(policy, envs, featurize, steps, config.gamma, sample_rng, episodes,
                                      config.action_gain)
            stats = update(policy, optimizer, rollout, config, shuffle_rng)
        except (NonFiniteLoss, FloatingPointError, ValueError) as exc:
            curve.diverged_at = epoch
            raise TrainingDiverged(epoch, curve, str(exc)) from exc
        if episodes:
            ep = np.array(episodes)
            mean_return, mean_len = float(ep[:, 0].mean()), float(ep[:, 1].mean())
        else:
            mean_return = mean_len = math.nan
        curve.records.append(EpochRecord(
            epoch, mean_return, mean_len,
            float(np.mean([s["policy_loss"] for s in stats])),
            float(np.mean([s["value_loss"] for s in stats])),
            config.seed,
        ))
        if checkpoint_dir and config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            header = dict(policy.header(), seed=config.seed, epoch=epoch, task=task, m=m)
            params_io.save(Path(checkpoint_dir) / f"checkpoint_{epoch + 1:05d}.params", policy.params, header)
        if progress is not None:
            progress(epoch, curve.records[-1])
    return policy, curve
