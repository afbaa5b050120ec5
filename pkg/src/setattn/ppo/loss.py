from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from setattn.core import tape as T
from setattn.core.tape import Tape
from setattn.ppo.policy import ActorCritic, log_prob_node


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass
class Minibatch:
    inputs: object          # flat array or PackedSets
    actions: np.ndarray     # B x d, raw (unscaled) policy actions
    logp_old: np.ndarray    # B
    advantages: np.ndarray  # B
    returns: np.ndarray     # B


def clipped_surrogate(ratio, advantages, eps):
    """Per-sample min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    return np.minimum(ratio * advantages, np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantages)


def ppo_clip_loss(tape: Tape, policy: ActorCritic, batch: Minibatch, eps=0.1, value_coef=0.5):
    """Clipped policy surrogate plus squared value error, recorded on ``tape``.

    Returns the scalar loss node and a dict of diagnostics. No entropy term.
    """
    mean, log_std, value = policy.forward(tape, batch.inputs)
    logp = log_prob_node(batch.actions, mean, log_std)
    with np.errstate(over="ignore"):  # overflow is reported just below
        ratio = T.exp(logp - batch.logp_old.reshape(-1, 1))
    if not np.all(np.isfinite(ratio.value)):
        bad = np.flatnonzero(~np.isfinite(ratio.value[:, 0]))
        raise NonFiniteLoss(f"non-finite probability ratio at batch rows {bad[:10].tolist()}")
    adv = tape.const(batch.advantages.reshape(-1, 1))
    surrogate = T.minimum(ratio * adv, T.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)
    policy_loss = -T.mean(surrogate)
    value_loss = T.mean(T.square(value - batch.returns.reshape(-1, 1)))
    loss = policy_loss + T.scale(value_loss, value_coef)
    stats = {
        "policy_loss": float(policy_loss.value.item()),
        "value_loss": float(value_loss.value.item()),
        "clip_fraction": float(np.mean(np.abs(ratio.value - 1.0) > eps)),
    }
    if not np.isfinite(loss.value.item()):
        raise NonFiniteLoss(f"non-finite loss {stats}")
    return loss, stats


class Adam:
    def __init__(self, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[name] = params[name] - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
