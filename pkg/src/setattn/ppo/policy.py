"""Diagonal-Gaussian actor and separate critic over either input representation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from setattn.core import tape as T
from setattn.core.mlp import MlpSpec, init_mlp, mlp_forward
from setattn.core.tape import ShapeError, Tape
from setattn.encoder import EncoderSpec, PackedSets, encode_batch, init_encoder, pack

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
LOG_2PI = math.log(2.0 * math.pi)

REPRESENTATIONS = ("baseline", "encoder")


@dataclass
class ActorCritic:
    """Policy and value networks.

    With ``representation == "encoder"`` the actor and the critic each own
    an attention encoder whose output feeds their MLP; encoder parameters
    are trained by the same loss as everything else.
    """

    representation: str
    input_dim: int
    action_dim: int
    encoder_spec: EncoderSpec | None = None
    hidden: tuple = (64, 64, 64, 64)
    slope: float = 0.01
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of {REPRESENTATIONS}, got {self.representation!r}")
        if self.representation == "encoder" and self.encoder_spec is None:
            raise ValueError("encoder representation needs an encoder spec")
        self.hidden = tuple(self.hidden)

    @classmethod
    def from_header(cls, header, params):
        """Rebuild a policy from a checkpoint header and its parameters."""
        enc = header.get("encoder")
        policy = cls(header["representation"], header["input_dim"], header["action_dim"],
                     EncoderSpec.from_dict(enc) if enc else None, tuple(header["hidden"]), header["slope"])
        expected = set(policy.init_params(np.random.default_rng(0)).params)
        if set(params) != expected:
            raise ValueError(f"checkpoint parameters do not match header: {sorted(set(params) ^ expected)}")
        policy.params = dict(params)
        return policy

    @property
    def trunk_in(self):
        return self.encoder_spec.output_dim if self.representation == "encoder" else self.input_dim

    @property
    def actor_spec(self):
        return MlpSpec((self.trunk_in, *self.hidden, self.action_dim), "leaky_relu", self.slope)

    @property
    def critic_spec(self):
        return MlpSpec((self.trunk_in, *self.hidden, 1), "leaky_relu", self.slope)

    def init_params(self, rng: np.random.Generator, log_std_init=-0.5, mean_out_scale=0.01):
        params = {}
        if self.representation == "encoder":
            params.update(init_encoder(self.encoder_spec, rng, "actor/enc/"))
        params.update(init_mlp(self.actor_spec, rng, "actor/mlp/", out_scale=mean_out_scale))
        params["actor/log_std"] = np.full((1, self.action_dim), float(log_std_init))
        if self.representation == "encoder":
            params.update(init_encoder(self.encoder_spec, rng, "critic/enc/"))
        params.update(init_mlp(self.critic_spec, rng, "critic/mlp/"))
        self.params = params
        return self

    def header(self):
        return {
            "representation": self.representation,
            "input_dim": self.input_dim,
            "action_dim": self.action_dim,
            "encoder": self.encoder_spec.to_dict() if self.encoder_spec else None,
            "hidden": list(self.hidden),
            "activation": "leaky_relu",
            "slope": self.slope,
        }

    # -- inputs --------------------------------------------------------------

    def batch(self, items):
        """Stack per-state inputs (flat vectors or ObjectSets) into one batch."""
        if self.representation == "encoder":
            return pack(items, self.encoder_spec)
        X = np.asarray(items, dtype=np.float64).reshape(len(items), -1)
        if X.shape[1] != self.input_dim:
            raise ShapeError(f"baseline input has dim {X.shape[1]}, expected {self.input_dim}")
        return X

    @staticmethod
    def select(batch, idx):
        return batch.select(idx) if isinstance(batch, PackedSets) else batch[idx]

    def _features(self, tape, batch, role):
        if self.representation == "encoder":
            return encode_batch(tape, self.params, self.encoder_spec, batch, f"{role}/enc/")
        return tape.const(batch)

    # -- forward -------------------------------------------------------------

    def forward(self, tape: Tape, batch):
        """Return ``(mean, log_std, value)`` nodes; log_std is clamped and 1 x d."""
        for name, value in self.params.items():
            tape.param(name, value)
        h = self._features(tape, batch, "actor")
        if not np.all(np.isfinite(h.value)):
            raise ValueError("non-finite policy input")
        mean = mlp_forward(self.params, self.actor_spec, h, tape, "actor/mlp/")
        log_std = T.clip(tape.params["actor/log_std"], LOG_STD_MIN, LOG_STD_MAX)
        hc = self._features(tape, batch, "critic")
        value = mlp_forward(self.params, self.critic_spec, hc, tape, "critic/mlp/")
        return mean, log_std, value

    def evaluate(self, batch):
        """Forward without recording: ``(mean, std, value)`` arrays."""
        mean, log_std, value = self.forward(Tape(record=False), batch)
        return mean.value, np.exp(log_std.value[0]), value.value[:, 0]

    def value(self, batch):
        tape = Tape(record=False)
        hc = self._features(tape, batch, "critic")
        return mlp_forward(self.params, self.critic_spec, hc, tape, "critic/mlp/").value[:, 0]


def policy_forward(policy: ActorCritic, representation):
    """Mean and standard deviation of the action distribution for one input."""
    if policy.representation == "baseline":
        x = np.asarray(representation, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite representation")
    mean, std, _ = policy.evaluate(policy.batch([representation]))
    return mean[0], std


def gaussian_log_prob(action, mean, std):
    action, mean, std = (np.asarray(a, dtype=np.float64) for a in (action, mean, std))
    z = (action - mean) / std
    return -0.5 * np.sum(z * z, axis=-1) - np.sum(np.log(std)) - 0.5 * mean.shape[-1] * LOG_2PI


def sample_action(mean, std, rng: np.random.Generator):
    mean = np.asarray(mean, dtype=np.float64)
    action = mean + np.asarray(std) * rng.standard_normal(mean.shape)
    return action, gaussian_log_prob(action, mean, std)


def log_prob_node(actions, mean: T.Node, log_std: T.Node) -> T.Node:
    """Diagonal-Gaussian log density of fixed ``actions`` as a B x 1 node."""
    tape = mean.tape
    z = (tape.const(actions) - mean) * T.exp(-log_std)
    d = mean.value.shape[1]
    return T.scale(T.row_sum(T.square(z)), -0.5) - T.total(log_std) - 0.5 * d * LOG_2PI
