from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from setattn.core import tape as T
from setattn.core.tape import ShapeError, Tape


@dataclass(frozen=True)
class MlpSpec:
    """Fully connected net. ``widths`` includes the input and output sizes.

    ``activation`` is applied after every hidden layer; the output layer
    uses ``output_activation``.
    """

    widths: tuple
    activation: str = "relu"
    slope: float = 0.01
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("an MLP needs at least one layer (two widths)")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"all widths must be >= 1, got {self.widths}")
        for kind in (self.activation, self.output_activation):
            if kind not in T.ACTIVATIONS:
                raise ValueError(f"unknown activation {kind!r}")
        if self.activation == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise ValueError("leaky_relu slope must lie in (0, 1)")

    @property
    def n_layers(self):
        return len(self.widths) - 1

    @property
    def in_dim(self):
        return self.widths[0]

    @property
    def out_dim(self):
        return self.widths[-1]

    def n_params(self):
        return sum((a + 1) * b for a, b in zip(self.widths[:-1], self.widths[1:]))

    def to_dict(self):
        return {
            "widths": list(self.widths),
            "activation": self.activation,
            "slope": self.slope,
            "output_activation": self.output_activation,
        }


def layer_names(prefix, spec: MlpSpec):
    for i in range(spec.n_layers):
        yield f"{prefix}W{i}", f"{prefix}b{i}"


def init_mlp(spec: MlpSpec, rng: np.random.Generator, prefix="", out_scale=1.0) -> dict:
    """He-scaled uniform weights (unit-variance uniform times sqrt(2/fan_in)), zero biases."""
    params = {}
    for i, (wn, bn) in enumerate(layer_names(prefix, spec)):
        fan_in, fan_out = spec.widths[i], spec.widths[i + 1]
        w = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        if i == spec.n_layers - 1:
            w = w * out_scale
        params[wn] = w
        params[bn] = np.zeros((1, fan_out))
    return params


def affine_forward(X, W, b) -> np.ndarray:
    X, W = np.atleast_2d(np.asarray(X, float)), np.atleast_2d(np.asarray(W, float))
    b = np.asarray(b, float).reshape(1, -1)
    tape = Tape(record=False)
    return T.affine(tape.const(X), tape.const(W), tape.const(b)).value


def activation_forward(X, kind, slope=0.01) -> np.ndarray:
    return T.activation_values(np.asarray(X, dtype=np.float64), kind, slope)


def mlp_forward(params: dict, spec: MlpSpec, X, tape: Tape, prefix="") -> T.Node:
    """Apply the net row by row; every parameter is registered on ``tape``."""
    h = X if isinstance(X, T.Node) else tape.const(np.atleast_2d(X))
    if h.value.ndim != 2 or h.value.shape[1] != spec.in_dim:
        raise ShapeError(f"MLP expects {spec.in_dim} input columns, got shape {h.value.shape}")
    last = spec.n_layers - 1
    for i, (wn, bn) in enumerate(layer_names(prefix, spec)):
        try:
            w, b = params[wn], params[bn]
        except KeyError as exc:
            raise ShapeError(f"missing parameter {exc.args[0]!r}") from None
        if w.shape != (spec.widths[i], spec.widths[i + 1]):
            raise ShapeError(f"{wn} has shape {w.shape}, spec wants {(spec.widths[i], spec.widths[i + 1])}")
        h = T.affine(h, tape.param(wn, w), tape.param(bn, b))
        h = T.activation(h, spec.output_activation if i == last else spec.activation, spec.slope)
    return h


def mlp_apply(params: dict, spec: MlpSpec, X, prefix="") -> np.ndarray:
    """Forward pass without recording."""
    return mlp_forward(params, spec, X, Tape(record=False), prefix).value
