"""Permutation-invariant attention pooling over sets of exchangeable objects.

Each object class has two row-wise networks: a filter net scoring every
object with one number, and an abstraction net projecting every object to
``k`` features. Scores are softmax-normalised within the set and the
abstracted rows are summed with those weights. Because every network acts
on rows independently and the final reduction is a sum, the pooled vector
does not depend on object order and has size ``k`` for any set size.

Several classes are pooled separately and concatenated in class order,
followed by the (non-exchangeable) ego vector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from setattn.core import tape as T
from setattn.core.mlp import MlpSpec, init_mlp, mlp_apply, mlp_forward
from setattn.core.tape import ShapeError, Tape


@dataclass(frozen=True)
class ClassSpec:
    input_dim: int
    abstract_dim: int
    hidden: tuple = (64,)

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.abstract_dim < 1:
            raise ValueError("input_dim and abstract_dim must be >= 1")

    @property
    def filter_spec(self):
        return MlpSpec((self.input_dim, *self.hidden, 1), activation="relu")

    @property
    def abstraction_spec(self):
        return MlpSpec((self.input_dim, *self.hidden, self.abstract_dim), activation="relu")

    def to_dict(self):
        return {"input_dim": self.input_dim, "abstract_dim": self.abstract_dim, "hidden": list(self.hidden)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["input_dim"], d["abstract_dim"], tuple(d["hidden"]))


@dataclass(frozen=True)
class EncoderSpec:
    classes: tuple
    ego_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise ValueError("an encoder needs at least one object class")

    @property
    def output_dim(self):
        return sum(c.abstract_dim for c in self.classes) + self.ego_dim

    def to_dict(self):
        return {"classes": [c.to_dict() for c in self.classes], "ego_dim": self.ego_dim}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(ClassSpec.from_dict(c) for c in d["classes"]), d["ego_dim"])


def default_abstract_dim(mean_count: float, input_dim: int) -> int:
    """Output width large enough to hold the average set's raw features."""
    return max(1, math.ceil(mean_count * input_dim))


@dataclass(frozen=True)
class ObjectSet:
    """One state: per-class object arrays (m_j × n_j) plus an ego vector."""

    classes: tuple
    ego: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(
            self, "classes",
            tuple(np.asarray(c, dtype=np.float64).reshape(len(c), -1) if len(c) else np.asarray(c, dtype=np.float64)
                  for c in self.classes),
        )
        object.__setattr__(self, "ego", np.asarray(self.ego, dtype=np.float64).reshape(-1))

    def counts(self):
        return tuple(len(c) for c in self.classes)


def class_prefix(prefix, j):
    return f"{prefix}c{j}/"


def init_encoder(spec: EncoderSpec, rng: np.random.Generator, prefix="") -> dict:
    params = {}
    for j, cs in enumerate(spec.classes):
        cp = class_prefix(prefix, j)
        params.update(init_mlp(cs.filter_spec, rng, cp + "filter/"))
        params.update(init_mlp(cs.abstraction_spec, rng, cp + "abstraction/"))
    return params


# -- batching ----------------------------------------------------------------

@dataclass
class PackedSets:
    """A batch of object sets with each class's rows stacked.

    ``segments[j][r]`` is the batch index owning row ``r`` of ``objects[j]``.
    """

    objects: list
    segments: list
    counts: list
    ego: np.ndarray

    @property
    def size(self):
        return self.ego.shape[0]

    def select(self, idx) -> "PackedSets":
        idx = np.asarray(idx)
        objects, segments, counts = [], [], []
        for obj, cnt in zip(self.objects, self.counts):
            starts = np.concatenate(([0], np.cumsum(cnt)[:-1]))
            lens = cnt[idx]
            n = int(lens.sum())
            offsets = np.repeat(starts[idx] - np.concatenate(([0], np.cumsum(lens)[:-1])), lens)
            rows = offsets + np.arange(n)
            objects.append(obj[rows])
            segments.append(np.repeat(np.arange(len(idx)), lens))
            counts.append(lens)
        return PackedSets(objects, segments, counts, self.ego[idx])


def pack(states, spec: EncoderSpec) -> PackedSets:
    states = list(states)
    objects, segments, counts = [], [], []
    for j, cs in enumerate(spec.classes):
        blocks, cnt = [], np.zeros(len(states), dtype=np.int64)
        for i, s in enumerate(states):
            if len(s.classes) != len(spec.classes):
                raise ShapeError(f"state has {len(s.classes)} classes, encoder expects {len(spec.classes)}")
            block = s.classes[j]
            if len(block):
                if block.shape[1] != cs.input_dim:
                    raise ShapeError(f"class {j} objects have dim {block.shape[1]}, expected {cs.input_dim}")
                blocks.append(block)
                cnt[i] = len(block)
        objects.append(np.concatenate(blocks, axis=0) if blocks else np.zeros((0, cs.input_dim)))
        segments.append(np.repeat(np.arange(len(states)), cnt))
        counts.append(cnt)
    ego = np.zeros((len(states), spec.ego_dim))
    for i, s in enumerate(states):
        if s.ego.size != spec.ego_dim:
            raise ShapeError(f"ego has dim {s.ego.size}, expected {spec.ego_dim}")
        ego[i] = s.ego
    return PackedSets(objects, segments, counts, ego)


def concat_packed(batches) -> PackedSets:
    batches = list(batches)
    objects, segments, counts = [], [], []
    for j in range(len(batches[0].objects)):
        objects.append(np.concatenate([b.objects[j] for b in batches], axis=0))
        offsets = np.cumsum([0] + [b.size for b in batches[:-1]])
        segments.append(np.concatenate([b.segments[j] + o for b, o in zip(batches, offsets)]))
        counts.append(np.concatenate([b.counts[j] for b in batches]))
    return PackedSets(objects, segments, counts, np.concatenate([b.ego for b in batches], axis=0))


# -- forward passes ----------------------------------------------------------

def encode_batch(tape: Tape, params: dict, spec: EncoderSpec, batch: PackedSets, prefix="") -> T.Node:
    """Encode every set in ``batch``; returns a B × output_dim node."""
    blocks = []
    n = batch.size
    for j, cs in enumerate(spec.classes):
        cp = class_prefix(prefix, j)
        if batch.objects[j].shape[0] == 0:
            blocks.append(tape.const(np.zeros((n, cs.abstract_dim))))
            continue
        X = tape.const(batch.objects[j])
        y = mlp_forward(params, cs.filter_spec, X, tape, cp + "filter/")
        w = T.segment_softmax(y, batch.segments[j], n)
        Z = mlp_forward(params, cs.abstraction_spec, X, tape, cp + "abstraction/")
        blocks.append(T.segment_sum(Z * w, batch.segments[j], n))
    if spec.ego_dim:
        blocks.append(tape.const(batch.ego))
    return T.concat_cols(blocks)


def _objects(objects, cs: ClassSpec):
    X = np.asarray(objects, dtype=np.float64)
    if X.size == 0:
        return np.zeros((0, cs.input_dim))
    X = np.atleast_2d(X)
    if X.shape[1] != cs.input_dim:
        raise ShapeError(f"objects have dim {X.shape[1]}, expected {cs.input_dim}")
    return X


def attention_weights(params: dict, cs: ClassSpec, objects, prefix="") -> np.ndarray:
    X = _objects(objects, cs)
    if len(X) == 0:
        raise ValueError("attention weights are undefined for an empty set")
    tape = Tape(record=False)
    y = mlp_forward(params, cs.filter_spec, X, tape, prefix + "filter/")
    return T.segment_softmax(y, np.zeros(len(X), dtype=np.int64), 1).value[:, 0]


def encode_class(params: dict, cs: ClassSpec, objects, prefix="") -> np.ndarray:
    """Weighted sum of abstracted objects; the zero vector for an empty set."""
    X = _objects(objects, cs)
    if len(X) == 0:
        return np.zeros(cs.abstract_dim)
    w = attention_weights(params, cs, X, prefix)
    Z = mlp_apply(params, cs.abstraction_spec, X, prefix + "abstraction/")
    return (Z * w[:, None]).sum(axis=0)


def encode_phi_rho(params: dict, cs: ClassSpec, objects, prefix="") -> np.ndarray:
    """Same pooled vector, computed as rho(sum of phi(object)).

    phi(s) = abstraction(s) * exp(filter(s) - c) and rho divides the
    accumulated sum by sum(exp(filter(s) - c)); c is the largest filter
    score, which only rescales numerator and denominator together.
    """
    X = _objects(objects, cs)
    if len(X) == 0:
        raise ValueError("the factored form is undefined for an empty set")
    y = mlp_apply(params, cs.filter_spec, X, prefix + "filter/")[:, 0]
    Z = mlp_apply(params, cs.abstraction_spec, X, prefix + "abstraction/")
    c = y.max()
    acc = np.zeros(cs.abstract_dim)
    norm = 0.0
    for z_j, y_j in zip(Z, y):
        e = math.exp(y_j - c)
        acc += z_j * e
        norm += e
    return acc / norm


def encode_state(params: dict, spec: EncoderSpec, state: ObjectSet, prefix="") -> np.ndarray:
    tape = Tape(record=False)
    return encode_batch(tape, params, spec, pack([state], spec), prefix).value[0]


def encoder_gradients(params: dict, spec: EncoderSpec, state: ObjectSet, upstream, prefix="") -> dict:
    """Gradient of ``upstream . encode_state(state)`` w.r.t. every encoder parameter."""
    upstream = np.asarray(upstream, dtype=np.float64).reshape(1, -1)
    if upstream.shape[1] != spec.output_dim:
        raise ShapeError(f"upstream has dim {upstream.shape[1]}, encoder output is {spec.output_dim}")
    tape = Tape()
    for name, value in params.items():
        if name.startswith(prefix):
            tape.param(name, value)
    out = encode_batch(tape, params, spec, pack([state], spec), prefix)
    loss = T.total(out * upstream)
    return T.backward(tape, loss)
