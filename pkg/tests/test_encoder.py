import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setattn.core import ShapeError, Tape, mlp_apply
from setattn.encoder import (
    ClassSpec,
    EncoderSpec,
    ObjectSet,
    attention_weights,
    default_abstract_dim,
    encode_batch,
    encode_class,
    encode_phi_rho,
    encode_state,
    encoder_gradients,
    init_encoder,
    pack,
)

from conftest import central_difference, max_relative_error

C0 = "c0/"


def linear_class(n, k):
    """One-layer (affine) filter and abstraction nets."""
    return ClassSpec(n, k, hidden=())


def tiny_encoder(rng, n=2, k=3, hidden=(5,)):
    spec = EncoderSpec((ClassSpec(n, k, hidden),))
    return spec, init_encoder(spec, rng)


# -- attention weights -------------------------------------------------------------

def test_single_object_weight_is_one(rng):
    spec, params = tiny_encoder(rng)
    assert attention_weights(params, spec.classes[0], rng.normal(size=(1, 2)), C0).tolist() == [1.0]


def test_identical_objects_share_weight(rng):
    spec, params = tiny_encoder(rng)
    row = rng.normal(size=(1, 2))
    np.testing.assert_allclose(attention_weights(params, spec.classes[0], np.vstack([row, row]), C0),
                               [0.5, 0.5], atol=1e-15)


def test_identity_filter_closed_form():
    cs = linear_class(1, 1)
    params = {"c0/filter/W0": np.ones((1, 1)), "c0/filter/b0": np.zeros((1, 1)),
              "c0/abstraction/W0": np.ones((1, 1)), "c0/abstraction/b0": np.zeros((1, 1))}
    w = attention_weights(params, cs, [[0.0], [math.log(3.0)]], C0)
    np.testing.assert_allclose(w, [0.25, 0.75], atol=1e-15)


def test_attention_rejects_empty(rng):
    spec, params = tiny_encoder(rng)
    with pytest.raises(ValueError):
        attention_weights(params, spec.classes[0], np.zeros((0, 2)), C0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_weights_normalised(m, seed):
    rng = np.random.default_rng(seed)
    spec, params = tiny_encoder(rng)
    w = attention_weights(params, spec.classes[0], rng.normal(size=(m, 2)) * 3, C0)
    assert abs(w.sum() - 1.0) <= 1e-12
    assert np.all(w > 0) and np.all(w <= 1)


# -- encode_class / encode_phi_rho ----------------------------------------------------

def test_single_object_passes_abstraction_through(rng):
    spec, params = tiny_encoder(rng)
    x = rng.normal(size=(1, 2))
    expected = mlp_apply(params, spec.classes[0].abstraction_spec, x, "c0/abstraction/")[0]
    np.testing.assert_array_equal(encode_class(params, spec.classes[0], x, C0), expected)
    np.testing.assert_array_equal(encode_phi_rho(params, spec.classes[0], x, C0), expected)


@pytest.mark.parametrize("m", [2, 5, 9])
def test_identical_objects_pool_to_abstraction(rng, m):
    spec, params = tiny_encoder(rng)
    x = rng.normal(size=(1, 2))
    expected = mlp_apply(params, spec.classes[0].abstraction_spec, x, "c0/abstraction/")[0]
    objs = np.repeat(x, m, axis=0)
    np.testing.assert_allclose(encode_class(params, spec.classes[0], objs, C0), expected, atol=1e-14)
    np.testing.assert_allclose(encode_phi_rho(params, spec.classes[0], objs, C0), expected, atol=1e-14)


def test_linear_nets_hand_evaluation():
    # filter scores y = x1, abstraction = identity; objects e1, e2
    # w = [e/(e+1), 1/(e+1)], s* = w[0]*e1 + w[1]*e2
    cs = linear_class(2, 2)
    params = {"c0/filter/W0": np.array([[1.0], [0.0]]), "c0/filter/b0": np.zeros((1, 1)),
              "c0/abstraction/W0": np.eye(2), "c0/abstraction/b0": np.zeros((1, 2))}
    e = math.e
    expected = [e / (e + 1.0), 1.0 / (e + 1.0)]
    objs = [[1.0, 0.0], [0.0, 1.0]]
    np.testing.assert_allclose(encode_class(params, cs, objs, C0), expected, atol=1e-15)
    np.testing.assert_allclose(encode_phi_rho(params, cs, objs, C0), expected, atol=1e-15)


def test_empty_class_encodes_to_zero(rng):
    spec, params = tiny_encoder(rng)
    assert encode_class(params, spec.classes[0], np.zeros((0, 2)), C0).tolist() == [0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        encode_phi_rho(params, spec.classes[0], np.zeros((0, 2)), C0)


def test_phi_rho_matches_on_random_inputs():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(100):
        spec, params = tiny_encoder(rng, n=3, k=4, hidden=(16,))
        objs = rng.normal(size=(int(rng.integers(2, 11)), 3)) * 2
        a = encode_class(params, spec.classes[0], objs, C0)
        b = encode_phi_rho(params, spec.classes[0], objs, C0)
        worst = max(worst, float(np.abs(a - b).max()))
    assert worst <= 1e-9


# -- encode_state ----------------------------------------------------------------------

def test_one_class_no_ego_equals_encode_class(rng):
    spec, params = tiny_encoder(rng)
    objs = rng.normal(size=(4, 2))
    np.testing.assert_allclose(encode_state(params, spec, ObjectSet((objs,))),
                               encode_class(params, spec.classes[0], objs, C0), atol=1e-15)


def test_two_class_output_length(rng):
    spec = EncoderSpec((ClassSpec(2, 2, (4,)), ClassSpec(3, 2, (4,))), ego_dim=2)
    params = init_encoder(spec, rng)
    out = encode_state(params, spec, ObjectSet((rng.normal(size=(3, 2)), rng.normal(size=(1, 3))), ego=[1, 2]))
    assert out.shape == (6,)
    assert out[-2:].tolist() == [1.0, 2.0]


def test_within_class_permutation_vs_cross_class_swap(rng):
    spec = EncoderSpec((ClassSpec(2, 3, (8,)), ClassSpec(2, 3, (8,))), ego_dim=1)
    params = init_encoder(spec, rng)
    food, poison = rng.normal(size=(4, 2)), rng.normal(size=(3, 2))
    base = encode_state(params, spec, ObjectSet((food, poison), ego=[0.5]))
    permuted = encode_state(params, spec, ObjectSet((food[[2, 0, 3, 1]], poison[[1, 2, 0]]), ego=[0.5]))
    assert np.abs(base - permuted).max() <= 1e-9
    swapped_food = np.vstack([food[1:], poison[:1]])
    swapped_poison = np.vstack([food[:1], poison[1:]])
    swapped = encode_state(params, spec, ObjectSet((swapped_food, swapped_poison), ego=[0.5]))
    assert np.abs(base - swapped).max() > 1e-6


def test_state_shape_errors(rng):
    spec = EncoderSpec((ClassSpec(2, 2, (4,)),), ego_dim=1)
    params = init_encoder(spec, rng)
    with pytest.raises(ShapeError):
        encode_state(params, spec, ObjectSet((np.zeros((2, 3)),), ego=[0.0]))
    with pytest.raises(ShapeError):
        encode_state(params, spec, ObjectSet((np.zeros((2, 2)), np.zeros((1, 2))), ego=[0.0]))
    with pytest.raises(ShapeError):
        encode_state(params, spec, ObjectSet((np.zeros((2, 2)),), ego=[0.0, 1.0]))


def test_output_dim_independent_of_cardinality(rng):
    spec = EncoderSpec((ClassSpec(2, 3, (8,)), ClassSpec(4, 5, (8,))), ego_dim=2)
    params = init_encoder(spec, rng)
    for m0 in range(0, 21):
        for m1 in (0, 1, 7, 20):
            s = ObjectSet((rng.normal(size=(m0, 2)), rng.normal(size=(m1, 4))), ego=[0.0, 1.0])
            out = encode_state(params, spec, s)
            assert out.shape == (spec.output_dim,)
            if m0 == 0:
                assert not out[:3].any()
            if m1 == 0:
                assert not out[3:8].any()


def test_batched_encoding_matches_single(rng):
    spec = EncoderSpec((ClassSpec(2, 3, (8,)), ClassSpec(2, 2, (8,))), ego_dim=2)
    params = init_encoder(spec, rng)
    states = [ObjectSet((rng.normal(size=(int(rng.integers(0, 5)), 2)), rng.normal(size=(int(rng.integers(0, 4)), 2))),
                        ego=rng.normal(size=2)) for _ in range(12)]
    batch = pack(states, spec)
    out = encode_batch(Tape(record=False), params, spec, batch).value
    for i, s in enumerate(states):
        np.testing.assert_allclose(out[i], encode_state(params, spec, s), atol=1e-14)
    idx = np.array([5, 0, 11, 5])
    sub = encode_batch(Tape(record=False), params, spec, batch.select(idx)).value
    np.testing.assert_allclose(sub, out[idx], atol=1e-14)


def test_default_abstract_dim():
    assert default_abstract_dim(3, 2) == 6
    assert default_abstract_dim(2.5, 3) == 8


# -- gradients ---------------------------------------------------------------------------

def test_zero_upstream_gives_zero_gradients(rng):
    spec, params = tiny_encoder(rng)
    grads = encoder_gradients(params, spec, ObjectSet((rng.normal(size=(3, 2)),)), np.zeros(3))
    assert set(grads) == set(params)
    assert all(not g.any() for g in grads.values())


def test_single_object_linear_abstraction_gradient(rng):
    spec = EncoderSpec((linear_class(3, 2),))
    params = init_encoder(spec, rng)
    x = rng.normal(size=(1, 3))
    u = np.array([0.7, -1.3])
    grads = encoder_gradients(params, spec, ObjectSet((x,)), u)
    np.testing.assert_allclose(grads["c0/abstraction/W0"], np.outer(x[0], u), atol=1e-15)
    np.testing.assert_allclose(grads["c0/abstraction/b0"], u[None, :], atol=1e-15)
    # weight of a lone object is 1 whatever the filter says
    assert not grads["c0/filter/W0"].any()


def test_encoder_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    spec = EncoderSpec((ClassSpec(2, 3, (4,)), ClassSpec(3, 2, (4,))), ego_dim=1)
    params = init_encoder(spec, rng)
    state = ObjectSet((rng.normal(size=(4, 2)), rng.normal(size=(2, 3))), ego=[0.3])
    u = rng.normal(size=spec.output_dim)
    analytic = encoder_gradients(params, spec, state, u)
    numeric = central_difference(lambda p: float(encode_state(p, spec, state) @ u), params)
    assert max_relative_error(analytic, numeric) <= 1e-4


def test_gradients_invariant_under_permutation(rng):
    spec = EncoderSpec((ClassSpec(2, 3, (6,)),), ego_dim=0)
    params = init_encoder(spec, rng)
    objs = rng.normal(size=(7, 2))
    u = rng.normal(size=3)
    g1 = encoder_gradients(params, spec, ObjectSet((objs,)), u)
    g2 = encoder_gradients(params, spec, ObjectSet((objs[rng.permutation(7)],)), u)
    for k in g1:
        np.testing.assert_allclose(g1[k], g2[k], rtol=0, atol=1e-8)
