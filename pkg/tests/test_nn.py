import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarm_rl.errors import NumericError, ShapeError
from swarm_rl.nn import (
    SGD,
    Adam,
    AdamState,
    Layout,
    Network,
    ParamGrad,
    ParamVector,
    adam_step,
    backward,
    flatten,
    forward,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
    unflatten,
)

from conftest import assert_grad_close, central_diff

ACTS = {"identity": lambda z: z, "relu": lambda z: np.maximum(z, 0.0), "tanh": np.tanh}


def reference_forward(net, x):
    """Independent recomputation with explicit loops over units."""
    a = list(map(float, x))
    for layer in net.layers:
        w, b = layer.weights, layer.biases
        z = []
        for o in range(w.shape[0]):
            s = b[o]
            for i in range(w.shape[1]):
                s += w[o, i] * a[i]
            z.append(s)
        a = [float(ACTS[layer.activation](np.float64(v))) for v in z]
    return np.array(a)


layouts = st.lists(st.integers(1, 6), min_size=2, max_size=4).flatmap(
    lambda sizes: st.tuples(
        st.just(sizes), st.lists(st.sampled_from(["identity", "relu", "tanh"]), min_size=len(sizes) - 1, max_size=len(sizes) - 1)
    )
)


def test_layout_counts_parameters():
    assert Network([4, 8, 2], ["tanh", "identity"]).n_params == 4 * 8 + 8 + 8 * 2 + 2 == 58


@pytest.mark.parametrize(
    "sizes,acts",
    [([3], []), ([3, 0], ["tanh"]), ([3, 2], ["tanh", "relu"]), ([3, 2], ["sigmoid"])],
)
def test_layout_rejects_bad_shapes(sizes, acts):
    with pytest.raises(ShapeError):
        Layout(tuple(sizes), tuple(acts))


def test_zero_relu_net_outputs_zero(rng):
    net = Network([3, 5, 2], ["relu", "relu"])
    assert np.all(net.forward(rng.normal(size=(7, 3))) == 0.0)


def test_identity_layer_passes_input_through(rng):
    net = Network([3, 3], ["identity"])
    net.layers[0].weights[...] = np.eye(3)
    x = rng.normal(size=3)
    np.testing.assert_array_equal(net.forward(x), x)


def test_forward_matches_loop_reference():
    net = Network([3, 4, 2], ["tanh", "identity"], rng=np.random.default_rng(7))
    x = np.array([0.3, -1.2, 0.8])
    np.testing.assert_allclose(net.forward(x), reference_forward(net, x), rtol=1e-12, atol=1e-14)


def test_batched_forward_matches_rows(rng):
    net = Network([4, 6, 3], ["relu", "tanh"], rng=rng)
    x = rng.normal(size=(5, 4))
    np.testing.assert_allclose(net.forward(x), np.stack([net.forward(r) for r in x]), rtol=1e-12, atol=1e-15)


def test_forward_rejects_wrong_input_size():
    with pytest.raises(ShapeError):
        Network([3, 2], ["tanh"]).forward(np.zeros(4))


def test_init_within_fan_in_bounds():
    net = Network([16, 4, 1], ["tanh", "identity"], rng=np.random.default_rng(0))
    assert np.abs(net.layers[0].weights).max() <= 1 / 4
    assert np.abs(net.layers[1].weights).max() <= 1 / 2


def test_backward_zero_upstream_gives_zero(rng):
    net = Network([3, 4, 2], ["tanh", "identity"], rng=rng)
    g = backward(net, rng.normal(size=(2, 3)), np.zeros((2, 2)))
    assert isinstance(g, ParamGrad)
    assert not g.values.any()


def test_linear_layer_gradient_row_is_input():
    net = Network([3, 2], ["identity"], rng=np.random.default_rng(1))
    x = np.array([0.5, -2.0, 3.0])
    g = backward(net, x, np.array([1.0, 0.0]))
    probe = Network([3, 2], ["identity"])
    probe.unflatten(g)
    np.testing.assert_array_equal(probe.layers[0].weights[0], x)
    np.testing.assert_array_equal(probe.layers[0].weights[1], 0.0)
    np.testing.assert_array_equal(probe.layers[0].biases, [1.0, 0.0])


def _fd_check(net, x, upstream):
    g = backward(net, x, upstream).values
    fd = central_diff(lambda: float(np.sum(net.forward(x) * upstream)), net.params)
    assert_grad_close(g, fd)


@settings(max_examples=40, deadline=None)
@given(layouts, st.integers(0, 2**31 - 1))
def test_backward_matches_finite_differences(layout, seed):
    sizes, acts = layout
    r = np.random.default_rng(seed)
    net = Network(sizes, acts, rng=r)
    x = r.normal(size=(3, sizes[0]))
    _fd_check(net, x, r.normal(size=(3, sizes[-1])))


@settings(max_examples=40, deadline=None)
@given(layouts, st.integers(0, 2**31 - 1))
def test_flatten_unflatten_round_trip(layout, seed):
    sizes, acts = layout
    net = Network(sizes, acts, rng=np.random.default_rng(seed))
    v = flatten(net)
    other = Network(sizes, acts)
    unflatten(other, v)
    assert other.flatten().same_as(v)
    np.testing.assert_array_equal(other.params, net.params)


def test_unflatten_zero_gives_bias_only_map(rng):
    net = Network([3, 4, 2], ["tanh", "identity"], rng=rng)
    net.unflatten(ParamVector(np.zeros(net.n_params), net.layout))
    assert not net.forward(rng.normal(size=3)).any()


def test_unflatten_rejects_other_layout():
    net = Network([3, 2], ["tanh"])
    with pytest.raises(ShapeError):
        net.unflatten(Network([2, 3], ["tanh"]).flatten())


def test_param_vector_is_a_frozen_copy(rng):
    net = Network([2, 2], ["tanh"], rng=rng)
    v = net.flatten()
    net.params += 1.0
    assert not np.array_equal(v.values, net.params)
    with pytest.raises(ValueError):
        v.values[0] = 3.0


def test_forward_is_deterministic(rng):
    net = Network([4, 8, 2], ["relu", "identity"], rng=rng)
    x = rng.normal(size=(6, 4))
    assert net.forward(x).tobytes() == net.forward(x).tobytes()


def test_sgd_arithmetic():
    lay = Layout((1, 1), ("identity",))
    v = ParamVector([1.0, 1.0], lay)
    out = sgd_step(v, ParamGrad([2.0, -2.0], lay), 0.1)
    np.testing.assert_allclose(out.values, [0.8, 1.2])


@pytest.mark.parametrize("opt", [SGD(0.1), Adam(0.1, 4)])
def test_zero_gradient_leaves_params(opt):
    p = np.array([1.0, -2.0, 3.0, 0.5])
    opt.step(p, np.zeros(4))
    np.testing.assert_array_equal(p, [1.0, -2.0, 3.0, 0.5])


def test_adam_matches_hand_computed_moments():
    lay = Layout((1, 1), ("identity",))
    g = np.array([0.3, -4.0])
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    v = ParamVector([1.0, 1.0], lay)
    state = AdamState.zeros(2)
    m = np.zeros(2)
    s = np.zeros(2)
    theta = np.array([1.0, 1.0])
    for t in range(1, 4):
        v = adam_step(v, ParamGrad(g, lay), lr, state)
        m = b1 * m + (1 - b1) * g
        s = b2 * s + (1 - b2) * g * g
        theta = theta - lr * (m / (1 - b1**t)) / (np.sqrt(s / (1 - b2**t)) + eps)
        np.testing.assert_allclose(v.values, theta, rtol=1e-12)
    # first step of constant g moves by lr against the sign of g
    first = adam_step(ParamVector([0.0, 0.0], lay), ParamGrad(g, lay), lr, AdamState.zeros(2))
    np.testing.assert_allclose(first.values, -np.sign(g) * lr, rtol=1e-6)


def test_optimizer_rejects_non_finite_gradient():
    with pytest.raises(NumericError):
        SGD(0.1).step(np.zeros(2), np.array([math.nan, 0.0]))
    with pytest.raises(NumericError):
        Adam(0.1, 2).step(np.zeros(2), np.array([math.inf, 0.0]))


def test_checkpoint_round_trip(tmp_path, rng):
    net = Network([3, 5, 2], ["relu", "identity"], rng=rng)
    loaded = load_checkpoint(save_checkpoint(net, tmp_path / "net.ckpt"))
    assert loaded.layout == net.layout
    np.testing.assert_array_equal(loaded.params, net.params)


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "bad.ckpt"
    p.write_bytes(b"hello\n\x00")
    with pytest.raises(ShapeError):
        load_checkpoint(p)


def test_module_level_forward():
    net = Network([2, 1], ["identity"])
    net.params[...] = [1.0, 2.0, 0.5]
    assert forward(net, np.array([1.0, 1.0]))[0] == 3.5
