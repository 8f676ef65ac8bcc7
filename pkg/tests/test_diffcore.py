import numpy as np
import pytest

from opaclab.diffcore import (
    MLPSpec,
    OptimizerConfig,
    ParamStore,
    backward,
    forward,
    forward_cached,
    init_params,
    load_checkpoint,
    optimizer_step,
    polyak_update,
    reset_params,
    save_checkpoint,
    value_and_grad,
)
from opaclab.errors import InputError, NumericError

from oracles import fd_gradient, rel_error


def test_init_is_deterministic():
    spec = MLPSpec(1, (1,), 1)
    a = init_params(spec, np.random.default_rng(3))
    b = init_params(spec, np.random.default_rng(3))
    assert np.array_equal(a.flat, b.flat)


@pytest.mark.parametrize("hidden", [(1,), (5, 7), (16, 16, 3)])
def test_biases_start_at_zero(hidden):
    spec = MLPSpec(4, hidden, 2)
    store = init_params(spec, np.random.default_rng(0))
    for i in range(spec.n_layers):
        assert np.all(store.params[f"b{i}"] == 0)


def test_param_count():
    spec = MLPSpec(4, (256, 256), 2)
    assert spec.param_count() == 4 * 256 + 256 + 256 * 256 + 256 + 256 * 2 + 2 == 67_586
    assert init_params(spec, np.random.default_rng(0)).size == 67_586


def test_weights_uniform_in_fan_in_bound():
    spec = MLPSpec(9, (64,), 1)
    store = init_params(spec, np.random.default_rng(0))
    assert np.abs(store.params["W0"]).max() <= 1 / 3
    assert np.abs(store.params["W1"]).max() <= 1 / 8


def test_zero_weights_output_bias():
    spec = MLPSpec(3, (4,), 2)
    store = ParamStore(spec.layer_shapes())
    store.params["b1"][...] = [0.5, -2.0]
    x = np.random.default_rng(0).normal(size=(6, 3))
    assert np.array_equal(forward(store, spec, x), np.tile([0.5, -2.0], (6, 1)))


def test_one_unit_tanh():
    spec = MLPSpec(1, (1,), 1, "tanh")
    store = ParamStore(spec.layer_shapes())
    store.params["W0"][...] = 1.0
    store.params["W1"][...] = 1.0
    out = forward(store, spec, np.array([0.5]))
    assert out[0] == pytest.approx(0.46212, abs=1e-5)
    assert out[0] == np.tanh(0.5)


def test_relu_hidden():
    spec = MLPSpec(2, (2,), 1, "relu")
    store = ParamStore(spec.layer_shapes())
    store.params["W0"][...] = np.eye(2)
    _, cache = forward_cached(store, spec, np.array([[-1.0, 2.0]]))
    assert np.array_equal(cache.activations[1], [[0.0, 2.0]])


def test_input_shape_checked():
    spec = MLPSpec(3, (4,), 1)
    store = init_params(spec, np.random.default_rng(0))
    with pytest.raises(InputError):
        forward(store, spec, np.zeros((2, 4)))


def test_sum_loss_bias_gradient_is_one():
    spec = MLPSpec(3, (4,), 2)
    store = ParamStore(spec.layer_shapes())
    x = np.ones((5, 3))
    value_and_grad(store, spec, x, lambda out: (float(out.sum()), np.ones_like(out) / 1.0))
    # summed over a batch of 5 each output bias collects 5
    assert np.allclose(store.grads["b1"], 5.0)
    value_and_grad(store, spec, x[:1], lambda out: (float(out.sum()), np.ones_like(out)))
    assert np.allclose(store.grads["b1"], 1.0)


def test_constant_loss_zero_gradient():
    spec = MLPSpec(3, (4, 4), 2)
    store = init_params(spec, np.random.default_rng(1))
    value_and_grad(store, spec, np.ones((3, 3)), lambda out: (7.0, np.zeros_like(out)))
    assert not store.grad_flat.any()


@pytest.mark.parametrize("activation", ["tanh", "relu"])
@pytest.mark.parametrize("seed", range(5))
def test_backward_matches_finite_differences(activation, seed):
    rng = np.random.default_rng(seed)
    spec = MLPSpec(3, (6, 5), 2, activation)
    store = init_params(spec, rng)
    store.flat[...] += 0.1 * rng.normal(size=store.size)
    x = rng.normal(size=(7, 3))
    w = rng.normal(size=(7, 2))

    def loss_fn(out):
        return float(np.sum(w * out ** 2)), 2 * w * out

    value_and_grad(store, spec, x, loss_fn)
    g = store.grad_flat.copy()
    fd = fd_gradient(lambda: loss_fn(forward(store, spec, x))[0], store.flat)
    assert rel_error(g, fd) < 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    spec = MLPSpec(4, (8,), 1, "tanh")
    store = init_params(spec, rng)
    x = rng.normal(size=(3, 4))
    _, cache = forward_cached(store, spec, x)
    gx = backward(store, spec, cache, np.ones((3, 1)), accumulate=False)
    assert not store.grad_flat.any()
    fd = fd_gradient(lambda: float(forward(store, spec, x).sum()), x)
    assert rel_error(gx, fd) < 1e-6


def test_adam_first_step():
    store = ParamStore({"w": (3,)})
    store.grads["w"][...] = 1.0
    optimizer_step(store, OptimizerConfig(learning_rate=0.001))
    assert store.opt_t == 1
    assert np.allclose(store.params["w"], -0.001 / (1 + 1e-8), rtol=0, atol=1e-15)


def test_adam_matches_reference_over_steps():
    rng = np.random.default_rng(0)
    cfg = OptimizerConfig(learning_rate=0.01)
    store = ParamStore({"w": (4,)})
    p = np.zeros(4)
    m = np.zeros(4)
    v = np.zeros(4)
    for t in range(1, 20):
        g = rng.normal(size=4)
        store.grads["w"][...] = g
        optimizer_step(store, cfg)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        p = p - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    assert np.allclose(store.params["w"], p, rtol=1e-12, atol=1e-14)


def test_adam_zero_grad_keeps_params():
    store = ParamStore({"w": (2,)})
    store.params["w"][...] = [1.0, 2.0]
    optimizer_step(store, OptimizerConfig())
    assert np.array_equal(store.params["w"], [1.0, 2.0])
    assert store.opt_t == 1


def test_adam_identical_stores_identical_results():
    a = ParamStore({"w": (3,)})
    b = ParamStore({"w": (3,)})
    for s in (a, b):
        s.grads["w"][...] = [0.1, -2.0, 3.0]
        optimizer_step(s, OptimizerConfig())
    assert np.array_equal(a.flat, b.flat)


def test_adam_rejects_nonfinite_gradient():
    store = ParamStore({"w": (2,)})
    store.grads["w"][...] = [np.nan, 1.0]
    with pytest.raises(NumericError):
        optimizer_step(store, OptimizerConfig())


def test_bad_optimizer_config():
    with pytest.raises(InputError):
        OptimizerConfig(learning_rate=0.0)
    with pytest.raises(InputError):
        OptimizerConfig(beta1=1.0)


def _scalar_store(value):
    s = ParamStore({"w": (1,)})
    s.params["w"][...] = value
    return s


@pytest.mark.parametrize("target,main,rho,expected", [(1.0, 0.0, 0.995, 0.995), (0.0, 2.0, 0.5, 1.0),
                                                       (3.0, 3.0, 0.2, 3.0)])
def test_polyak(target, main, rho, expected):
    t = _scalar_store(target)
    polyak_update(t, _scalar_store(main), rho)
    assert t.params["w"][0] == pytest.approx(expected, abs=1e-15)


def test_polyak_checks():
    with pytest.raises(InputError):
        polyak_update(_scalar_store(0.0), _scalar_store(1.0), 1.0)
    with pytest.raises(InputError):
        polyak_update(_scalar_store(0.0), ParamStore({"w": (2,)}), 0.5)


def test_reset_matches_fresh_init():
    spec = MLPSpec(3, (5,), 2)
    store = init_params(spec, np.random.default_rng(0))
    store.m_flat[...] = 1.0
    store.v_flat[...] = 1.0
    store.opt_t = 9
    reset_params(store, spec, np.random.default_rng(42))
    fresh = init_params(spec, np.random.default_rng(42))
    x = np.zeros((1, 3))
    assert np.array_equal(forward(store, spec, x), forward(fresh, spec, x))
    assert np.array_equal(store.flat, fresh.flat)
    assert not store.m_flat.any() and not store.v_flat.any() and store.opt_t == 0


def test_reset_distinct_seeds_distinct_params():
    spec = MLPSpec(2, (4,), 1)
    seen = set()
    store = init_params(spec, np.random.default_rng(0))
    for seed in range(100):
        reset_params(store, spec, np.random.default_rng(seed))
        seen.add(store.flat.tobytes())
    assert len(seen) == 100


def test_views_share_flat_storage():
    spec = MLPSpec(2, (3,), 1)
    store = init_params(spec, np.random.default_rng(0))
    store.params["W0"][0, 0] = 123.0
    assert store.flat[0] == 123.0
    dup = store.copy()
    dup.params["W0"][0, 0] = 0.0
    assert store.flat[0] == 123.0


def test_checkpoint_round_trip(tmp_path):
    spec = MLPSpec(2, (3,), 1)
    store = init_params(spec, np.random.default_rng(0))
    store.grads["W0"][...] = 0.3
    optimizer_step(store, OptimizerConfig())
    path = tmp_path / "ck.npz"
    save_checkpoint(path, {"net": store}, {"step": np.asarray(7)})
    arrays = load_checkpoint(path)
    other = init_params(spec, np.random.default_rng(5))
    other.load_state_arrays(arrays, prefix="net/")
    assert np.array_equal(other.flat, store.flat)
    assert np.array_equal(other.m_flat, store.m_flat)
    assert other.opt_t == 1
    assert int(arrays["meta/step"]) == 7
