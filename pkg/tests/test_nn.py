import numpy as np
import pytest

from fedforge.config import DataConfig, apply_defaults
from fedforge.errors import DimensionMismatch
from fedforge.nn import (
    Dataset,
    FlatWeights,
    build_model,
    client_update,
    evaluate,
    flatten,
    forward,
    loss_and_grad,
    make_optimizer,
    mlp_spec,
    train_epochs,
    unflatten,
)


def small_dataset(n=40, seed=0, num_labels=2, in_dim=2):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, in_dim)).astype(np.float32)
    y = rng.integers(0, num_labels, size=n)
    cfg = DataConfig((1, in_dim), n, "Classification", num_labels)
    return Dataset(x, y, cfg)


def test_build_deterministic():
    spec = mlp_spec((2,), [4], 2)
    a = build_model(spec, 7)
    b = build_model(spec, 7)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, build_model(spec, 8).values)


def test_param_count():
    spec = mlp_spec((2,), [4], 2)
    assert spec.num_params == (2 * 4 + 4) + (4 * 2 + 2) == 22
    assert build_model(spec, 0).values.shape == (22,)


def test_biases_zero_after_build():
    spec = mlp_spec((3,), [5, 4], 2)
    w = build_model(spec, 1)
    for _, b in unflatten(w.values, spec):
        assert np.all(b == 0.0)


def test_xavier_bounds():
    spec = mlp_spec((10,), [20], 2)
    w = build_model(spec, 3)
    (w0, _), (w1, _) = unflatten(w.values, spec)
    assert np.abs(w0).max() <= np.sqrt(6 / 30)
    assert np.abs(w1).max() <= np.sqrt(6 / 22)


def test_flatten_unflatten_identity():
    spec = mlp_spec((3,), [4, 5], 2)
    rng = np.random.default_rng(0)
    v = rng.normal(size=spec.num_params).astype(np.float32)
    assert np.array_equal(flatten(unflatten(v, spec), spec), v)


def test_zero_epochs_returns_input():
    spec = mlp_spec((2,), [4], 2)
    w = build_model(spec, 0)
    data = small_dataset()
    cfg = apply_defaults({"dataset": "x", "epoch": 1})
    out, _ = train_epochs(
        w, data, epochs=0, batch_size=4, lr=0.1, optimizer="SGD",
        loss="CrossEntropyLoss", seed=0,
    )
    assert np.array_equal(out.values, w.values)
    assert out is not w


def test_single_sgd_step_matches_hand_gradient():
    # one linear unit, MSE 0.5*(w*x + b - y)^2, single datapoint, one step:
    # dL/dw = (w*x + b - y) * x, dL/db = (w*x + b - y)
    spec = mlp_spec((1,), [], 1)
    w = FlatWeights(np.array([0.5, 0.1], dtype=np.float32), spec)
    x, y, lr = 2.0, 1.0, 0.1
    cfg = DataConfig((1, 1), 1, "Regression", 2)
    data = Dataset(np.array([[x]], dtype=np.float32), np.array([y], dtype=np.float32), cfg)
    out, _ = train_epochs(
        w, data, epochs=1, batch_size=1, lr=lr, optimizer="SGD", loss="MSELoss", seed=0
    )
    resid = 0.5 * x + 0.1 - y
    expected = np.array([0.5 - lr * resid * x, 0.1 - lr * resid])
    assert np.allclose(out.values, expected, atol=1e-6)


@pytest.mark.parametrize("loss", ["CrossEntropyLoss", "MSELoss"])
@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(loss, seed):
    rng = np.random.default_rng(seed)
    spec = mlp_spec((3,), [4], 2)  # 3*4+4 + 4*2+2 = 26 params
    w = build_model(spec, seed)
    x = rng.normal(size=(6, 3)).astype(np.float32)
    y = rng.integers(0, 2, size=6)
    _, grads = loss_and_grad(w, x, y, loss, 2)
    h = 1e-3
    base = w.values.astype(np.float64)
    for i in range(spec.num_params):
        vp, vm = base.copy(), base.copy()
        vp[i] += h
        vm[i] -= h
        lp, _ = loss_and_grad(FlatWeights(vp.astype(np.float32), spec), x, y, loss, 2)
        lm, _ = loss_and_grad(FlatWeights(vm.astype(np.float32), spec), x, y, loss, 2)
        fd = (lp - lm) / (2 * h)
        denom = max(abs(fd), abs(grads[i]), 1e-4)
        assert abs(fd - grads[i]) / denom < 1e-3


def test_multi_epoch_equals_composed_single_epochs():
    spec = mlp_spec((2,), [4], 2)
    w = build_model(spec, 0)
    data = small_dataset()
    full, _ = train_epochs(
        w, data, epochs=3, batch_size=8, lr=0.01, optimizer="Adam",
        loss="CrossEntropyLoss", seed=42,
    )
    step = w
    state = None
    for e in range(3):
        step, state = train_epochs(
            step, data, epochs=1, batch_size=8, lr=0.01, optimizer="Adam",
            loss="CrossEntropyLoss", seed=42, start_epoch=e, state=state,
        )
    assert np.array_equal(full.values, step.values)


def test_softmax_probabilities_sum_to_one():
    spec = mlp_spec((2,), [4], 3)
    w = build_model(spec, 0)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(20, 2)).astype(np.float32)
    out = forward(w, x).astype(np.float64)
    m = out.max(axis=1, keepdims=True)
    p = np.exp(out - m)
    p /= p.sum(axis=1, keepdims=True)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-6)


def test_evaluate_constant_predictor():
    # zero weights: constant logits, argmax ties break to class 0
    spec = mlp_spec((2,), [], 2)
    w = FlatWeights(np.zeros(spec.num_params, dtype=np.float32), spec)
    cfg = DataConfig((1, 2), 4, "Classification", 2)
    data = Dataset(
        np.ones((4, 2), dtype=np.float32), np.array([0, 0, 1, 1]), cfg
    )
    assert evaluate(w, data, 2).accuracy == 0.5


def test_evaluate_perfect_predictor():
    spec = mlp_spec((2,), [], 2)
    # weights routing feature sign straight to the right logit
    vals = flatten([(np.array([[5.0, -5.0], [0.0, 0.0]]), np.zeros(2))], spec)
    w = FlatWeights(vals, spec)
    cfg = DataConfig((1, 2), 4, "Classification", 2)
    data = Dataset(
        np.array([[1, 0], [-1, 0], [1, 0], [-1, 0]], dtype=np.float32),
        np.array([0, 1, 0, 1]),
        cfg,
    )
    assert evaluate(w, data, 4).accuracy == 1.0


def test_evaluate_independent_of_batch_size():
    spec = mlp_spec((2,), [8], 2)
    w = build_model(spec, 5)
    data = small_dataset(n=37, seed=2)
    a = evaluate(w, data, 1)
    b = evaluate(w, data, 32)
    assert a.accuracy == b.accuracy
    assert abs(a.loss - b.loss) < 1e-9


def test_optimizer_sgd_delta():
    state = make_optimizer("SGD", 2)
    delta = state.step(np.array([1.0, -2.0]), 0.1)
    assert np.allclose(delta, [-0.1, 0.2])


def test_optimizer_adam_first_step_magnitude():
    state = make_optimizer("Adam", 1)
    delta = state.step(np.array([1.0]), 0.01)
    # first bias-corrected step moves by almost exactly lr
    assert abs(delta[0] + 0.01) < 1e-7


@pytest.mark.parametrize("kind", ["SGD", "Adam", "AdaGrad", "RMSProp"])
def test_zero_gradient_zero_delta(kind):
    state = make_optimizer(kind, 3)
    delta = state.step(np.zeros(3), 0.1)
    assert np.allclose(delta, 0.0)


def test_client_update_respects_config_and_leaves_input_unmodified():
    spec = mlp_spec((2,), [4], 2)
    w = build_model(spec, 0)
    before = w.values.copy()
    data = small_dataset()
    cfg = apply_defaults({"dataset": "x", "epoch": 2, "minibatch": 8, "lr": 0.01})
    out = client_update(w, data, cfg, seed=9)
    assert np.array_equal(w.values, before)
    assert not np.array_equal(out.values, before)


def test_dimension_mismatch_raises():
    spec = mlp_spec((3,), [4], 2)
    w = build_model(spec, 0)
    data = small_dataset(in_dim=2)
    with pytest.raises(DimensionMismatch):
        train_epochs(
            w, data, epochs=1, batch_size=4, lr=0.1, optimizer="SGD",
            loss="CrossEntropyLoss", seed=0,
        )
