"""Dense-net kernel: forward/backward correctness against finite differences,
loss closed forms, optimizer behavior, checkpoint stability."""

import numpy as np
import pytest

from dinersim.nets import (Adam, DenseNet, NetError, OptimizerError, Sgd,
                           finite_difference, gradient_error, load_checkpoint,
                           save_checkpoint, softmax, softmax_cross_entropy,
                           softmax_cross_entropy_batch)


def test_forward_shapes():
    net = DenseNet([5, 8, 3], seed=1)
    out, _ = net.forward(np.zeros(5))
    assert out.shape == (3,)
    out, _ = net.forward(np.zeros((7, 5)))
    assert out.shape == (7, 3)
    with pytest.raises(NetError):
        net.forward(np.zeros(6))


def test_constructor_validation():
    with pytest.raises(NetError):
        DenseNet([5])
    with pytest.raises(NetError):
        DenseNet([5, 3], activations=["relu", "relu"])
    with pytest.raises(NetError):
        DenseNet([5, 3], activations=["tanh"])
    with pytest.raises(NetError):
        DenseNet([5, 4, 3], dropout=[1.0])


def test_seeded_init_is_reproducible():
    a = DenseNet([6, 4, 2], seed=7)
    b = DenseNet([6, 4, 2], seed=7)
    for k, v in a.params().items():
        assert np.array_equal(v, b.params()[k])
    c = DenseNet([6, 4, 2], seed=8)
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_eval_mode_is_deterministic_despite_dropout():
    net = DenseNet([10, 16, 4], dropout=[0.5], seed=3)
    x = np.random.default_rng(0).normal(size=10)
    o1, _ = net.forward(x)
    o2, _ = net.forward(x)
    assert np.array_equal(o1, o2)
    # train mode actually drops units
    t1, _ = net.forward(x, train=True)
    t2, _ = net.forward(x, train=True)
    assert not np.array_equal(t1, t2)


def test_dropout_rate_is_roughly_honored():
    net = DenseNet([4, 400, 2], dropout=[0.5], seed=11)
    x = np.abs(np.random.default_rng(1).normal(size=4)) + 0.5
    _, caches = net.forward(x, train=True)
    mask = caches[0][2]
    kept = float((mask > 0).mean())
    assert abs(kept - 0.5) < 0.1
    # survivors are scaled by 1/(1-rate)
    assert np.allclose(mask[mask > 0], 2.0)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(42)
    net = DenseNet([7, 9, 5, 4], seed=5)
    x = rng.normal(size=(6, 7))
    labels = rng.integers(0, 4, size=6)

    logits, caches = net.forward(x)
    _, dlogits = softmax_cross_entropy_batch(logits, labels)
    grads, dx = net.backward(caches, dlogits)

    def loss_with(name, arr):
        params = net.params()
        saved = params[name]
        params[name] = arr
        net.set_params(params)
        out, _ = net.forward(x)
        value, _ = softmax_cross_entropy_batch(out, labels)
        params[name] = saved
        net.set_params(params)
        return value

    for name in ("W0", "b0", "W1", "b1", "W2", "b2"):
        numeric = finite_difference(lambda a, n=name: loss_with(n, a),
                                    net.params()[name].copy())
        assert gradient_error(grads[name], numeric) < 1e-6

    numeric_dx = finite_difference(
        lambda xx: softmax_cross_entropy_batch(net.forward(xx)[0], labels)[0],
        x.copy())
    assert gradient_error(dx, numeric_dx) < 1e-6


def test_softmax_rows_sum_to_one():
    z = np.random.default_rng(2).normal(size=(5, 9)) * 30
    p = softmax(z)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert p.min() >= 0


def test_cross_entropy_closed_forms():
    # uniform logits: loss is ln(K)
    loss, grad = softmax_cross_entropy(np.zeros(57), 12)
    assert abs(loss - np.log(57.0)) < 1e-12
    assert abs(grad.sum()) < 1e-12
    # a dominant correct logit drives the loss toward zero
    z = np.zeros(4)
    z[1] = 50.0
    loss, _ = softmax_cross_entropy(z, 1)
    assert loss < 1e-12
    with pytest.raises(NetError):
        softmax_cross_entropy(np.zeros(4), 4)


def test_batch_cross_entropy_is_the_mean():
    rng = np.random.default_rng(3)
    logits = rng.normal(size=(8, 6))
    labels = rng.integers(0, 6, size=8)
    total, grad = softmax_cross_entropy_batch(logits, labels)
    singles = [softmax_cross_entropy(logits[i], int(labels[i]))
               for i in range(8)]
    assert abs(total - np.mean([s[0] for s in singles])) < 1e-12
    stacked = np.stack([s[1] for s in singles]) / 8
    assert np.allclose(grad, stacked, atol=1e-12)


def test_sgd_is_exact():
    params = {"w": np.array([1.0, 2.0])}
    Sgd(lr=0.1).step(params, {"w": np.array([10.0, -10.0])})
    assert np.allclose(params["w"], [0.0, 3.0], atol=1e-15)


def test_adam_minimizes_a_quadratic():
    # f(w) = |w - 3|^2 elementwise; Adam should get close within 500 steps
    params = {"w": np.zeros(4)}
    opt = Adam(lr=0.05)
    for _ in range(500):
        grads = {"w": 2.0 * (params["w"] - 3.0)}
        opt.step(params, grads)
    assert np.allclose(params["w"], 3.0, atol=1e-2)
    assert opt.steps == 500


def test_optimizers_reject_non_finite_gradients():
    params = {"w": np.zeros(2)}
    with pytest.raises(OptimizerError):
        Sgd().step(params, {"w": np.array([np.nan, 0.0])})
    with pytest.raises(OptimizerError):
        Adam().step(params, {"w": np.array([np.inf, 0.0])})


def test_checkpoint_round_trip_is_byte_stable(tmp_path):
    net = DenseNet([5, 6, 3], dropout=[0.25], seed=9)
    p1 = tmp_path / "net1.json"
    p2 = tmp_path / "net2.json"
    save_checkpoint(p1, "dense", net.params(), net.meta())
    kind, arrays, meta = load_checkpoint(p1)
    assert kind == "dense"
    restored = DenseNet.from_meta(meta, arrays)
    for k, v in net.params().items():
        assert np.array_equal(v, restored.params()[k])
    save_checkpoint(p2, kind, restored.params(), restored.meta())
    assert p1.read_bytes() == p2.read_bytes()
    x = np.linspace(-1, 1, 5)
    assert np.array_equal(net.forward(x)[0], restored.forward(x)[0])
