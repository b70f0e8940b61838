"""Backprop against central finite differences, Adam against a reference."""
import math

import numpy as np
import pytest

from schedtune.errors import ConfigError
from schedtune.nn import Adam, Mlp, polyak_update

FD_H = 1e-5


def fd_gradient(loss_fn, array, indices):
    grads = {}
    flat = array.ravel()
    for i in indices:
        orig = flat[i]
        flat[i] = orig + FD_H
        up = loss_fn()
        flat[i] = orig - FD_H
        down = loss_fn()
        flat[i] = orig
        grads[i] = (up - down) / (2.0 * FD_H)
    return grads


def relative_error(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def test_forward_matches_hand_computation():
    net = Mlp((2, 3, 1), np.random.default_rng(0))
    net.weights[0][:] = [[1.0, -1.0, 0.5], [0.0, 2.0, -0.5]]
    net.biases[0][:] = [0.1, -0.2, 0.0]
    net.weights[1][:] = [[1.0], [2.0], [3.0]]
    net.biases[1][:] = [0.5]
    x = np.array([[1.0, 2.0]])
    hidden = np.maximum(x @ net.weights[0] + net.biases[0], 0.0)
    expected = hidden @ net.weights[1] + net.biases[1]
    assert np.array_equal(net.forward(x), expected)


def test_relu_zeroes_negative_preactivations():
    net = Mlp((1, 2, 1), np.random.default_rng(0))
    net.weights[0][:] = [[1.0, -1.0]]
    net.biases[0][:] = 0.0
    net.weights[1][:] = [[1.0], [1.0]]
    net.biases[1][:] = 0.0
    assert net.forward(np.array([[2.0]]))[0, 0] == 2.0
    assert net.forward(np.array([[-2.0]]))[0, 0] == 2.0


def jitter_biases(net, rng):
    """Move pre-activations off the ReLU kink, where the subgradient and a
    finite difference legitimately disagree."""
    for b in net.biases:
        b += rng.normal(0.0, 0.1, size=b.shape)


def test_weight_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    net = Mlp((4, 4, 4, 1), rng)
    jitter_biases(net, rng)
    x = rng.uniform(-1, 1, (6, 4))

    def loss():
        return float(net.forward(x).sum())

    net.forward(x)
    net.zero_grads()
    net.backward(np.ones((6, 1)))
    worst = 0.0
    for param, grad in zip(net.parameters, net.gradients):
        idx = rng.choice(param.size, size=min(8, param.size), replace=False)
        for i, fd in fd_gradient(loss, param, idx).items():
            worst = max(worst, relative_error(fd, grad.ravel()[i]))
    assert worst < 1e-4


def test_input_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    net = Mlp((3, 5, 2), rng)
    jitter_biases(net, rng)
    x = rng.uniform(-1, 1, (4, 3))
    coeff = rng.uniform(-1, 1, (4, 2))

    def loss():
        return float((net.forward(x) * coeff).sum())

    net.forward(x)
    net.zero_grads()
    grad_in = net.backward(coeff)
    worst = 0.0
    for i, fd in fd_gradient(loss, x, range(x.size)).items():
        worst = max(worst, relative_error(fd, grad_in.ravel()[i]))
    assert worst < 1e-4


def test_backward_accumulates_until_zeroed():
    rng = np.random.default_rng(3)
    net = Mlp((2, 3, 1), rng)
    x = rng.uniform(-1, 1, (2, 2))
    net.forward(x)
    net.backward(np.ones((2, 1)))
    once = [g.copy() for g in net.gradients]
    net.forward(x)
    net.backward(np.ones((2, 1)))
    for g1, g2 in zip(once, net.gradients):
        assert np.allclose(g2, 2.0 * g1)
    net.zero_grads()
    assert all(np.all(g == 0.0) for g in net.gradients)


def test_he_initialization_scale_and_zero_bias():
    net = Mlp((256, 128), np.random.default_rng(4))
    std = float(net.weights[0].std())
    assert std == pytest.approx(math.sqrt(2.0 / 256), rel=0.1)
    assert np.all(net.biases[0] == 0.0)


def test_clone_is_independent_and_copy_from_matches():
    rng = np.random.default_rng(5)
    net = Mlp((2, 3, 1), rng)
    twin = net.clone()
    net.weights[0][0, 0] += 1.0
    assert twin.weights[0][0, 0] != net.weights[0][0, 0]
    twin.copy_from(net)
    for a, b in zip(twin.parameters, net.parameters):
        assert np.array_equal(a, b)
    with pytest.raises(ConfigError):
        twin.copy_from(Mlp((2, 4, 1), rng))


def test_validation_errors():
    rng = np.random.default_rng(6)
    with pytest.raises(ConfigError):
        Mlp((3,), rng)
    with pytest.raises(ConfigError):
        Mlp((3, 0, 1), rng)
    net = Mlp((3, 2), rng)
    with pytest.raises(ConfigError):
        net.forward(np.zeros((1, 4)))
    with pytest.raises(ConfigError):
        net.backward(np.zeros((1, 2)))
    net.forward(np.zeros((1, 3)))
    with pytest.raises(ConfigError):
        net.backward(np.zeros((2, 2)))


def reference_adam(p0, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar Adam written longhand for cross-checking."""
    p, m, v = p0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p = p - lr * m_hat / (math.sqrt(v_hat) + eps)
    return p


def test_adam_matches_scalar_reference():
    rng = np.random.default_rng(7)
    grads = rng.normal(size=25)
    param = np.array([2.5])
    opt = Adam([param], lr=0.01)
    for g in grads:
        opt.step([np.array([g])])
    assert param[0] == pytest.approx(reference_adam(2.5, grads, 0.01), abs=1e-12)


def test_adam_minimizes_quadratic():
    param = np.array([10.0])
    opt = Adam([param], lr=0.1)
    for _ in range(500):
        opt.step([2.0 * (param - 3.0)])
    assert param[0] == pytest.approx(3.0, abs=0.05)


def test_adam_validation():
    with pytest.raises(ConfigError):
        Adam([np.zeros(2)], lr=0.0)
    opt = Adam([np.zeros(2)])
    with pytest.raises(ConfigError):
        opt.step([])


def test_polyak_endpoints_and_blend():
    rng = np.random.default_rng(8)
    src = Mlp((2, 3, 1), rng)
    dst = src.clone()
    dst.weights[0][:] += 1.0
    frozen = [p.copy() for p in dst.parameters]

    polyak_update(dst, src, tau=0.0)
    for p, f in zip(dst.parameters, frozen):
        assert np.array_equal(p, f)

    polyak_update(dst, src, tau=0.5)
    for p, f, s in zip(dst.parameters, frozen, src.parameters):
        assert np.allclose(p, 0.5 * f + 0.5 * s)

    polyak_update(dst, src, tau=1.0)
    for p, s in zip(dst.parameters, src.parameters):
        assert np.allclose(p, s)

    with pytest.raises(ConfigError):
        polyak_update(dst, src, tau=1.5)
