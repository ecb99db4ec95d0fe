"""Tests for the AdamW optimizer."""
import numpy as np
import pytest

from aadkit.exceptions import TrainingError
from aadkit.layers import Dense
from aadkit.optim import AdamW, AdamWState, adamw_step


def test_first_step_matches_formula():
    """One step with bias correction moves each weight by about lr in the gradient sign."""
    value = np.array([1.0, -2.0, 0.5])
    grad = np.array([0.3, -0.1, 2.0])
    state = AdamWState(lr=0.01, weight_decay=0.1)
    adamw_step([("w", value, grad)], state)
    m_hat = grad
    v_hat = grad**2
    expected = np.array([1.0, -2.0, 0.5]) * (1 - 0.01 * 0.1) - 0.01 * m_hat / (
        np.sqrt(v_hat) + state.eps
    )
    np.testing.assert_allclose(value, expected)
    assert state.step == 1


def test_decay_is_decoupled():
    """With a zero gradient only the multiplicative decay acts."""
    value = np.array([2.0])
    state = AdamWState(lr=0.1, weight_decay=0.5)
    adamw_step([("w", value, np.zeros(1))], state)
    np.testing.assert_allclose(value, [2.0 * (1 - 0.05)])


def test_non_finite_gradient_leaves_weights_untouched():
    """A NaN gradient raises before any parameter changes."""
    first = np.array([1.0])
    second = np.array([1.0])
    state = AdamWState()
    with pytest.raises(TrainingError, match="b"):
        adamw_step([("a", first, np.ones(1)), ("b", second, np.array([np.nan]))], state)
    assert first[0] == 1.0
    assert state.step == 0


def test_optimizer_decreases_quadratic_loss():
    """Repeated steps reduce a least-squares loss on a dense layer."""
    rng = np.random.default_rng(0)
    layer = Dense(4, 1, rng)
    x = rng.standard_normal((32, 4))
    y = x @ np.array([[1.0], [-1.0], [0.5], [2.0]])
    optimizer = AdamW(layer, lr=0.05)
    losses = []
    for _ in range(200):
        optimizer.zero_grad()
        residual = layer.forward(x) - y
        losses.append(float(np.mean(residual**2)))
        layer.backward(2 * residual / residual.size)
        optimizer.step()
    assert losses[-1] < 0.01 * losses[0]
