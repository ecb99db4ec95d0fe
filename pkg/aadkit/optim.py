"""AdamW optimizer with decoupled weight decay."""
from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .const import ADAM_BETAS, ADAM_EPS, LEARNING_RATE
from .exceptions import TrainingError
from .layers import Layer


@dataclass
class AdamWState:
    """Moments and hyperparameters of one optimizer."""

    lr: float = LEARNING_RATE
    betas: tuple[float, float] = ADAM_BETAS
    eps: float = ADAM_EPS
    weight_decay: float = 0.0
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(
    params: Iterable[tuple[str, np.ndarray, np.ndarray]], state: AdamWState
) -> AdamWState:
    """Update every (name, value, grad) in place and advance the state by one step."""
    params = list(params)
    for name, _, grad in params:
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"Non-finite gradient for parameter {name}")
    state.step += 1
    beta1, beta2 = state.betas
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    for name, value, grad in params:
        if name not in state.m:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        # decay acts on the weights directly, not through the gradient
        value *= 1.0 - state.lr * state.weight_decay
        value -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return state


class AdamW:
    """AdamW bound to the parameters of one layer tree."""

    def __init__(
        self,
        model: Layer,
        lr: float = LEARNING_RATE,
        weight_decay: float = 0.0,
        betas: tuple[float, float] = ADAM_BETAS,
        eps: float = ADAM_EPS,
    ) -> None:
        """Initialize an empty state."""
        self.model = model
        self.state = AdamWState(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay)

    def step(self) -> None:
        """Apply one update using the gradients currently stored in the model."""
        adamw_step(self.model.parameters(), self.state)

    def zero_grad(self) -> None:
        """Clear the model gradients."""
        self.model.zero_grad()
