"""Central finite-difference checks of backpropagated gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
import logging

import numpy as np

from .const import FD_STEP
from .layers import Layer

_LOGGER = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    """Relative error of every checked tensor."""

    errors: dict[str, float] = field(default_factory=dict)

    @property
    def max_rel_error(self) -> float:
        """Return the worst relative error."""
        return max(self.errors.values(), default=0.0)

    @property
    def worst(self) -> str | None:
        """Return the name of the tensor with the worst error."""
        if not self.errors:
            return None
        return max(self.errors, key=self.errors.get)


def _reseed(layer: Layer, seed: int) -> None:
    """Give every stochastic layer a fresh generator so repeated passes agree."""
    if isinstance(getattr(layer, "rng", None), np.random.Generator):
        layer.rng = np.random.default_rng(seed)
    for child in layer.children.values():
        _reseed(child, seed)


def _relative(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def finite_diff_check(
    fragment: Layer,
    inputs: np.ndarray | tuple[np.ndarray, ...],
    h: float = FD_STEP,
    training: bool = False,
    seed: int = 0,
    check_inputs: bool = True,
) -> GradCheckReport:
    """Compare backprop gradients of a fragment with central differences.

    The scalar loss is a fixed random projection of the fragment output, so
    every output element contributes. Inputs and parameters should be 64-bit.
    """
    inputs = inputs if isinstance(inputs, tuple) else (inputs,)
    inputs = tuple(np.array(x, dtype=np.float64) for x in inputs)

    def run() -> np.ndarray:
        _reseed(fragment, seed)
        return fragment.forward(*inputs, training=training)

    out = run()
    projection = np.random.default_rng(seed + 1).standard_normal(out.shape)

    def loss() -> float:
        return float(np.sum(run() * projection))

    run()
    input_grads = fragment.backward(projection)
    if not isinstance(input_grads, tuple):
        input_grads = (input_grads,)
    analytic = {name: grad.copy() for name, _, grad in fragment.parameters()}

    report = GradCheckReport()
    for name, value, _ in fragment.parameters():
        numeric = np.zeros_like(value, dtype=np.float64)
        flat = value.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + h
            plus = loss()
            flat[idx] = original - h
            minus = loss()
            flat[idx] = original
            numeric.reshape(-1)[idx] = (plus - minus) / (2 * h)
        report.errors[name] = _relative(analytic[name], numeric)

    if check_inputs:
        for pos, (x, grad) in enumerate(zip(inputs, input_grads)):
            numeric = np.zeros_like(x)
            flat = x.reshape(-1)
            for idx in range(flat.size):
                original = flat[idx]
                flat[idx] = original + h
                plus = loss()
                flat[idx] = original - h
                minus = loss()
                flat[idx] = original
                numeric.reshape(-1)[idx] = (plus - minus) / (2 * h)
            report.errors[f"input{pos}"] = _relative(grad, numeric)

    _LOGGER.debug(
        "Gradient check: worst %s (%.3g)", report.worst, report.max_rel_error
    )
    return report
