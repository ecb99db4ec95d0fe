"""Differentiable layers for the AADNet classifier.

Every layer caches what its backward pass needs during ``forward`` and exposes
its learnable tensors through ``params``/``grads`` and its non-learnable state
(batch-norm running statistics) through ``buffers``. Batched inputs are laid out
as (batch, channels, time) or (batch, features).
"""
from __future__ import annotations

from collections.abc import Iterator
import logging
from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .const import BN_EPS, BN_MOMENTUM, ELU_ALPHA, POOL_SIZE
from .exceptions import NetworkError, ShapeError

_LOGGER = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "elu", "softmax")


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """Promote a single (channels, time) signal to a batch of one."""
    if x.ndim == 2:
        return x[np.newaxis], True
    if x.ndim != 3:
        raise ShapeError("signal batch", "(batch, channels, time)", x.shape)
    return x, False


def conv1d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Stride-1 convolution with symmetric zero padding keeping the length."""
    batch, squeeze = _as_batch(x)
    out_ch, in_ch, kernel = weight.shape
    if kernel % 2 == 0:
        raise NetworkError(f"kernel size must be odd, got {kernel}")
    if batch.shape[1] != in_ch:
        raise ShapeError("conv1d input channels", in_ch, batch.shape[1])
    pad = (kernel - 1) // 2
    padded = np.pad(batch, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(padded, kernel, axis=2)
    out = np.einsum("bctk,ock->bot", windows, weight, optimize=True)
    out += bias[np.newaxis, :, np.newaxis]
    return out[0] if squeeze else out


def conv1d_backward(
    grad_out: np.ndarray, cached_input: np.ndarray | None, weight: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return gradients with respect to input, weight and bias."""
    if cached_input is None:
        raise NetworkError("conv1d backward called without a cached input")
    batch, squeeze = _as_batch(cached_input)
    grad, _ = _as_batch(grad_out)
    out_ch, in_ch, kernel = weight.shape
    if grad.shape[1] != out_ch or grad.shape[2] != batch.shape[2]:
        raise ShapeError(
            "conv1d grad_out", (batch.shape[0], out_ch, batch.shape[2]), grad.shape
        )
    pad = (kernel - 1) // 2
    padded = np.pad(batch, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(padded, kernel, axis=2)
    grad_weight = np.einsum("bot,bctk->ock", grad, windows, optimize=True)
    grad_bias = grad.sum(axis=(0, 2))
    grad_padded = np.pad(grad, ((0, 0), (0, 0), (pad, pad)))
    grad_windows = sliding_window_view(grad_padded, kernel, axis=2)
    grad_input = np.einsum(
        "botm,ocm->bct", grad_windows, weight[:, :, ::-1], optimize=True
    )
    return (grad_input[0] if squeeze else grad_input), grad_weight, grad_bias


def maxpool1d(
    x: np.ndarray, kernel: int = POOL_SIZE, stride: int = POOL_SIZE, same: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Windowed maximum over time; returns the output and the argmax positions.

    With ``same`` the input is padded with -inf so that a stride-1 pool keeps the
    length; otherwise trailing samples that do not fill a window are dropped.
    """
    batch, squeeze = _as_batch(x)
    pad = (kernel - 1) // 2 if same else 0
    if batch.shape[2] + 2 * pad < kernel:
        raise NetworkError("window longer than signal")
    padded = np.pad(
        batch, ((0, 0), (0, 0), (pad, pad)), constant_values=-np.inf
    ) if pad else batch
    windows = sliding_window_view(padded, kernel, axis=2)[:, :, ::stride, :]
    local = windows.argmax(axis=3)
    out = np.take_along_axis(windows, local[..., np.newaxis], axis=3)[..., 0]
    starts = np.arange(windows.shape[2]) * stride
    positions = starts[np.newaxis, np.newaxis, :] + local - pad
    if squeeze:
        return out[0], positions[0]
    return out, positions


def maxpool1d_backward(
    grad_out: np.ndarray, positions: np.ndarray, input_shape: tuple[int, ...]
) -> np.ndarray:
    """Route each output gradient to the input element that won its window."""
    grad, squeeze = _as_batch(grad_out)
    pos, _ = _as_batch(positions)
    shape = input_shape if len(input_shape) == 3 else (1, *input_shape)
    rows = np.arange(shape[0] * shape[1]).reshape(shape[0], shape[1], 1)
    flat = (rows * shape[2] + pos).ravel()
    grad_input = np.bincount(
        flat, weights=grad.ravel(), minlength=shape[0] * shape[1] * shape[2]
    ).reshape(shape).astype(grad.dtype, copy=False)
    return grad_input[0] if squeeze else grad_input


def dense(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map of (batch, features) rows."""
    if x.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise ShapeError("dense input", ("batch", weight.shape[0]), x.shape)
    return x @ weight + bias


def softmax(x: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, stabilized by max subtraction."""
    shifted = x - x.max(axis=-1, keepdims=True)
    expo = np.exp(shifted)
    return expo / expo.sum(axis=-1, keepdims=True)


def activation(kind: str, x: np.ndarray) -> np.ndarray:
    """Apply one of the supported activation functions."""
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "elu":
        return np.where(x > 0, x, ELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    if kind == "softmax":
        return softmax(x)
    raise NetworkError(f"Unknown activation {kind}, expected one of {ACTIVATIONS}")


def dropout(
    x: np.ndarray, rate: float, training: bool, rng: np.random.Generator | int
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout; returns the output and the scaled keep mask."""
    if not 0.0 <= rate < 1.0:
        raise NetworkError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    generator = np.random.default_rng(rng)
    mask = (generator.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of (batch, classes) logits and its gradient."""
    labels = np.asarray(labels)
    n_rows, n_classes = logits.shape
    if labels.shape != (n_rows,):
        raise ShapeError("labels", (n_rows,), labels.shape)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise NetworkError(f"labels must be class indices below {n_classes}")
    labels = labels.astype(int)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_prob = shifted[np.arange(n_rows), labels] - log_norm
    loss = float(-log_prob.mean())
    grad = softmax(logits)
    grad[np.arange(n_rows), labels] -= 1.0
    return loss, grad / n_rows


class Layer:
    """Base class holding parameters, gradients, buffers and child layers."""

    def __init__(self) -> None:
        """Initialize empty containers."""
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.children: dict[str, Layer] = {}
        self._cache: Any = None

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Compute the layer output, caching what backward needs."""
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Propagate the output gradient, filling ``grads``."""
        raise NotImplementedError

    def _cached(self) -> Any:
        if self._cache is None:
            raise NetworkError(f"{type(self).__name__}: backward called before forward")
        return self._cache

    def parameters(
        self, prefix: str = ""
    ) -> Iterator[tuple[str, np.ndarray, np.ndarray]]:
        """Yield (name, value, gradient) for every learnable tensor."""
        for name, value in self.params.items():
            grad = self.grads.get(name)
            if grad is None:
                grad = np.zeros_like(value)
                self.grads[name] = grad
            yield prefix + name, value, grad
        for child_name, child in self.children.items():
            yield from child.parameters(f"{prefix}{child_name}.")

    def state_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        """Return parameters and buffers keyed by dotted names."""
        state = {prefix + name: value for name, value in self.params.items()}
        state.update({prefix + name: value for name, value in self.buffers.items()})
        for child_name, child in self.children.items():
            state.update(child.state_dict(f"{prefix}{child_name}."))
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], prefix: str = "") -> None:
        """Copy values into the existing tensors (shapes must match)."""
        for store in (self.params, self.buffers):
            for name, value in store.items():
                key = prefix + name
                if key not in state:
                    raise NetworkError(f"Missing tensor {key} in state")
                if state[key].shape != value.shape:
                    raise ShapeError(key, value.shape, state[key].shape)
                value[...] = state[key]
        for child_name, child in self.children.items():
            child.load_state_dict(state, f"{prefix}{child_name}.")

    def zero_grad(self) -> None:
        """Reset every gradient to zero."""
        for _, _, grad in self.parameters():
            grad[...] = 0.0

    def parameter_count(self) -> int:
        """Return the number of learnable scalars."""
        return sum(value.size for _, value, _ in self.parameters())


class Conv1d(Layer):
    """Length-preserving 1-D convolution."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        rng: np.random.Generator,
        dtype: type = np.float64,
    ) -> None:
        """Initialize with uniform fan-in scaled weights."""
        super().__init__()
        if kernel % 2 == 0:
            raise NetworkError(f"kernel size must be odd, got {kernel}")
        bound = 1.0 / np.sqrt(in_channels * kernel)
        self.params["weight"] = rng.uniform(
            -bound, bound, (out_channels, in_channels, kernel)
        ).astype(dtype)
        self.params["bias"] = rng.uniform(-bound, bound, out_channels).astype(dtype)

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Convolve."""
        self._cache = x
        return conv1d(x, self.params["weight"], self.params["bias"])

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Backpropagate through the convolution."""
        grad_input, grad_weight, grad_bias = conv1d_backward(
            grad, self._cached(), self.params["weight"]
        )
        self.grads["weight"] = grad_weight
        self.grads["bias"] = grad_bias
        return grad_input


class MaxPool1d(Layer):
    """Max pooling over time."""

    def __init__(
        self, kernel: int = POOL_SIZE, stride: int = POOL_SIZE, same: bool = False
    ) -> None:
        """Initialize the window geometry."""
        super().__init__()
        self.kernel = kernel
        self.stride = stride
        self.same = same

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Pool."""
        out, positions = maxpool1d(x, self.kernel, self.stride, self.same)
        self._cache = (positions, x.shape)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Route gradients to the window maxima."""
        positions, shape = self._cached()
        return maxpool1d_backward(grad, positions, shape)


class BatchNorm1d(Layer):
    """Batch normalization per channel over batch and time."""

    def __init__(
        self,
        channels: int,
        momentum: float = BN_MOMENTUM,
        eps: float = BN_EPS,
        dtype: type = np.float64,
    ) -> None:
        """Initialize unit scale, zero shift and neutral running statistics."""
        super().__init__()
        if eps <= 0:
            raise NetworkError("batchnorm epsilon must be positive")
        self.momentum = momentum
        self.eps = eps
        self.params["gamma"] = np.ones(channels, dtype=dtype)
        self.params["beta"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_mean"] = np.zeros(channels, dtype=dtype)
        self.buffers["running_var"] = np.ones(channels, dtype=dtype)

    @staticmethod
    def _axes(x: np.ndarray) -> tuple[int, ...]:
        return (0, 2) if x.ndim == 3 else (0,)

    def _expand(self, vector: np.ndarray, ndim: int) -> np.ndarray:
        return vector[np.newaxis, :, np.newaxis] if ndim == 3 else vector[np.newaxis]

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Normalize with batch statistics (training) or running statistics."""
        channels = self.params["gamma"].shape[0]
        if x.ndim not in (2, 3) or x.shape[1] != channels:
            raise ShapeError("batchnorm input channels", channels, x.shape)
        axes = self._axes(x)
        gamma = self._expand(self.params["gamma"], x.ndim)
        beta = self._expand(self.params["beta"], x.ndim)
        if not training:
            inv_std = 1.0 / np.sqrt(self.buffers["running_var"] + self.eps)
            xhat = (x - self._expand(self.buffers["running_mean"], x.ndim)) * (
                self._expand(inv_std, x.ndim)
            )
            self._cache = ("eval", xhat, inv_std, x.ndim)
            return gamma * xhat + beta
        count = x.size // channels
        if count < 2:
            raise NetworkError("batchnorm needs at least two values per channel")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - self._expand(mean, x.ndim)) * self._expand(inv_std, x.ndim)
        self.buffers["running_mean"] *= 1.0 - self.momentum
        self.buffers["running_mean"] += self.momentum * mean
        self.buffers["running_var"] *= 1.0 - self.momentum
        self.buffers["running_var"] += self.momentum * var * count / (count - 1)
        self._cache = ("train", xhat, inv_std, x.ndim)
        return gamma * xhat + beta

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Backpropagate through the normalization."""
        mode, xhat, inv_std, ndim = self._cached()
        axes = (0, 2) if ndim == 3 else (0,)
        self.grads["gamma"] = (grad * xhat).sum(axis=axes)
        self.grads["beta"] = grad.sum(axis=axes)
        dxhat = grad * self._expand(self.params["gamma"], ndim)
        if mode == "eval":
            return dxhat * self._expand(inv_std, ndim)
        count = xhat.size // xhat.shape[1]
        sum_dxhat = self._expand(dxhat.sum(axis=axes), ndim)
        sum_dxhat_xhat = self._expand((dxhat * xhat).sum(axis=axes), ndim)
        return (
            self._expand(inv_std, ndim)
            / count
            * (count * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
        )


class Dense(Layer):
    """Fully connected layer."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        dtype: type = np.float64,
    ) -> None:
        """Initialize with uniform fan-in scaled weights."""
        super().__init__()
        bound = 1.0 / np.sqrt(in_features)
        self.params["weight"] = rng.uniform(
            -bound, bound, (in_features, out_features)
        ).astype(dtype)
        self.params["bias"] = rng.uniform(-bound, bound, out_features).astype(dtype)

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Apply the affine map."""
        self._cache = x
        return dense(x, self.params["weight"], self.params["bias"])

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Backpropagate through the affine map."""
        x = self._cached()
        self.grads["weight"] = x.T @ grad
        self.grads["bias"] = grad.sum(axis=0)
        return grad @ self.params["weight"].T


class ReLU(Layer):
    """Rectified linear unit."""

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Clip negatives."""
        self._cache = x > 0
        return activation("relu", x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Pass gradients where the input was positive."""
        return grad * self._cached()


class ELU(Layer):
    """Exponential linear unit with alpha = 1."""

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Apply ELU."""
        out = activation("elu", x)
        self._cache = (x, out)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """d/dx is 1 above zero and out + alpha below."""
        x, out = self._cached()
        return grad * np.where(x > 0, 1.0, out + ELU_ALPHA)


class Dropout(Layer):
    """Inverted dropout driven by a seeded generator."""

    def __init__(self, rate: float, rng: np.random.Generator) -> None:
        """Initialize with the drop probability."""
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise NetworkError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Zero elements with probability ``rate`` while training."""
        out, mask = dropout(x, self.rate, training, self.rng)
        self._cache = mask if mask is not None else False
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Apply the same mask to the gradient."""
        mask = self._cached()
        return grad if mask is False else grad * mask


class Sequential(Layer):
    """Layers applied one after another."""

    def __init__(self, *layers: Layer) -> None:
        """Register the layers as numbered children."""
        super().__init__()
        for idx, layer in enumerate(layers):
            self.children[str(idx)] = layer

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Run every layer."""
        for layer in self.children.values():
            x = layer.forward(x, training)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Backpropagate in reverse order."""
        for layer in reversed(list(self.children.values())):
            grad = layer.backward(grad)
        return grad
