"""AADNet: 1-D Inception branches for EEG and audio joined by a correlation layer."""
from __future__ import annotations

from dataclasses import dataclass
import logging
from typing import Final

import numpy as np

from .const import MIN_WINDOW_SAMPLES, POOL_SIZE
from .exceptions import NetworkError, ShapeError
from .layers import (
    ELU,
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    Layer,
    MaxPool1d,
    ReLU,
    Sequential,
    softmax,
)

_LOGGER = logging.getLogger(__name__)

BRANCH_TRANSFORM = "transform"
BRANCH_FEATURE = "feature"
BRANCH_POOL = "pool"

DEGENERATE_NORM = 1e-10


@dataclass(frozen=True)
class InceptionBranch:
    """One parallel path of an Inception block."""

    kind: str
    out_channels: int
    kernel: int = 1
    reduce: int | None = None


EEG_INCEPTION: Final = (
    InceptionBranch(BRANCH_TRANSFORM, 32),
    InceptionBranch(BRANCH_FEATURE, 8, kernel=19, reduce=16),
    InceptionBranch(BRANCH_FEATURE, 8, kernel=25, reduce=8),
    InceptionBranch(BRANCH_FEATURE, 8, kernel=33, reduce=4),
    InceptionBranch(BRANCH_FEATURE, 8, kernel=39, reduce=2),
    InceptionBranch(BRANCH_POOL, 8),
)

AUDIO_INCEPTION: Final = (
    InceptionBranch(BRANCH_TRANSFORM, 1),
    InceptionBranch(BRANCH_FEATURE, 4, kernel=65, reduce=1),
    InceptionBranch(BRANCH_FEATURE, 4, kernel=81, reduce=1),
)


def inception_channels(spec: tuple[InceptionBranch, ...]) -> int:
    """Channel count of the concatenated branch outputs."""
    return sum(branch.out_channels for branch in spec)


class Inception(Layer):
    """Parallel branches with ReLU outputs concatenated along channels."""

    def __init__(
        self,
        in_channels: int,
        spec: tuple[InceptionBranch, ...],
        rng: np.random.Generator,
        dtype: type = np.float64,
    ) -> None:
        """Build every branch of the block."""
        super().__init__()
        self.in_channels = in_channels
        self.splits: list[int] = []
        for idx, branch in enumerate(spec):
            if branch.kind == BRANCH_TRANSFORM:
                layers = [Conv1d(in_channels, branch.out_channels, 1, rng, dtype)]
            elif branch.kind == BRANCH_FEATURE:
                reduce = branch.reduce or in_channels
                layers = [
                    Conv1d(in_channels, reduce, 1, rng, dtype),
                    Conv1d(reduce, branch.out_channels, branch.kernel, rng, dtype),
                ]
            elif branch.kind == BRANCH_POOL:
                layers = [
                    MaxPool1d(POOL_SIZE, 1, same=True),
                    Conv1d(in_channels, branch.out_channels, 1, rng, dtype),
                ]
            else:
                raise NetworkError(f"Unknown Inception branch kind {branch.kind}")
            self.children[str(idx)] = Sequential(*layers, ReLU())
            self.splits.append(branch.out_channels)
        self.out_channels = sum(self.splits)

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Run every branch and concatenate."""
        if x.shape[-2] != self.in_channels:
            raise ShapeError("Inception input channels", self.in_channels, x.shape[-2])
        self._cache = True
        outputs = [branch.forward(x, training) for branch in self.children.values()]
        return np.concatenate(outputs, axis=-2)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Split the gradient per branch and sum the input gradients."""
        self._cached()
        bounds = np.cumsum(self.splits)[:-1]
        pieces = np.split(grad, bounds, axis=-2)
        return sum(
            branch.backward(piece)
            for branch, piece in zip(self.children.values(), pieces)
        )


def _normalize_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center over time and scale to unit norm; degenerate rows become zero."""
    centered = x - x.mean(axis=-1, keepdims=True)
    norm = np.linalg.norm(centered, axis=-1, keepdims=True)
    safe = np.where(norm > DEGENERATE_NORM, norm, np.inf)
    return centered / safe, safe


def _normalize_rows_backward(grad: np.ndarray, unit: np.ndarray, norm: np.ndarray) -> np.ndarray:
    projected = grad - grad.mean(axis=-1, keepdims=True)
    projected -= unit * (unit * grad).sum(axis=-1, keepdims=True)
    return projected / norm


def correlation_forward(
    eeg_feat: np.ndarray, audio_feat: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    """Pearson correlation of every (EEG channel, audio channel) pair over time.

    Inputs are (batch, C, T); the result is (batch, C_eeg * C_audio), EEG-major.
    """
    if eeg_feat.ndim != 3 or audio_feat.ndim != 3:
        raise ShapeError("correlation inputs", "(batch, channels, time)", (eeg_feat.shape, audio_feat.shape))
    if eeg_feat.shape[0] != audio_feat.shape[0] or eeg_feat.shape[2] != audio_feat.shape[2]:
        raise ShapeError("correlation input lengths", eeg_feat.shape, audio_feat.shape)
    if eeg_feat.shape[2] < 2:
        raise NetworkError("correlation layer needs at least 2 time samples")
    eeg_unit, eeg_norm = _normalize_rows(eeg_feat)
    audio_unit, audio_norm = _normalize_rows(audio_feat)
    corr = np.einsum("bit,bjt->bij", eeg_unit, audio_unit)
    return corr.reshape(corr.shape[0], -1), (eeg_unit, eeg_norm, audio_unit, audio_norm)


def correlation_backward(
    grad: np.ndarray, cache: tuple[np.ndarray, ...]
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the correlation features with respect to both inputs."""
    eeg_unit, eeg_norm, audio_unit, audio_norm = cache
    grad = grad.reshape(eeg_unit.shape[0], eeg_unit.shape[1], audio_unit.shape[1])
    grad_eeg_unit = np.einsum("bij,bjt->bit", grad, audio_unit)
    grad_audio_unit = np.einsum("bij,bit->bjt", grad, eeg_unit)
    return (
        _normalize_rows_backward(grad_eeg_unit, eeg_unit, eeg_norm),
        _normalize_rows_backward(grad_audio_unit, audio_unit, audio_norm),
    )


class CorrelationLayer(Layer):
    """Parameter-free layer wrapping the pairwise correlation."""

    def forward(self, eeg_feat: np.ndarray, audio_feat: np.ndarray, training: bool = False) -> np.ndarray:
        """Correlate."""
        out, self._cache = correlation_forward(eeg_feat, audio_feat)
        return out

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return gradients for the EEG and audio features."""
        return correlation_backward(grad, self._cached())


def _branch(
    in_channels: int,
    spec: tuple[InceptionBranch, ...],
    rng: np.random.Generator,
    dtype: type,
) -> Sequential:
    inception = Inception(in_channels, spec, rng, dtype)
    return Sequential(
        BatchNorm1d(in_channels, dtype=dtype),
        inception,
        MaxPool1d(POOL_SIZE, POOL_SIZE),
        BatchNorm1d(inception.out_channels, dtype=dtype),
    )


def _as_signal_batch(x: np.ndarray, channels: int, what: str) -> np.ndarray:
    x = np.asarray(x)
    if channels == 1 and x.ndim == 1:
        x = x[np.newaxis, np.newaxis]
    elif channels == 1 and x.ndim == 2 and x.shape[0] != 1:
        x = x[:, np.newaxis]
    elif x.ndim == 2:
        x = x[np.newaxis]
    if x.ndim != 3 or x.shape[1] != channels:
        raise ShapeError(what, f"(batch, {channels}, time)", x.shape)
    return x


class AADNet(Layer):
    """Two-stream attention classifier producing logits for (A attended, B attended)."""

    def __init__(
        self,
        n_channels: int,
        hidden: int = 16,
        dropout: float = 0.5,
        seed: int = 0,
        eeg_spec: tuple[InceptionBranch, ...] = EEG_INCEPTION,
        audio_spec: tuple[InceptionBranch, ...] = AUDIO_INCEPTION,
        dtype: type = np.float64,
    ) -> None:
        """Initialize every layer from one seeded generator."""
        super().__init__()
        rng = np.random.default_rng(seed)
        self.n_channels = n_channels
        self.hidden = hidden
        self.dropout = dropout
        self.dtype = dtype
        self.children["eeg"] = _branch(n_channels, eeg_spec, rng, dtype)
        # one audio branch serves both streams
        self.children["audio"] = _branch(1, audio_spec, rng, dtype)
        self.n_features = 2 * inception_channels(eeg_spec) * inception_channels(audio_spec)
        head: list[Layer] = [Dropout(dropout, rng), Dense(self.n_features, hidden or 2, rng, dtype)]
        if hidden:
            head += [
                ELU(),
                Dropout(dropout, rng),
                BatchNorm1d(hidden, dtype=dtype),
                Dense(hidden, 2, rng, dtype),
            ]
        self.children["head"] = Sequential(*head)

    def forward(
        self,
        eeg: np.ndarray,
        env_a: np.ndarray,
        env_b: np.ndarray,
        training: bool = False,
    ) -> np.ndarray:
        """Return (batch, 2) logits."""
        eeg_batch = _as_signal_batch(eeg, self.n_channels, "EEG input")
        audio_a = _as_signal_batch(env_a, 1, "stream A envelope")
        audio_b = _as_signal_batch(env_b, 1, "stream B envelope")
        if not eeg_batch.shape == (audio_a.shape[0], self.n_channels, audio_a.shape[2]) or (
            audio_a.shape != audio_b.shape
        ):
            raise ShapeError("AADNet inputs", eeg_batch.shape, (audio_a.shape, audio_b.shape))
        if eeg_batch.shape[2] < MIN_WINDOW_SAMPLES:
            raise NetworkError(
                f"Input of {eeg_batch.shape[2]} samples is too short, "
                f"need at least {MIN_WINDOW_SAMPLES} (1 s)"
            )
        batch = eeg_batch.shape[0]
        eeg_feat = self.children["eeg"].forward(eeg_batch, training)
        audio_feat = self.children["audio"].forward(
            np.concatenate([audio_a, audio_b], axis=0), training
        )
        corr_a, cache_a = correlation_forward(eeg_feat, audio_feat[:batch])
        corr_b, cache_b = correlation_forward(eeg_feat, audio_feat[batch:])
        self._cache = (cache_a, cache_b, np.shape(eeg), np.shape(env_a), batch)
        return self.children["head"].forward(np.concatenate([corr_a, corr_b], axis=1), training)

    def backward(self, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Backpropagate logits gradients; returns gradients of the three inputs."""
        cache_a, cache_b, eeg_shape, env_shape, batch = self._cached()
        grad_feat = self.children["head"].backward(grad)
        half = grad_feat.shape[1] // 2
        grad_eeg_a, grad_audio_a = correlation_backward(grad_feat[:, :half], cache_a)
        grad_eeg_b, grad_audio_b = correlation_backward(grad_feat[:, half:], cache_b)
        grad_eeg = self.children["eeg"].backward(grad_eeg_a + grad_eeg_b)
        grad_audio = self.children["audio"].backward(
            np.concatenate([grad_audio_a, grad_audio_b], axis=0)
        )
        return (
            grad_eeg.reshape(eeg_shape),
            grad_audio[:batch].reshape(env_shape),
            grad_audio[batch:].reshape(env_shape),
        )

    def predict_proba(self, eeg: np.ndarray, env_a: np.ndarray, env_b: np.ndarray) -> np.ndarray:
        """Eval-mode class probabilities, (batch, 2)."""
        return softmax(self.forward(eeg, env_a, env_b, training=False))

    def config(self) -> dict[str, float | int]:
        """Constructor arguments stored next to a checkpoint."""
        return {"n_channels": self.n_channels, "hidden": self.hidden, "dropout": self.dropout}


def aadnet_forward(
    model: AADNet, eeg: np.ndarray, env_a: np.ndarray, env_b: np.ndarray, training: bool = False
) -> np.ndarray:
    """Probabilities of (A attended, B attended) for a single window."""
    probs = softmax(model.forward(eeg, env_a, env_b, training))
    return probs[0] if np.ndim(eeg) == 2 else probs
