"""AADNet training: window segmentation, swap augmentation, early stopping, search."""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field, replace
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from .checkpoint import save_checkpoint
from .const import (
    BATCH_SIZES,
    DROPOUTS,
    FINETUNE_LR_FACTOR,
    HIDDEN_UNITS,
    LEARNING_RATE,
    MAX_EPOCHS,
    PATIENCE,
    TRAIN_LOG_COLUMNS,
    TRAIN_OVERLAP,
    TRAIN_WINDOW_S,
    WEIGHT_DECAYS,
)
from .dataset import Trial
from .exceptions import TrainingError
from .folds import WindowSpec, trial_windows
from .layers import softmax_cross_entropy
from .network import AADNet
from .optim import AdamW

_LOGGER = logging.getLogger(__name__)

EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one AADNet training run."""

    lr: float = LEARNING_RATE
    batch_size: int = 64
    weight_decay: float = 1e-3
    dropout: float = 0.5
    hidden: int = 16
    max_epochs: int = MAX_EPOCHS
    patience: int = PATIENCE
    finetune_lr: float | None = None
    window_s: float = TRAIN_WINDOW_S
    overlap: float = TRAIN_OVERLAP
    seed: int = 0

    @property
    def finetune_rate(self) -> float:
        """Fine-tuning learning rate, lr/10 unless set."""
        return self.finetune_lr if self.finetune_lr is not None else self.lr * FINETUNE_LR_FACTOR


@dataclass
class WindowSet:
    """Fixed-length windows: EEG (M, N, W), envelopes (M, W), labels (M,)."""

    eeg: np.ndarray
    env_a: np.ndarray
    env_b: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        """Return the number of windows."""
        return self.labels.size

    def subset(self, index: np.ndarray) -> WindowSet:
        """Windows at the given positions."""
        return WindowSet(self.eeg[index], self.env_a[index], self.env_b[index], self.labels[index])


def segment_trials(
    trials: Sequence[Trial], window_s: float = TRAIN_WINDOW_S, overlap: float = TRAIN_OVERLAP
) -> WindowSet:
    """Cut trials into fixed-length windows labelled with the attended stream."""
    spec = WindowSpec(window_s, overlap)
    eeg, env_a, env_b, labels = [], [], [], []
    for trial in trials:
        for start, end in trial_windows(trial, spec):
            eeg.append(trial.eeg[:, start:end])
            env_a.append(trial.env_a[start:end])
            env_b.append(trial.env_b[start:end])
            labels.append(trial.attended)
    if not labels:
        raise TrainingError(f"No trial is long enough for {window_s} s training windows")
    return WindowSet(np.stack(eeg), np.stack(env_a), np.stack(env_b), np.array(labels))


def augment_swap(batch: WindowSet) -> WindowSet:
    """Append every window again with the streams swapped and the label flipped."""
    return WindowSet(
        np.concatenate([batch.eeg, batch.eeg]),
        np.concatenate([batch.env_a, batch.env_b]),
        np.concatenate([batch.env_b, batch.env_a]),
        np.concatenate([batch.labels, 1 - batch.labels]),
    )


@dataclass
class EpochRecord:
    """One line of the training log."""

    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    checkpoint: bool


@dataclass
class TrainResult:
    """Best weights of a run and its per-epoch log."""

    state: dict[str, np.ndarray]
    best_val_loss: float
    log: list[EpochRecord] = field(default_factory=list)

    def log_frame(self) -> pd.DataFrame:
        """Training log with fixed columns."""
        return pd.DataFrame([asdict(record) for record in self.log], columns=list(TRAIN_LOG_COLUMNS))


def evaluate(model: AADNet, windows: WindowSet) -> tuple[float, float]:
    """Eval-mode cross-entropy and accuracy."""
    losses, correct = [], 0
    for start in range(0, len(windows), EVAL_BATCH):
        part = windows.subset(np.arange(start, min(start + EVAL_BATCH, len(windows))))
        logits = model.forward(part.eeg, part.env_a, part.env_b, training=False)
        loss, _ = softmax_cross_entropy(logits, part.labels)
        losses.append(loss * len(part))
        correct += int(np.sum(logits.argmax(axis=1) == part.labels))
    return float(np.sum(losses) / len(windows)), correct / len(windows)


def _snapshot(model: AADNet) -> dict[str, np.ndarray]:
    return {name: value.copy() for name, value in model.state_dict().items()}


def train(
    model: AADNet,
    train_set: WindowSet,
    val_set: WindowSet,
    config: TrainConfig,
    checkpoint_path: str | Path | None = None,
    lr: float | None = None,
    keep_initial: bool = False,
) -> TrainResult:
    """AdamW on swap-augmented batches with early stopping on the validation loss.

    The model ends up holding the best weights. With ``keep_initial`` the
    starting weights count as the first candidate, so the result is never
    worse on validation than the initialization.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise TrainingError("Training and validation sets must not be empty")
    rng = np.random.default_rng(config.seed)
    optimizer = AdamW(model, lr=config.lr if lr is None else lr, weight_decay=config.weight_decay)
    augmented = augment_swap(train_set)
    best_state = _snapshot(model)
    best_loss = evaluate(model, val_set)[0] if keep_initial else np.inf
    result = TrainResult(best_state, best_loss)
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(augmented))
        epoch_loss, seen = 0.0, 0
        for start in range(0, order.size, config.batch_size):
            index = order[start : start + config.batch_size]
            if index.size < 2:
                continue
            batch = augmented.subset(index)
            optimizer.zero_grad()
            logits = model.forward(batch.eeg, batch.env_a, batch.env_b, training=True)
            loss, grad = softmax_cross_entropy(logits, batch.labels)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"Non-finite loss at epoch {epoch}, batch {start // config.batch_size} "
                    f"(lr={optimizer.state.lr}, weight decay={config.weight_decay})"
                )
            model.backward(grad)
            optimizer.step()
            epoch_loss += loss * index.size
            seen += index.size
        val_loss, val_acc = evaluate(model, val_set)
        improved = val_loss < best_loss
        if improved:
            best_loss = val_loss
            best_state = _snapshot(model)
            stale = 0
            if checkpoint_path is not None:
                save_checkpoint(
                    checkpoint_path,
                    best_state,
                    {"epoch": epoch, "val_loss": val_loss, "model": model.config()},
                )
        else:
            stale += 1
        result.log.append(
            EpochRecord(epoch, epoch_loss / max(seen, 1), val_loss, val_acc, improved)
        )
        _LOGGER.debug(
            "Epoch %s: train %.4f, val %.4f (acc %.3f)%s",
            epoch,
            result.log[-1].train_loss,
            val_loss,
            val_acc,
            " *" if improved else "",
        )
        if stale >= config.patience:
            _LOGGER.debug("Early stop after %s epochs without improvement", stale)
            break
    model.load_state_dict(best_state)
    result.state = best_state
    result.best_val_loss = float(best_loss)
    return result


def finetune_ss(
    model: AADNet,
    train_set: WindowSet,
    val_set: WindowSet,
    config: TrainConfig,
    checkpoint_path: str | Path | None = None,
) -> TrainResult:
    """Continue training a subject-independent model on one subject at a reduced rate."""
    return train(
        model,
        train_set,
        val_set,
        config,
        checkpoint_path=checkpoint_path,
        lr=config.finetune_rate,
        keep_initial=True,
    )


@dataclass(frozen=True)
class SearchGrid:
    """Candidate values of the random search."""

    batch_size: tuple[int, ...] = BATCH_SIZES
    weight_decay: tuple[float, ...] = WEIGHT_DECAYS
    dropout: tuple[float, ...] = DROPOUTS
    hidden: tuple[int, ...] = HIDDEN_UNITS


@dataclass
class SearchResult:
    """Best configuration and every sampled one with its validation loss."""

    best: TrainConfig
    trials: list[tuple[TrainConfig, float]]

    def frame(self) -> pd.DataFrame:
        """One row per sampled configuration."""
        rows = [
            {
                "batch_size": cfg.batch_size,
                "weight_decay": cfg.weight_decay,
                "dropout": cfg.dropout,
                "hidden": cfg.hidden,
                "val_loss": loss,
            }
            for cfg, loss in self.trials
        ]
        return pd.DataFrame(rows)


def random_search(
    build: Callable[[TrainConfig], AADNet],
    train_set: WindowSet,
    val_set: WindowSet,
    base: TrainConfig,
    budget: int,
    grid: SearchGrid | None = None,
    seed: int = 0,
) -> SearchResult:
    """Sample configurations uniformly from the grid, keep the lowest validation loss."""
    if budget < 1:
        raise TrainingError(f"Search budget must be at least 1, got {budget}")
    grid = grid or SearchGrid()
    rng = np.random.default_rng(seed)
    sampled: list[tuple[TrainConfig, float]] = []
    for idx in range(budget):
        config = replace(
            base,
            batch_size=int(rng.choice(grid.batch_size)),
            weight_decay=float(rng.choice(grid.weight_decay)),
            dropout=float(rng.choice(grid.dropout)),
            hidden=int(rng.choice(grid.hidden)),
        )
        result = train(build(config), train_set, val_set, config)
        _LOGGER.info(
            "Search %s/%s: batch %s, decay %s, dropout %s, hidden %s -> val loss %.4f",
            idx + 1,
            budget,
            config.batch_size,
            config.weight_decay,
            config.dropout,
            config.hidden,
            result.best_val_loss,
        )
        sampled.append((config, result.best_val_loss))
    best = min(sampled, key=lambda item: item[1])[0]
    return SearchResult(best, sampled)
