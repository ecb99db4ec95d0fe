"""Cross-validation plans and test windowing."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np

from .const import MODE_SI, MODE_SS, N_FOLDS, TEST_OVERLAP, TRAIN_VAL_RATIO
from .dataset import Trial
from .exceptions import FoldError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialRef:
    """Reference to a trial and the stimulus its subject attended."""

    subject_id: str
    trial_id: str
    attended_stimulus: str

    @classmethod
    def of(cls, trial: Trial) -> TrialRef:
        """Build a reference from a trial."""
        return cls(trial.subject_id, trial.trial_id, trial.attended_stimulus)

    @property
    def key(self) -> tuple[str, str]:
        """Return (subject id, trial id), the same key as ``Trial.key``."""
        return (self.subject_id, self.trial_id)


@dataclass(frozen=True)
class FoldPlan:
    """Train, validation and test trials of one fold."""

    fold: int
    mode: str
    test_subject: str
    train: tuple[TrialRef, ...]
    val: tuple[TrialRef, ...]
    test: tuple[TrialRef, ...]

    @property
    def fit(self) -> tuple[TrialRef, ...]:
        """Train and validation trials together."""
        return self.train + self.val

    def check(self) -> None:
        """Raise FoldError if a trial has two roles or a test stimulus leaks."""
        roles = [set(ref.key for ref in refs) for refs in (self.train, self.val, self.test)]
        if roles[0] & roles[1] or roles[0] & roles[2] or roles[1] & roles[2]:
            raise FoldError(f"Fold {self.fold}: a trial appears in two roles")
        if self.mode == MODE_SI:
            leaked = {ref.attended_stimulus for ref in self.test} & {
                ref.attended_stimulus for ref in self.fit
            }
            if leaked:
                raise FoldError(f"Fold {self.fold}: test stimuli {sorted(leaked)} used in training")


@dataclass(frozen=True)
class WindowSpec:
    """Window length in seconds and the overlap fraction between windows."""

    length: float
    overlap: float = TEST_OVERLAP

    def __post_init__(self) -> None:
        """Validate the geometry."""
        if self.length <= 0:
            raise FoldError(f"Window length must be positive, got {self.length}")
        if not 0.0 <= self.overlap < 1.0:
            raise FoldError(f"Overlap must be in [0, 1), got {self.overlap}")


def assign_folds(n_trials: int, n_folds: int, seed: int) -> list[np.ndarray]:
    """Seeded assignment of trial indices to test folds."""
    order = np.random.default_rng(seed).permutation(n_trials)
    return [np.sort(fold) for fold in np.array_split(order, n_folds)]


def split_train_val(
    refs: Sequence[TrialRef], rng: np.random.Generator, ratio: int = TRAIN_VAL_RATIO
) -> tuple[tuple[TrialRef, ...], tuple[TrialRef, ...]]:
    """Split trials ratio:1 into train and validation at random."""
    if len(refs) < 2:
        raise FoldError(f"Need at least 2 trials for a train/validation split, got {len(refs)}")
    n_val = max(1, int(round(len(refs) / (ratio + 1))))
    order = rng.permutation(len(refs))
    val = tuple(refs[idx] for idx in sorted(order[:n_val]))
    train = tuple(refs[idx] for idx in sorted(order[n_val:]))
    return train, val


def split_ss(trials: Sequence[Trial], n_folds: int = N_FOLDS, seed: int = 0) -> list[FoldPlan]:
    """Subject-specific plans: one fold tests, the rest split 4:1 train/validation."""
    if len(trials) < n_folds:
        raise FoldError(f"Need at least {n_folds} trials for {n_folds} folds, got {len(trials)}")
    subjects = {trial.subject_id for trial in trials}
    if len(subjects) != 1:
        raise FoldError(f"Subject-specific split expects one subject, got {sorted(subjects)}")
    refs = [TrialRef.of(trial) for trial in trials]
    plans = []
    for fold, test_idx in enumerate(assign_folds(len(refs), n_folds, seed)):
        held = set(test_idx.tolist())
        rest = [ref for idx, ref in enumerate(refs) if idx not in held]
        train, val = split_train_val(rest, np.random.default_rng([seed, fold]))
        plan = FoldPlan(
            fold, MODE_SS, refs[0].subject_id, train, val, tuple(refs[idx] for idx in test_idx)
        )
        plan.check()
        plans.append(plan)
    return plans


def split_si_cross_trial(
    trials: Sequence[Trial], test_subject: str, n_folds: int = N_FOLDS, seed: int = 0
) -> list[FoldPlan]:
    """Cross-trial leave-one-subject-out plans.

    The test subject's trials get the same fold assignment as ``split_ss``; the
    other folds of that subject are unused. Other subjects' trials whose
    attended stimulus is attended in the test fold are excluded from training.
    """
    subjects = list(dict.fromkeys(trial.subject_id for trial in trials))
    if len(subjects) < 2:
        raise FoldError("Leave-one-subject-out needs at least 2 subjects")
    if test_subject not in subjects:
        raise FoldError(f"Unknown test subject {test_subject}")
    own = [TrialRef.of(trial) for trial in trials if trial.subject_id == test_subject]
    others = [TrialRef.of(trial) for trial in trials if trial.subject_id != test_subject]
    if len(own) < n_folds:
        raise FoldError(f"Need at least {n_folds} trials for {n_folds} folds, got {len(own)}")
    plans = []
    for fold, test_idx in enumerate(assign_folds(len(own), n_folds, seed)):
        test = tuple(own[idx] for idx in test_idx)
        blocked = {ref.attended_stimulus for ref in test}
        pool = [ref for ref in others if ref.attended_stimulus not in blocked]
        if len(pool) < 2:
            raise FoldError(
                f"Fold {fold} of {test_subject}: stimulus filtering leaves {len(pool)} training trials"
            )
        if len(pool) < len(others):
            _LOGGER.debug(
                "Fold %s of %s: excluded %s trials sharing test stimuli",
                fold,
                test_subject,
                len(others) - len(pool),
            )
        train, val = split_train_val(pool, np.random.default_rng([seed, fold]))
        plan = FoldPlan(fold, MODE_SI, test_subject, train, val, test)
        plan.check()
        plans.append(plan)
    return plans


def make_windows(
    n_samples: int, rate: float, spec: WindowSpec
) -> tuple[list[tuple[int, int]], bool]:
    """Uniformly strided (start, end) sample windows and whether the trial was too short."""
    length = int(round(spec.length * rate))
    if n_samples < length:
        return [], True
    stride = max(1, int(round(length * (1.0 - spec.overlap))))
    count = (n_samples - length) // stride + 1
    return [(idx * stride, idx * stride + length) for idx in range(count)], False


def trial_windows(trial: Trial, spec: WindowSpec) -> list[tuple[int, int]]:
    """Windows of one trial; warns and returns none if the trial is too short."""
    windows, short = make_windows(trial.n_samples, trial.rate, spec)
    if short:
        _LOGGER.warning(
            "Trial %s/%s (%.1f s) is shorter than the %s s window",
            trial.subject_id,
            trial.trial_id,
            trial.duration,
            spec.length,
        )
    return windows


def non_overlapping_count(trials: Sequence[Trial], length: float) -> int:
    """Number of disjoint windows of ``length`` seconds in the trials."""
    return sum(math.floor(trial.duration / length + 1e-9) for trial in trials)
