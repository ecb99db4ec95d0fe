"""Accuracy, binomial chance level and paired permutation statistics."""
from __future__ import annotations

from collections.abc import Sequence
import logging

import numpy as np
from scipy import stats

from .const import CHANCE_QUANTILE, N_PERMUTATIONS
from .exceptions import AadkitError

_LOGGER = logging.getLogger(__name__)


def accuracy(decisions: Sequence[int], labels: Sequence[int]) -> float:
    """Fraction of decisions equal to the labels."""
    decisions = np.asarray(decisions)
    labels = np.asarray(labels)
    if decisions.shape != labels.shape:
        raise AadkitError(f"{decisions.size} decisions for {labels.size} labels")
    if decisions.size == 0:
        _LOGGER.warning("Accuracy of an empty window list is undefined")
        return float("nan")
    return float(np.mean(decisions == labels))


def chance_level(n_windows: int, quantile: float = CHANCE_QUANTILE) -> float:
    """Upper 95th percentile of the fraction correct when guessing n times."""
    if n_windows < 1:
        raise AadkitError(f"Chance level needs at least one window, got {n_windows}")
    return float(stats.binom.ppf(quantile, n_windows, 0.5) / n_windows)


def paired_permutation_test(
    first: Sequence[float],
    second: Sequence[float],
    n_perm: int = N_PERMUTATIONS,
    seed: int = 0,
) -> float:
    """Two-sided p-value of the mean paired difference under sign flipping."""
    first = np.asarray(first, dtype=np.float64)
    second = np.asarray(second, dtype=np.float64)
    if first.shape != second.shape or first.ndim != 1:
        raise AadkitError(f"Paired samples differ in shape: {first.shape} vs {second.shape}")
    if n_perm < 1:
        raise AadkitError("n_perm must be positive")
    if np.allclose(first, second, rtol=0.0, atol=1e-15):
        return 1.0
    result = stats.permutation_test(
        (first, second),
        lambda x, y, axis: np.mean(x - y, axis=axis),
        permutation_type="samples",
        vectorized=True,
        n_resamples=n_perm,
        alternative="two-sided",
        random_state=np.random.default_rng(seed),
    )
    return float(min(1.0, result.pvalue))


def bonferroni(p_values: Sequence[float], m: int | None = None) -> list[float]:
    """Multiply by the number of comparisons and clip at 1; missing p-values stay NaN."""
    p_values = np.asarray(p_values, dtype=np.float64)
    m = int(np.count_nonzero(~np.isnan(p_values))) if m is None else m
    return np.minimum(1.0, p_values * m).tolist()
