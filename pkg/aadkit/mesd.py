"""Minimal expected switch duration of an attention-steered gain control chain.

The gain controller is a birth-death chain over K states that moves one state
up after a correct decision (probability p) and one state down otherwise,
reflecting at both ends. The comfort state is ceil(c * K). For every decision
length tau the smallest K whose stationary mass at or above the comfort state
reaches the confidence is used; the switch duration is tau times the expected
number of steps from state 1 to the comfort state.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np
import pandas as pd

from .const import (
    MESD_CENSOR_S,
    MESD_COLUMNS,
    MESD_COMFORT,
    MESD_CONFIDENCE,
    MESD_GRID_POINTS,
    MESD_MAX_STATES,
    MESD_MIN_STATES,
)
from .exceptions import MesdError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class MesdConfig:
    """Chain and grid parameters."""

    min_states: int = MESD_MIN_STATES
    max_states: int = MESD_MAX_STATES
    confidence: float = MESD_CONFIDENCE
    comfort: float = MESD_COMFORT
    censor_s: float = MESD_CENSOR_S
    grid_points: int = MESD_GRID_POINTS


@dataclass(frozen=True)
class MesdResult:
    """MESD in seconds with the decision length that achieves it."""

    mesd: float
    tau_opt: float
    censored: bool
    n_states: int | None = None


def comfort_state(n_states: int | np.ndarray, comfort: float = MESD_COMFORT) -> np.ndarray:
    """1-based index of the lowest comfort state."""
    return np.ceil(comfort * np.asarray(n_states) - 1e-12).astype(int)


def comfort_mass(p: float, n_states: np.ndarray, comfort: float = MESD_COMFORT) -> np.ndarray:
    """Stationary probability of being at or above the comfort state."""
    n_states = np.asarray(n_states)
    target = comfort_state(n_states, comfort)
    if p >= 1.0:
        return np.ones(n_states.shape)
    if p <= 0.0:
        return (target <= 1).astype(float)
    ratio = p / (1.0 - p)
    if math.isclose(ratio, 1.0):
        return (n_states - target + 1) / n_states
    if ratio > 1.0:
        inv = 1.0 / ratio
        return (1.0 - inv ** (n_states - target + 1)) / (1.0 - inv**n_states)
    return (ratio ** (target - 1) - ratio**n_states) / (1.0 - ratio**n_states)


def minimal_states(p: float, config: MesdConfig | None = None) -> int | None:
    """Smallest chain size meeting the confidence, or None if no size does."""
    config = config or MesdConfig()
    sizes = np.arange(config.min_states, config.max_states + 1)
    feasible = np.nonzero(comfort_mass(p, sizes, config.comfort) >= config.confidence)[0]
    return int(sizes[feasible[0]]) if feasible.size else None


def expected_hitting_time(p: float, target: int, start: int = 1) -> float:
    """Expected steps of the reflecting walk from ``start`` to ``target`` (1-based).

    With h_i the expected steps from state i to i + 1, h_1 = 1/p and
    h_i = 1/p + (q/p) h_(i-1).
    """
    if not 0.0 < p <= 1.0:
        raise MesdError(f"Up probability must be in (0, 1], got {p}")
    if start > target:
        raise MesdError("Start state must not be above the target")
    q = 1.0 - p
    total = 0.0
    step = 0.0
    for state in range(1, target):
        step = 1.0 / p + (q / p) * step
        if state >= start:
            total += step
    return total


def mesd(
    window_lengths: Sequence[float],
    accuracies: Sequence[float],
    config: MesdConfig | None = None,
) -> MesdResult:
    """Minimal expected switch duration over an interpolated decision-length grid."""
    config = config or MesdConfig()
    taus = np.asarray(window_lengths, dtype=np.float64)
    probs = np.asarray(accuracies, dtype=np.float64)
    if taus.size < 2 or taus.shape != probs.shape:
        raise MesdError("MESD needs at least two (window length, accuracy) points")
    if np.any(np.diff(taus) <= 0):
        raise MesdError(f"Window lengths must be strictly increasing, got {taus.tolist()}")
    if np.any(np.isnan(probs)):
        raise MesdError("Accuracies contain missing values")
    grid = np.linspace(taus[0], taus[-1], config.grid_points)
    grid_p = np.interp(grid, taus, probs)
    best = MesdResult(float("nan"), float("nan"), True)
    for tau, p in zip(grid, grid_p):
        if p <= 0.5:
            continue
        n_states = minimal_states(float(p), config)
        if n_states is None:
            continue
        # steps run up to the comfort state k_c, so p = 1 takes k_c - 1 steps rather than K - 1
        target = int(comfort_state(n_states, config.comfort))
        duration = tau * expected_hitting_time(float(p), target)
        if math.isnan(best.mesd) or duration < best.mesd:
            best = MesdResult(float(duration), float(tau), False, n_states)
    if math.isnan(best.mesd):
        _LOGGER.warning("No decision length reaches the comfort constraint; MESD undefined")
        return best
    if best.mesd > config.censor_s:
        _LOGGER.warning("MESD %.1f s exceeds %.0f s", best.mesd, config.censor_s)
        return MesdResult(best.mesd, best.tau_opt, True, best.n_states)
    return best


def mesd_from_report(report: pd.DataFrame, config: MesdConfig | None = None) -> pd.DataFrame:
    """MESD per (method, subject) from fold-averaged accuracies of an eval report."""
    averaged = (
        report.dropna(subset=["accuracy"])
        .groupby(["method", "subject", "window_s"], sort=True)["accuracy"]
        .mean()
        .reset_index()
    )
    rows = []
    for (method, subject), group in averaged.groupby(["method", "subject"], sort=True):
        group = group.sort_values("window_s")
        try:
            result = mesd(group["window_s"].to_numpy(), group["accuracy"].to_numpy(), config)
        except MesdError as err:
            _LOGGER.warning("MESD of %s/%s: %s", method, subject, err)
            result = MesdResult(float("nan"), float("nan"), True)
        rows.append((method, subject, result.mesd, result.tau_opt, result.censored))
    return pd.DataFrame(rows, columns=list(MESD_COLUMNS))
