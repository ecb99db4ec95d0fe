"""Shared fixtures for the aadkit tests."""
from __future__ import annotations

import numpy as np
import pytest

from aadkit.dataset import Dataset, Trial
from aadkit.network import BRANCH_FEATURE, BRANCH_POOL, BRANCH_TRANSFORM, InceptionBranch
from aadkit.synth import SynthConfig, synth_generate

# narrow inception blocks for fast gradient and training tests
MINI_EEG = (
    InceptionBranch(BRANCH_TRANSFORM, 2),
    InceptionBranch(BRANCH_FEATURE, 2, kernel=5, reduce=2),
    InceptionBranch(BRANCH_POOL, 2),
)
MINI_AUDIO = (
    InceptionBranch(BRANCH_TRANSFORM, 1),
    InceptionBranch(BRANCH_FEATURE, 2, kernel=7, reduce=1),
)


def make_trial(
    subject_id: str = "S01",
    trial_id: str = "T01",
    stimuli: tuple[str, str] = ("x", "y"),
    attended: int = 0,
    n_samples: int = 64,
    n_channels: int = 2,
    seed: int = 0,
) -> Trial:
    """Small random trial for bookkeeping tests."""
    rng = np.random.default_rng(seed)
    return Trial(
        subject_id=subject_id,
        trial_id=trial_id,
        eeg=rng.standard_normal((n_channels, n_samples)),
        env_a=np.abs(rng.standard_normal(n_samples)),
        env_b=np.abs(rng.standard_normal(n_samples)),
        attended=attended,
        stimulus_a=stimuli[0],
        stimulus_b=stimuli[1],
    )


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator."""
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_synth() -> Dataset:
    """Two subjects, eight 30 s trials each, moderate noise."""
    return synth_generate(
        SynthConfig(n_subjects=2, trials=8, trial_length=30.0, n_channels=6, noise_std=0.5, seed=3)
    )


@pytest.fixture(scope="session")
def clean_synth() -> Dataset:
    """Noise-free single-subject dataset without leakage."""
    return synth_generate(
        SynthConfig(
            n_subjects=1,
            trials=6,
            trial_length=30.0,
            n_channels=8,
            noise_std=0.0,
            leakage_gain=0.0,
            seed=5,
        )
    )
