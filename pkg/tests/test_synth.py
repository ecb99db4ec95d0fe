"""Tests for the synthetic data generator."""
from dataclasses import replace

import numpy as np
import pytest

from aadkit.synth import SynthConfig, speech_like_envelope, synth_generate

SMALL = SynthConfig(n_subjects=2, trials=6, trial_length=10.0, n_channels=4, seed=11)


def test_same_config_same_data():
    """Generation is a pure function of the configuration."""
    first, second = synth_generate(SMALL), synth_generate(SMALL)
    for a, b in zip(first.trials, second.trials):
        np.testing.assert_array_equal(a.eeg, b.eeg)
        np.testing.assert_array_equal(a.env_a, b.env_a)
        assert a.attended == b.attended


def test_other_seed_other_data():
    """A different seed changes the recordings."""
    first = synth_generate(SMALL)
    second = synth_generate(replace(SMALL, seed=12))
    assert not np.allclose(first.trials[0].eeg, second.trials[0].eeg)


def test_layout_and_balance():
    """Ids, shapes and a balanced attended side per subject."""
    data = synth_generate(SMALL)
    assert data.subjects == ["S01", "S02"]
    assert data.channel_labels == ("Ch01", "Ch02", "Ch03", "Ch04")
    for subject in data.subjects:
        trials = data.subject_trials(subject)
        assert [t.trial_id for t in trials] == [f"T{i:02d}" for i in range(1, 7)]
        assert sum(t.attended for t in trials) == 3
        assert all(t.eeg.shape == (4, 640) for t in trials)


def test_stimuli_are_shared_or_private():
    """Shared corpora reuse stimulus ids across subjects; private ones never do."""
    shared = synth_generate(SMALL)
    first, second = shared.subject_trials("S01"), shared.subject_trials("S02")
    assert first[0].stimulus_a == second[0].stimulus_a == "stim000"
    np.testing.assert_array_equal(first[0].env_a, second[0].env_a)
    private = synth_generate(replace(SMALL, share_stimuli=False))
    ids = [{t.stimulus_a, t.stimulus_b} for t in private.trials]
    assert len(set().union(*ids)) == 2 * len(private.trials)


def test_uninformative_channels_are_silent():
    """Without noise only the informative channels carry activity."""
    config = SynthConfig(
        n_subjects=1, trials=2, trial_length=10.0, n_channels=4, informative=(0, 2), noise_std=0.0, seed=4
    )
    trial = synth_generate(config).trials[0]
    assert np.any(trial.eeg[0]) and np.any(trial.eeg[2])
    assert not np.any(trial.eeg[[1, 3]])


def test_subject_gains_scale_the_response():
    """A zero gain leaves only noise for that subject."""
    config = SynthConfig(n_subjects=2, trials=2, trial_length=10.0, noise_std=0.0, subject_gains=(1.0, 0.0))
    data = synth_generate(config)
    assert np.any(data.subject_trials("S01")[0].eeg)
    assert not np.any(data.subject_trials("S02")[0].eeg)


def test_speech_like_envelope():
    """Envelopes are non-negative with unit standard deviation."""
    env = speech_like_envelope(64 * 30, 64.0, np.random.default_rng(0))
    assert env.shape == (1920,)
    assert np.all(env >= 0)
    assert env.std() == pytest.approx(1.0)
