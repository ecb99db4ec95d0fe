"""Synthetic datasets from a linear forward model of envelope tracking."""
from __future__ import annotations

from dataclasses import dataclass
import logging

import numpy as np
from scipy import signal as sps

from .const import EEG_RATE, STREAM_A
from .dataset import Dataset, Trial

_LOGGER = logging.getLogger(__name__)

ENVELOPE_BAND_HZ = (2.0, 6.0)
ENVELOPE_SMOOTH_HZ = 8.0


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the generator; equal configs give identical datasets."""

    n_subjects: int = 4
    trials: int = 8
    trial_length: float = 30.0
    n_channels: int = 8
    informative: tuple[int, ...] | None = None
    kernel_length: float = 0.25
    attended_gain: float = 1.0
    leakage_gain: float = 0.2
    noise_std: float = 0.5
    seed: int = 0
    share_stimuli: bool = True
    subject_gains: tuple[float, ...] | None = None
    rate: float = EEG_RATE

    @property
    def informative_channels(self) -> tuple[int, ...]:
        """Channels that carry stimulus-driven activity."""
        if self.informative is None:
            return tuple(range(self.n_channels))
        return tuple(self.informative)

    @property
    def n_samples(self) -> int:
        """Samples per trial."""
        return int(round(self.trial_length * self.rate))


def speech_like_envelope(n_samples: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Rectified band-limited noise with dominant 2-6 Hz modulations, unit std."""
    margin = int(rate)
    noise = rng.standard_normal(n_samples + 2 * margin)
    band = sps.butter(4, ENVELOPE_BAND_HZ, btype="bandpass", fs=rate, output="sos")
    smooth = sps.butter(4, ENVELOPE_SMOOTH_HZ, fs=rate, output="sos")
    envelope = sps.sosfiltfilt(smooth, np.abs(sps.sosfiltfilt(band, noise)))
    envelope = np.maximum(envelope[margin:-margin], 0.0)
    return envelope / envelope.std()


def _kernels(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Random causal response kernels, one per channel, unit norm."""
    length = max(1, int(round(config.kernel_length * config.rate)))
    kernels = np.zeros((config.n_channels, length))
    window = np.hanning(length + 2)[1:-1]
    for channel in config.informative_channels:
        kernel = rng.standard_normal(length) * window
        kernels[channel] = kernel / np.linalg.norm(kernel)
    return kernels


def _respond(envelope: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    centered = envelope - envelope.mean()
    return np.stack([np.convolve(centered, kernel)[: envelope.size] for kernel in kernels])


def synth_generate(config: SynthConfig) -> Dataset:
    """Generate EEG as filtered envelopes plus noise for every subject and trial."""
    n_samples = config.n_samples
    stimuli: dict[str, np.ndarray] = {}

    def stimulus(stim_id: str, index: int) -> np.ndarray:
        if stim_id not in stimuli:
            stim_rng = np.random.default_rng([config.seed, 7, index])
            stimuli[stim_id] = speech_like_envelope(n_samples, config.rate, stim_rng)
        return stimuli[stim_id]

    labels = tuple(f"Ch{idx + 1:02d}" for idx in range(config.n_channels))
    trials: list[Trial] = []
    for subject_idx in range(config.n_subjects):
        subject_id = f"S{subject_idx + 1:02d}"
        rng = np.random.default_rng([config.seed, 1, subject_idx])
        kernels = _kernels(config, rng)
        gain = config.subject_gains[subject_idx] if config.subject_gains else 1.0
        sides = np.array([idx % 2 for idx in range(config.trials)])
        sides = rng.permutation(sides)
        for trial_idx in range(config.trials):
            if config.share_stimuli:
                index_a, index_b = 2 * trial_idx, 2 * trial_idx + 1
                id_a, id_b = f"stim{index_a:03d}", f"stim{index_b:03d}"
            else:
                offset = 2 * (subject_idx * config.trials + trial_idx)
                index_a, index_b = offset, offset + 1
                id_a, id_b = f"{subject_id}-stim{index_a:03d}", f"{subject_id}-stim{index_b:03d}"
            env_a, env_b = stimulus(id_a, index_a), stimulus(id_b, index_b)
            attended = int(sides[trial_idx])
            env_att, env_un = (env_a, env_b) if attended == STREAM_A else (env_b, env_a)
            eeg = gain * (
                config.attended_gain * _respond(env_att, kernels)
                + config.leakage_gain * _respond(env_un, kernels)
            )
            eeg += config.noise_std * rng.standard_normal(eeg.shape)
            trials.append(
                Trial(
                    subject_id=subject_id,
                    trial_id=f"T{trial_idx + 1:02d}",
                    eeg=eeg,
                    env_a=env_a.copy(),
                    env_b=env_b.copy(),
                    attended=attended,
                    stimulus_a=id_a,
                    stimulus_b=id_b,
                    rate=config.rate,
                )
            )
    _LOGGER.info(
        "Generated %s subjects x %s trials of %s s (seed %s)",
        config.n_subjects,
        config.trials,
        config.trial_length,
        config.seed,
    )
    return Dataset("synthetic", labels, trials)
