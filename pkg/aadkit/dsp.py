"""Deterministic EEG and audio preprocessing."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
import logging
import math

import numpy as np
from scipy import signal as sps

from .const import (
    EEG_HI_HZ,
    EEG_LO_HZ,
    EEG_RATE,
    ENVELOPE_GAMMATONE,
    ENVELOPE_HILBERT,
    ENVELOPE_LP_FRACTION,
    ENVELOPE_METHODS,
    GAMMATONE_BANDS,
    GAMMATONE_BW_SCALE,
    GAMMATONE_EXPONENT,
    GAMMATONE_FMAX,
    GAMMATONE_FMIN,
    GAMMATONE_ORDER,
    GAMMATONE_WORK_RATE,
    HILBERT_LP_HZ,
    MIN_AUDIO_RATE,
)
from .dataset import Dataset, Trial
from .exceptions import SignalError

_LOGGER = logging.getLogger(__name__)

# Hamming main-lobe width in units of rate / numtaps
HAMMING_WIDTH = 3.3
HILBERT_TRANSITION_HZ = 12.5
MAX_LENGTH_MISMATCH = 2


@dataclass(frozen=True)
class Signal:
    """Channels x samples matrix sampled at ``rate`` Hz."""

    data: np.ndarray
    rate: float
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        """Validate and normalize the layout."""
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[np.newaxis]
        if data.ndim != 2:
            raise SignalError(f"Signal data must be 2-D, got shape {data.shape}")
        if self.rate <= 0:
            raise SignalError(f"Sample rate must be positive, got {self.rate}")
        if not np.all(np.isfinite(data)):
            raise SignalError("Signal contains non-finite samples")
        labels = tuple(self.labels) or tuple(f"ch{idx}" for idx in range(data.shape[0]))
        if len(labels) != data.shape[0]:
            raise SignalError(
                f"{len(labels)} labels given for {data.shape[0]} channels"
            )
        if len(set(labels)) != len(labels):
            raise SignalError("Channel labels must be unique")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "labels", labels)

    @property
    def n_channels(self) -> int:
        """Return the channel count."""
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        """Return the sample count."""
        return self.data.shape[1]


@dataclass(frozen=True)
class GammatoneBankSpec:
    """Auditory filter bank used for subband envelopes."""

    fmin: float = GAMMATONE_FMIN
    fmax: float = GAMMATONE_FMAX
    n_bands: int = GAMMATONE_BANDS
    bandwidth_scale: float = GAMMATONE_BW_SCALE
    order: int = GAMMATONE_ORDER
    exponent: float = GAMMATONE_EXPONENT

    def __post_init__(self) -> None:
        """Validate the bank."""
        if not 0 < self.exponent <= 1:
            raise SignalError(f"Compression exponent must be in (0, 1], got {self.exponent}")
        if not 0 < self.fmin < self.fmax:
            raise SignalError("Gammatone frequency range must be increasing")

    @property
    def center_frequencies(self) -> np.ndarray:
        """Center frequencies equally spaced on the ERB-rate scale."""
        lo, hi = erb_rate(self.fmin), erb_rate(self.fmax)
        return inverse_erb_rate(np.linspace(lo, hi, self.n_bands))


def erb_rate(freq: np.ndarray | float) -> np.ndarray | float:
    """Map Hz to the ERB-rate scale."""
    return 21.4 * np.log10(1.0 + 0.00437 * np.asarray(freq))


def inverse_erb_rate(rate: np.ndarray | float) -> np.ndarray | float:
    """Map ERB-rate values back to Hz."""
    return (10.0 ** (np.asarray(rate) / 21.4) - 1.0) / 0.00437


def erb_bandwidth(freq: np.ndarray | float) -> np.ndarray | float:
    """Equivalent rectangular bandwidth in Hz."""
    return 24.7 * (4.37 * np.asarray(freq) / 1000.0 + 1.0)


def _odd(value: float) -> int:
    taps = int(math.ceil(value))
    return taps if taps % 2 else taps + 1


def _zero_phase(data: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Filter forward and time-reversed with a linear-phase FIR.

    The forward-backward pass equals one convolution with the autocorrelation of
    the taps; odd reflection at both ends keeps the edges free of steps.
    """
    pad = 3 * len(taps)
    if data.shape[-1] <= pad:
        raise SignalError(
            f"Signal of {data.shape[-1]} samples is too short for a "
            f"{len(taps)}-tap filter; needs more than {pad} samples"
        )
    kernel = np.convolve(taps, taps[::-1])
    padded = np.pad(data, ((0, 0), (pad, pad)), mode="reflect", reflect_type="odd")
    out = sps.oaconvolve(padded, kernel[np.newaxis], mode="same", axes=-1)
    return out[:, pad:-pad]


def _lowpass(data: np.ndarray, rate: float, cutoff: float, transition: float) -> np.ndarray:
    taps = sps.firwin(
        _odd(HAMMING_WIDTH * rate / transition), cutoff, window="hamming", fs=rate
    )
    return _zero_phase(data, taps)


def fir_bandpass_zero_phase(
    sig: Signal, lo: float = EEG_LO_HZ, hi: float | None = EEG_HI_HZ
) -> Signal:
    """Band-pass (or high-pass when ``hi`` is None) without phase distortion."""
    nyquist = sig.rate / 2
    if hi is not None and not 0 < lo < hi < nyquist:
        raise SignalError(f"Need 0 < lo < hi < {nyquist} Hz, got {lo} and {hi}")
    if hi is None and not 0 < lo < nyquist:
        raise SignalError(f"Need 0 < lo < {nyquist} Hz, got {lo}")
    numtaps = _odd(3 * sig.rate / lo)
    cutoff = [lo, hi] if hi is not None else lo
    taps = sps.firwin(numtaps, cutoff, pass_zero=False, window="hamming", fs=sig.rate)
    return replace(sig, data=_zero_phase(sig.data, taps))


def resample(sig: Signal, target_rate: float) -> Signal:
    """Polyphase resampling with anti-alias filtering."""
    if target_rate <= 0:
        raise SignalError(f"Target rate must be positive, got {target_rate}")
    if target_rate > sig.rate:
        raise SignalError(f"Upsampling from {sig.rate} to {target_rate} Hz is not supported")
    if target_rate == sig.rate:
        return replace(sig, data=sig.data.copy())
    ratio = Fraction(target_rate).limit_denominator(10**6) / Fraction(
        sig.rate
    ).limit_denominator(10**6)
    out = sps.resample_poly(sig.data, ratio.numerator, ratio.denominator, axis=-1)
    n_out = int(round(sig.n_samples * target_rate / sig.rate))
    return Signal(out[:, :n_out], target_rate, sig.labels)


def rereference(data: np.ndarray) -> np.ndarray:
    """Subtract the channel average at every sample, then each channel's mean."""
    if data.shape[0] < 2:
        raise SignalError("Re-referencing needs at least two channels")
    referenced = data - data.mean(axis=0, keepdims=True)
    return referenced - referenced.mean(axis=1, keepdims=True)


def rereference_and_center(eeg: Signal) -> Signal:
    """Common average reference followed by zero-centering."""
    return replace(eeg, data=rereference(eeg.data))


def _check_audio(audio: Signal) -> None:
    if audio.n_samples == 0:
        raise SignalError("Audio is empty")
    if audio.n_channels != 1:
        raise SignalError(f"Audio must be single-channel, got {audio.n_channels}")
    if audio.rate < MIN_AUDIO_RATE:
        raise SignalError(f"Audio rate must be at least {MIN_AUDIO_RATE} Hz")


def _finish_envelope(envelope: np.ndarray, rate: float, out_rate: float) -> Signal:
    """Decimate a wideband envelope to ``out_rate`` with a low-pass at 0.4 out_rate."""
    intermediate = 8 * out_rate
    sig = Signal(envelope, rate)
    if rate > intermediate:
        sig = resample(sig, intermediate)
    cutoff = ENVELOPE_LP_FRACTION * out_rate
    if sig.n_samples > 3 * _odd(HAMMING_WIDTH * sig.rate / (cutoff / 4)):
        sig = replace(sig, data=_lowpass(sig.data, sig.rate, cutoff, cutoff / 4))
    sig = resample(sig, out_rate)
    return replace(sig, data=np.maximum(sig.data, 0.0), labels=("envelope",))


def gammatone_envelope(
    audio: Signal, spec: GammatoneBankSpec | None = None, out_rate: float = EEG_RATE
) -> Signal:
    """Sum of power-law compressed gammatone subband envelopes."""
    spec = spec or GammatoneBankSpec()
    _check_audio(audio)
    if not np.any(audio.data):
        n_out = int(round(audio.n_samples * out_rate / audio.rate))
        return Signal(np.zeros((1, n_out)), out_rate, ("envelope",))
    if audio.rate > GAMMATONE_WORK_RATE:
        audio = resample(audio, GAMMATONE_WORK_RATE)
    rate = audio.rate
    samples = audio.data[0]
    times = np.arange(samples.size) / rate
    total = np.zeros(samples.size)
    for center in spec.center_frequencies:
        # complex demodulation to baseband, then a cascade of one-pole low-passes
        decay = np.exp(-2 * np.pi * 1.019 * spec.bandwidth_scale * erb_bandwidth(center) / rate)
        band = samples * np.exp(-2j * np.pi * center * times)
        for _ in range(spec.order):
            band = sps.lfilter([1.0 - decay], [1.0, -decay], band)
        total += (2.0 * np.abs(band)) ** spec.exponent
    _LOGGER.debug("Gammatone envelope from %s bands at %s Hz", spec.n_bands, rate)
    return _finish_envelope(total, rate, out_rate)


def hilbert_envelope(
    audio: Signal, lp_cut: float = HILBERT_LP_HZ, out_rate: float = EEG_RATE
) -> Signal:
    """Magnitude of the analytic signal, low-passed and resampled."""
    _check_audio(audio)
    magnitude = np.abs(sps.hilbert(audio.data[0]))[np.newaxis]
    if np.any(magnitude):
        magnitude = _lowpass(magnitude, audio.rate, lp_cut, HILBERT_TRANSITION_HZ)
    sig = resample(Signal(magnitude, audio.rate), out_rate)
    return replace(sig, data=np.maximum(sig.data, 0.0), labels=("envelope",))


def extract_envelope(
    stream: Signal, method: str = ENVELOPE_GAMMATONE, out_rate: float = EEG_RATE
) -> Signal:
    """Envelope of an audio waveform, or a resampled copy of an envelope."""
    if stream.rate < MIN_AUDIO_RATE:
        return resample(stream, out_rate)
    if method == ENVELOPE_GAMMATONE:
        return gammatone_envelope(stream, out_rate=out_rate)
    if method == ENVELOPE_HILBERT:
        return hilbert_envelope(stream, out_rate=out_rate)
    raise SignalError(f"Unknown envelope method {method}, expected {ENVELOPE_METHODS}")


def preprocess_eeg(
    raw_eeg: Signal, target_rate: float = EEG_RATE, lo: float = EEG_LO_HZ, hi: float = EEG_HI_HZ
) -> Signal:
    """Band-pass, resample, re-reference and center raw EEG."""
    # at the target rate the upper cutoff sits on Nyquist, the resampler handles it
    upper = hi if hi < raw_eeg.rate / 2 else None
    filtered = fir_bandpass_zero_phase(raw_eeg, lo, upper)
    return rereference_and_center(resample(filtered, target_rate))


def preprocess_trial(
    raw_eeg: Signal,
    raw_audio_a: Signal,
    raw_audio_b: Signal,
    envelope_method: str = ENVELOPE_GAMMATONE,
    *,
    subject_id: str = "",
    trial_id: str = "",
    attended: int = 0,
    stimulus_ids: tuple[str, str] = ("a", "b"),
    target_rate: float = EEG_RATE,
) -> Trial:
    """Turn raw EEG and the two audio streams into an aligned 64 Hz trial."""
    eeg = preprocess_eeg(raw_eeg, target_rate)
    env_a = extract_envelope(raw_audio_a, envelope_method, target_rate)
    env_b = extract_envelope(raw_audio_b, envelope_method, target_rate)
    lengths = (eeg.n_samples, env_a.n_samples, env_b.n_samples)
    if max(lengths) - min(lengths) > MAX_LENGTH_MISMATCH:
        raise SignalError(
            f"Trial {trial_id}: EEG and envelope lengths differ too much {lengths}"
        )
    n_samples = min(lengths)
    if max(lengths) != n_samples:
        _LOGGER.debug("Trial %s: truncating %s to %s samples", trial_id, lengths, n_samples)
    return Trial(
        subject_id=subject_id,
        trial_id=trial_id,
        eeg=eeg.data[:, :n_samples],
        env_a=env_a.data[0, :n_samples],
        env_b=env_b.data[0, :n_samples],
        attended=attended,
        stimulus_a=stimulus_ids[0],
        stimulus_b=stimulus_ids[1],
        rate=target_rate,
    )


def preprocess_dataset(
    dataset: Dataset, envelope_method: str = ENVELOPE_GAMMATONE, target_rate: float = EEG_RATE
) -> Dataset:
    """Preprocess every trial of a raw dataset."""
    trials = []
    for trial in dataset.trials:
        stream_rate = trial.stream_rate or trial.rate
        trials.append(
            preprocess_trial(
                Signal(trial.eeg, trial.rate, dataset.channel_labels),
                Signal(trial.env_a, stream_rate),
                Signal(trial.env_b, stream_rate),
                envelope_method,
                subject_id=trial.subject_id,
                trial_id=trial.trial_id,
                attended=trial.attended,
                stimulus_ids=(trial.stimulus_a, trial.stimulus_b),
                target_rate=target_rate,
            )
        )
        _LOGGER.debug("Preprocessed %s/%s", trial.subject_id, trial.trial_id)
    _LOGGER.info("Preprocessed %s trials with %s envelopes", len(trials), envelope_method)
    return Dataset(dataset.name, dataset.channel_labels, trials)
