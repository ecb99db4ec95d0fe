"""Tests for EEG filtering, resampling and envelope extraction."""
import numpy as np
import pytest

from aadkit.dsp import (
    GammatoneBankSpec,
    Signal,
    extract_envelope,
    fir_bandpass_zero_phase,
    gammatone_envelope,
    hilbert_envelope,
    preprocess_dataset,
    preprocess_trial,
    rereference,
    resample,
)
from aadkit.exceptions import SignalError
from aadkit.linear import pearson


def _tone(freq, seconds, rate, phase=0.0):
    return np.sin(2 * np.pi * freq * np.arange(int(seconds * rate)) / rate + phase)


def _am_tone(seconds=4.0, rate=16000.0, carrier=1000.0, modulation=4.0):
    t = np.arange(int(seconds * rate)) / rate
    modulator = 1.0 + 0.8 * np.sin(2 * np.pi * modulation * t)
    return modulator * np.sin(2 * np.pi * carrier * t), modulation


class TestSignal:
    """Validation of the signal container."""

    def test_vector_becomes_one_channel(self):
        sig = Signal(np.zeros(10), 64.0)
        assert sig.data.shape == (1, 10)
        assert sig.labels == ("ch0",)

    def test_rejects_non_finite(self):
        with pytest.raises(SignalError):
            Signal(np.array([[0.0, np.nan]]), 64.0)

    def test_rejects_bad_rate(self):
        with pytest.raises(SignalError):
            Signal(np.zeros((2, 5)), 0.0)

    def test_rejects_duplicate_labels(self):
        with pytest.raises(SignalError):
            Signal(np.zeros((2, 5)), 64.0, ("Cz", "Cz"))


def test_bandpass_keeps_passband_without_phase_shift():
    """An 8 Hz component survives in place; drift and 60 Hz are removed."""
    rate = 256.0
    passband = _tone(8.0, 60, rate, phase=0.3)
    data = passband + 2.0 * _tone(0.1, 60, rate) + _tone(60.0, 60, rate)
    out = fir_bandpass_zero_phase(Signal(data, rate), 0.5, 32.0).data[0]
    middle = slice(int(5 * rate), int(55 * rate))
    np.testing.assert_allclose(out[middle], passband[middle], atol=0.05)


def test_bandpass_attenuates_mains_and_rejects_dc():
    """A 50 Hz tone loses at least 20 dB and a constant offset is removed."""
    rate = 256.0
    middle = slice(int(10 * rate), int(50 * rate))
    mains = fir_bandpass_zero_phase(Signal(_tone(50.0, 60, rate), rate)).data[0]
    assert 20 * np.log10(np.std(mains[middle]) / np.std(_tone(50.0, 60, rate)[middle])) <= -20.0
    offset = fir_bandpass_zero_phase(Signal(np.full(int(60 * rate), 5.0), rate)).data[0]
    np.testing.assert_allclose(offset[middle], 0.0, atol=1e-3)


def test_highpass_variant():
    """Without an upper edge only the low cutoff applies."""
    rate = 64.0
    data = _tone(0.05, 60, rate) + _tone(20.0, 60, rate)
    out = fir_bandpass_zero_phase(Signal(data, rate), 0.5, None).data[0]
    middle = slice(int(10 * rate), int(50 * rate))
    np.testing.assert_allclose(out[middle], _tone(20.0, 60, rate)[middle], atol=0.05)


def test_bandpass_rejects_bad_edges():
    """Edges must be ordered and below Nyquist."""
    sig = Signal(np.zeros((1, 4096)), 64.0)
    with pytest.raises(SignalError):
        fir_bandpass_zero_phase(sig, 8.0, 4.0)
    with pytest.raises(SignalError):
        fir_bandpass_zero_phase(sig, 0.5, 40.0)


def test_bandpass_rejects_short_signal():
    """Signals shorter than the filter padding are refused."""
    with pytest.raises(SignalError, match="too short"):
        fir_bandpass_zero_phase(Signal(np.zeros((1, 100)), 64.0), 0.5, 20.0)


def test_resample_lengths(rng):
    """Decimation gives the proportional length; equal rates copy."""
    sig = Signal(rng.standard_normal((3, 128 * 20)), 128.0)
    assert resample(sig, 64.0).n_samples == 64 * 20
    same = resample(sig, 128.0)
    np.testing.assert_array_equal(same.data, sig.data)
    assert same.data is not sig.data


def test_resample_keeps_slow_content():
    """A 2 Hz tone is unchanged by decimation."""
    sig = Signal(_tone(2.0, 20, 512.0), 512.0)
    out = resample(sig, 64.0).data[0]
    np.testing.assert_allclose(out[64:-64], _tone(2.0, 20, 64.0)[64:-64], atol=0.01)


@pytest.mark.parametrize(("freq", "low", "high"), [(4.0, 0.95, 1.05), (100.0, 0.0, 0.05)])
def test_resample_from_1000_hz(freq, low, high):
    """Decimating 1000 Hz to 64 Hz keeps a 4 Hz tone and suppresses a 100 Hz tone."""
    out = resample(Signal(_tone(freq, 20, 1000.0), 1000.0), 64.0).data[0]
    amplitude = np.sqrt(2) * np.std(out[128:-128])
    assert low <= amplitude <= high


def test_resample_rejects_upsampling():
    """Only downsampling is supported."""
    with pytest.raises(SignalError):
        resample(Signal(np.zeros((1, 64)), 64.0), 128.0)


def test_rereference(rng):
    """Every sample has zero channel mean and every channel zero time mean."""
    data = rng.standard_normal((5, 200)) + rng.standard_normal((5, 1)) * 10
    out = rereference(data)
    np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-12)


def test_rereference_is_idempotent(rng):
    """Re-referencing an already referenced matrix changes nothing."""
    once = rereference(rng.standard_normal((6, 300)) + 3.0)
    np.testing.assert_allclose(rereference(once), once, atol=1e-10)


def test_rereference_needs_two_channels():
    """A single channel cannot be average-referenced."""
    with pytest.raises(SignalError):
        rereference(np.zeros((1, 10)))


def test_gammatone_bank_spacing():
    """Center frequencies span the range and increase."""
    centers = GammatoneBankSpec().center_frequencies
    assert centers.size == 28
    np.testing.assert_allclose([centers[0], centers[-1]], [150.0, 4000.0])
    assert np.all(np.diff(centers) > 0)


def test_gammatone_bank_rejects_bad_exponent():
    """The compression exponent must lie in (0, 1]."""
    with pytest.raises(SignalError):
        GammatoneBankSpec(exponent=1.5)


@pytest.mark.parametrize("method", [gammatone_envelope, hilbert_envelope])
def test_envelope_follows_modulation(method):
    """The envelope of an AM tone tracks its 4 Hz modulator."""
    audio, modulation = _am_tone()
    env = method(Signal(audio, 16000.0), out_rate=64.0)
    assert env.rate == 64.0
    assert env.n_samples == 256
    assert np.all(env.data >= 0)
    t = np.arange(256) / 64.0
    modulator = 1.0 + 0.8 * np.sin(2 * np.pi * modulation * t)
    assert pearson(env.data[0, 32:-32], modulator[32:-32]) > 0.9


@pytest.mark.parametrize("method", [gammatone_envelope, hilbert_envelope])
def test_pure_tone_gives_steady_envelope(method):
    """A 1 kHz tone has a flat envelope once the filters settle."""
    env = method(Signal(_tone(1000.0, 4, 16000.0), 16000.0), out_rate=64.0).data[0, 32:-32]
    assert np.std(env) / np.mean(env) < 0.05


def test_hilbert_envelope_of_tone_equals_amplitude():
    """The analytic-signal magnitude of a steady tone is its amplitude."""
    env = hilbert_envelope(Signal(0.7 * _tone(1000.0, 4, 16000.0), 16000.0)).data[0, 32:-32]
    np.testing.assert_allclose(env, 0.7, rtol=0.05)


def test_envelope_methods_agree_on_modulated_noise(rng):
    """Gammatone and Hilbert envelopes of AM noise correlate above 0.8."""
    rate = 16000.0
    t = np.arange(int(8 * rate)) / rate
    modulator = 1.0 + 0.5 * np.sin(2 * np.pi * 3.0 * t) + 0.3 * np.sin(2 * np.pi * 5.3 * t + 1.0)
    audio = Signal(modulator * rng.standard_normal(t.size), rate)
    gamma = gammatone_envelope(audio).data[0, 64:-64]
    hilbert = hilbert_envelope(audio).data[0, 64:-64]
    assert pearson(gamma, hilbert) > 0.8


def test_silence_gives_zero_envelope():
    """All-zero audio gives an all-zero envelope."""
    env = gammatone_envelope(Signal(np.zeros(16000), 16000.0))
    assert env.n_samples == 64
    assert not np.any(env.data)


def test_envelope_rejects_low_rate_audio():
    """Waveforms below 8 kHz are not audio."""
    with pytest.raises(SignalError):
        hilbert_envelope(Signal(np.ones(1000), 1000.0))


def test_extract_envelope_resamples_precomputed(rng):
    """Streams already at envelope rates are only resampled."""
    env = np.abs(rng.standard_normal(128 * 10))
    out = extract_envelope(Signal(env, 128.0), out_rate=64.0)
    assert out.n_samples == 640


def test_extract_envelope_unknown_method():
    """Only gammatone and hilbert envelopes exist."""
    audio, _ = _am_tone(seconds=1.0)
    with pytest.raises(SignalError):
        extract_envelope(Signal(audio, 16000.0), method="rms")


def _raw_trial(rng, eeg_seconds=30, audio_seconds=30):
    eeg = Signal(rng.standard_normal((4, int(eeg_seconds * 256))), 256.0, ("Fz", "Cz", "Pz", "Oz"))
    audio_a = Signal(rng.standard_normal(int(audio_seconds * 8000)), 8000.0)
    audio_b = Signal(rng.standard_normal(int(audio_seconds * 8000)), 8000.0)
    return eeg, audio_a, audio_b


def test_preprocess_trial_aligns_streams(rng):
    """EEG and both envelopes end up at 64 Hz with equal lengths."""
    eeg, audio_a, audio_b = _raw_trial(rng)
    trial = preprocess_trial(
        eeg,
        audio_a,
        audio_b,
        "hilbert",
        subject_id="S01",
        trial_id="T01",
        attended=1,
        stimulus_ids=("s1", "s2"),
    )
    assert trial.eeg.shape == (4, 1920)
    assert trial.env_a.shape == trial.env_b.shape == (1920,)
    assert trial.rate == 64.0
    assert trial.attended_stimulus == "s2"
    np.testing.assert_allclose(trial.eeg.mean(axis=0), 0.0, atol=1e-10)


def test_preprocess_trial_rejects_misaligned_audio(rng):
    """A second of extra audio is more than the tolerated mismatch."""
    eeg, audio_a, audio_b = _raw_trial(rng, audio_seconds=31)
    with pytest.raises(SignalError, match="lengths differ"):
        preprocess_trial(eeg, audio_a, audio_b, "hilbert")


def test_preprocess_dataset_keeps_metadata(small_synth):
    """Preprocessing a 64 Hz dataset keeps ids, labels and lengths."""
    processed = preprocess_dataset(small_synth, "hilbert")
    assert [t.key for t in processed.trials] == [t.key for t in small_synth.trials]
    for before, after in zip(small_synth.trials, processed.trials):
        assert after.attended == before.attended
        assert after.n_samples == before.n_samples
        np.testing.assert_allclose(after.env_a, before.env_a, atol=1e-9)
