import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repsynth.errors import AudioIOError, DataError, NumericError
from repsynth.signal import (
    BASELINE,
    REP_ALIGNED,
    MelSpectrogram,
    SpectralConfig,
    Waveform,
    estimate_snr,
    frame_count,
    load_audio,
    load_mel,
    mel_band_centers,
    mel_spectrogram,
    mix_at_snr,
    residual_snr,
    resample,
    save_audio,
    save_mel,
)

SR = 24000


def sine(freq, duration, rate, amp=0.5):
    t = np.arange(round(duration * rate)) / rate
    return Waveform(amp * np.sin(2 * np.pi * freq * t), rate)


# ---------------------------------------------------------------------------
# audio I/O and resampling


class TestLoadAudio:
    def test_halves_sample_count_from_48k(self, tmp_path):
        rng = np.random.default_rng(0)
        save_audio(Waveform(0.1 * rng.standard_normal(48001), 48000), tmp_path / "a.wav")
        wav = load_audio(tmp_path / "a.wav", target_rate=24000)
        assert wav.sample_rate == 24000
        assert abs(len(wav) - 48001 // 2) <= 1

    def test_identity_when_rates_match(self, tmp_path):
        rng = np.random.default_rng(1)
        original = Waveform(np.clip(0.2 * rng.standard_normal(5000), -1, 1), SR)
        save_audio(original, tmp_path / "b.wav", encoding="float32")
        wav = load_audio(tmp_path / "b.wav", target_rate=SR)
        assert np.array_equal(wav.samples, original.samples.astype(np.float32).astype(np.float64))

    def test_resampled_sine_keeps_dominant_frequency(self, tmp_path):
        save_audio(sine(440.0, 1.0, 16000), tmp_path / "c.wav")
        wav = load_audio(tmp_path / "c.wav", target_rate=24000)
        assert len(wav) == 24000
        # FFT-peak oracle: 1 s at 24 kHz puts bin k at k Hz
        peak = int(np.argmax(np.abs(np.fft.rfft(wav.samples))))
        assert abs(peak - 440) <= 1

    def test_int16_roundtrip_and_downmix(self, tmp_path):
        from scipy.io import wavfile

        stereo = np.stack([np.full(1000, 8192, np.int16), np.zeros(1000, np.int16)], axis=1)
        wavfile.write(tmp_path / "d.wav", SR, stereo)
        wav = load_audio(tmp_path / "d.wav", target_rate=SR)
        assert wav.samples == pytest.approx(np.full(1000, 4096 / 32768.0))

    def test_missing_and_empty_files(self, tmp_path):
        with pytest.raises(AudioIOError):
            load_audio(tmp_path / "nope.wav", SR)
        (tmp_path / "junk.wav").write_bytes(b"not a wav")
        with pytest.raises(AudioIOError):
            load_audio(tmp_path / "junk.wav", SR)


def test_waveform_rejects_nonfinite():
    with pytest.raises(DataError):
        Waveform(np.array([0.0, np.nan]), SR)


# ---------------------------------------------------------------------------
# mix_at_snr


class TestMixAtSnr:
    def test_equal_power_at_zero_db_has_unit_scale(self):
        rng = np.random.default_rng(2)
        clean = Waveform(rng.standard_normal(4096), SR)
        noise = Waveform(clean.samples[::-1].copy(), SR)  # identical power
        out = mix_at_snr(clean, noise, 0.0)
        assert np.array_equal(out.samples, clean.samples + noise.samples)

    def test_zero_power_noise_rejected(self):
        clean = sine(200.0, 0.5, SR)
        with pytest.raises(NumericError):
            mix_at_snr(clean, Waveform(np.zeros(1000), SR), 5.0)
        with pytest.raises(NumericError):
            mix_at_snr(Waveform(np.zeros(1000), SR), clean, 5.0)

    def test_rate_mismatch_rejected(self):
        with pytest.raises(DataError):
            mix_at_snr(sine(100, 0.1, 24000), sine(100, 0.1, 16000), 0.0)

    def test_five_db_remeasured_from_output(self):
        rng = np.random.default_rng(3)
        clean = Waveform(0.3 * rng.standard_normal(24000), SR)
        noise = Waveform(0.2 * rng.standard_normal(9000), SR)  # exercises tiling
        out = mix_at_snr(clean, noise, 5.0, seed=5)
        resid = out.samples - clean.samples
        measured = 10 * math.log10(np.mean(clean.samples**2) / np.mean(resid**2))
        assert measured == pytest.approx(5.0, abs=1e-6)

    def test_additivity_with_truncated_noise(self):
        # noise longer than clean takes the RNG-free truncation path, so the
        # documented formula reproduces the output bit for bit
        rng = np.random.default_rng(4)
        clean = Waveform(rng.standard_normal(5000), SR)
        noise = Waveform(rng.standard_normal(8000), SR)
        out = mix_at_snr(clean, noise, 7.0)
        fitted = noise.samples[:5000]
        p_clean = float(np.mean(clean.samples**2))
        p_noise = float(np.mean(fitted**2))
        scale = math.sqrt(p_clean / (p_noise * 10.0 ** (7.0 / 10.0)))
        assert np.array_equal(out.samples, clean.samples + scale * fitted)

    @given(
        seed=st.integers(0, 2**16),
        target=st.floats(-10.0, 20.0),
        n_clean=st.integers(500, 3000),
        n_noise=st.integers(200, 4000),
    )
    @settings(max_examples=60, deadline=None)
    def test_property_target_always_achieved(self, seed, target, n_clean, n_noise):
        rng = np.random.default_rng(seed)
        clean = Waveform(rng.standard_normal(n_clean), SR)
        noise = Waveform(rng.standard_normal(n_noise), SR)
        out = mix_at_snr(clean, noise, target, seed=seed)
        resid = out.samples - clean.samples
        measured = 10 * math.log10(np.mean(clean.samples**2) / np.mean(resid**2))
        assert measured == pytest.approx(target, abs=1e-6)


# ---------------------------------------------------------------------------
# mel analysis


class TestMelSpectrogram:
    def test_silence_hits_log_floor_with_fifty_frames(self):
        mel = mel_spectrogram(Waveform(np.zeros(24000), SR), REP_ALIGNED)
        assert mel.frames.shape == (50, 80)
        assert np.all(mel.frames == math.log(1e-5))

    def test_hop_arithmetic_across_presets(self):
        wav = sine(500.0, 1.0, SR)
        assert mel_spectrogram(wav, REP_ALIGNED).n_frames == 50
        assert mel_spectrogram(wav, BASELINE).n_frames == 100

    @pytest.mark.parametrize("freq", [250.0, 1000.0, 3000.0])
    def test_tone_peaks_in_nearest_center_band(self, freq):
        mel = mel_spectrogram(sine(freq, 1.0, SR), REP_ALIGNED)
        band = int(np.argmax(mel.frames.mean(axis=0)))
        # independent center table: Slaney scale, fmin 0, fmax 12 kHz, 80 bands
        def hz_to_mel(f):
            return f / (200.0 / 3) if f < 1000 else 15.0 + math.log(f / 1000.0) / (math.log(6.4) / 27)

        def mel_to_hz(m):
            return m * (200.0 / 3) if m < 15.0 else 1000.0 * math.exp((math.log(6.4) / 27) * (m - 15.0))

        grid = np.linspace(hz_to_mel(0.0), hz_to_mel(12000.0), 82)
        centers = np.array([mel_to_hz(m) for m in grid[1:-1]])
        assert band == int(np.argmin(np.abs(centers - freq)))
        assert centers == pytest.approx(mel_band_centers(REP_ALIGNED))

    def test_scale_covariance_in_log_domain(self, speechlike):
        base = mel_spectrogram(speechlike, REP_ALIGNED)
        scaled = mel_spectrogram(speechlike.scaled(3.0), REP_ALIGNED)
        unclamped = (base.frames > math.log(1e-5)) & (scaled.frames > math.log(1e-5))
        assert unclamped.any()
        diff = scaled.frames[unclamped] - base.frames[unclamped]
        assert diff == pytest.approx(math.log(3.0), abs=1e-6)

    def test_rate_mismatch_and_empty_rejected(self):
        with pytest.raises(DataError):
            mel_spectrogram(sine(100.0, 0.2, 16000), REP_ALIGNED)
        with pytest.raises(DataError):
            mel_spectrogram(Waveform(np.zeros(0), SR), REP_ALIGNED)

    def test_framing_rule_exhaustive_against_brute_force(self):
        def brute_force_frames(length, hop):
            n, pos = 0, 0
            while pos < length:
                n += 1
                pos += hop
            return n

        for length in range(1, 5001):
            for config in (BASELINE, REP_ALIGNED):
                assert frame_count(length, config.hop_size) == brute_force_frames(
                    length, config.hop_size
                )

    @pytest.mark.parametrize("length", [1, 479, 480, 481, 1024, 5000])
    def test_frame_count_matches_actual_output(self, length):
        rng = np.random.default_rng(length)
        wav = Waveform(0.1 * rng.standard_normal(length), SR)
        for config in (BASELINE, REP_ALIGNED):
            assert mel_spectrogram(wav, config).n_frames == frame_count(length, config.hop_size)


def test_mel_tensor_file_roundtrip(tmp_path, speechlike):
    mel = mel_spectrogram(speechlike, REP_ALIGNED)
    save_mel(mel, tmp_path / "m.bin")
    loaded = load_mel(tmp_path / "m.bin", REP_ALIGNED)
    assert np.array_equal(loaded.frames, mel.frames.astype(np.float32))
    # header is magic(8) + three u32 fields
    assert (tmp_path / "m.bin").stat().st_size == 20 + mel.frames.size * 4
    (tmp_path / "bad.bin").write_bytes(b"WRONGMAGIC" + b"\0" * 30)
    with pytest.raises(DataError):
        load_mel(tmp_path / "bad.bin", REP_ALIGNED)


def test_spectral_config_validation():
    with pytest.raises(DataError):
        SpectralConfig(hop_size=2000)  # hop > window
    with pytest.raises(DataError):
        SpectralConfig(n_mels=0)
    with pytest.raises(DataError):
        SpectralConfig(fmax=13000.0)  # above Nyquist


# ---------------------------------------------------------------------------
# estimate_snr


class TestEstimateSnr:
    def build_ten_db_signal(self):
        # noise floor everywhere; middle 45% adds a tone with power 9x the
        # noise power, so speech frames carry 10x the noise-frame power
        rng = np.random.default_rng(7)
        n = 2 * SR
        floor_rms = 0.01
        x = floor_rms * rng.standard_normal(n)
        t = np.arange(n) / SR
        mid = slice(int(0.30 * n), int(0.75 * n))
        x[mid] += math.sqrt(18.0) * floor_rms * np.sin(2 * np.pi * 300.0 * t[mid])
        return Waveform(x, SR)

    def test_known_frame_power_ratio(self):
        est = estimate_snr(self.build_ten_db_signal())
        assert est == pytest.approx(10.0, abs=1.0)

    def test_pure_silence_is_unmeasurable(self):
        assert estimate_snr(Waveform(np.zeros(SR), SR)) is None

    def test_scale_invariance(self):
        wav = self.build_ten_db_signal()
        assert estimate_snr(wav) == estimate_snr(wav.scaled(0.5))

    def test_too_short_rejected(self):
        with pytest.raises(DataError):
            estimate_snr(sine(100.0, 0.3, SR))


# ---------------------------------------------------------------------------
# residual_snr


class TestResidualSnr:
    def test_identical_is_infinite(self, speechlike):
        assert residual_snr(speechlike, speechlike) == math.inf

    def test_ten_percent_perturbation_is_twenty_db(self, speechlike):
        test = Waveform(speechlike.samples * 1.1, SR)
        assert residual_snr(test, speechlike) == pytest.approx(20.0, abs=1e-9)

    def test_known_perturbation_power(self):
        rng = np.random.default_rng(8)
        ref = rng.standard_normal(4000)
        pert = rng.standard_normal(4000)
        expected = 10 * math.log10(np.sum(ref**2) / np.sum(pert**2))
        got = residual_snr(Waveform(ref + pert, SR), Waveform(ref, SR))
        assert got == pytest.approx(expected, abs=1e-9)

    def test_zero_reference_rejected(self):
        zeros = Waveform(np.zeros(100), SR)
        with pytest.raises(NumericError):
            residual_snr(zeros, zeros)

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            residual_snr(Waveform(np.zeros(10), SR), Waveform(np.ones(11), SR))


# ---------------------------------------------------------------------------
# resample


def test_resample_identity_returns_equal_samples(speechlike):
    out = resample(speechlike, speechlike.sample_rate)
    assert np.array_equal(out.samples, speechlike.samples)
    assert out.samples is not speechlike.samples
