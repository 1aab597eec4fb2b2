"""Frame-level prosody features and duration utilities on the 20 ms grid.

Pitch comes from a per-frame autocorrelation peak, energy from frame RMS;
both are averaged to phoneme level and normalized to [0, 1] so they can be
quantized into embedding bins. The toy aligner splits an utterance's
frames evenly across its phonemes for corpora without forced alignments.
"""

import numpy as np

from ..errors import DataError
from ..signal import Waveform

FRAME_SAMPLES = 480
PITCH_FMIN = 60.0
PITCH_FMAX = 400.0
PITCH_NORM_HZ = 600.0
VOICING_THRESHOLD = 0.3


def _frame_view(wav: Waveform) -> np.ndarray:
    n_frames = -(-len(wav) // FRAME_SAMPLES)
    padded = np.zeros(n_frames * FRAME_SAMPLES)
    padded[: len(wav)] = wav.samples
    return padded.reshape(n_frames, FRAME_SAMPLES)


def frame_energy(wav: Waveform) -> np.ndarray:
    """Per-frame RMS amplitude, one value per 20 ms representation frame."""
    if wav.sample_rate != 24000:
        raise DataError(f"expected 24 kHz audio, got {wav.sample_rate}")
    frames = _frame_view(wav)
    return np.sqrt(np.mean(frames**2, axis=1))


def frame_pitch(wav: Waveform) -> np.ndarray:
    """Per-frame fundamental frequency in Hz, 0 where unvoiced.

    Autocorrelation peak over lags covering 60..400 Hz; a frame counts as
    voiced when the peak exceeds 0.3 of the zero-lag energy.
    """
    if wav.sample_rate != 24000:
        raise DataError(f"expected 24 kHz audio, got {wav.sample_rate}")
    frames = _frame_view(wav)
    frames = frames - frames.mean(axis=1, keepdims=True)
    lag_min = int(wav.sample_rate / PITCH_FMAX)
    lag_max = int(wav.sample_rate / PITCH_FMIN)
    size = FRAME_SAMPLES + lag_max
    spectra = np.fft.rfft(frames, n=2 * size, axis=1)
    autocorr = np.fft.irfft(spectra * np.conj(spectra), axis=1)[:, : lag_max + 1]
    r0 = autocorr[:, 0]
    window = autocorr[:, lag_min : lag_max + 1]
    best = np.argmax(window, axis=1)
    peak = window[np.arange(len(frames)), best]
    voiced = (r0 > 0) & (peak > VOICING_THRESHOLD * np.maximum(r0, 1e-12))
    f0 = wav.sample_rate / (best + lag_min).astype(np.float64)
    return np.where(voiced, f0, 0.0)


def normalized_pitch(wav: Waveform) -> np.ndarray:
    """frame_pitch scaled into [0, 1] by a 600 Hz ceiling."""
    return np.clip(frame_pitch(wav) / PITCH_NORM_HZ, 0.0, 1.0)


def phoneme_level_average(frame_values: np.ndarray, durations: list[int]) -> np.ndarray:
    """Mean of frame values over each phoneme's span; 0 for empty spans."""
    durations = np.asarray(durations, dtype=np.int64)
    if np.any(durations < 0):
        raise DataError("negative duration")
    if int(durations.sum()) != len(frame_values):
        raise DataError(
            f"durations cover {int(durations.sum())} frames "
            f"but {len(frame_values)} frame values were given"
        )
    out = np.zeros(len(durations))
    start = 0
    for i, d in enumerate(durations):
        if d > 0:
            out[i] = float(np.mean(frame_values[start : start + d]))
        start += d
    return out


def uniform_durations(n_phonemes: int, total_frames: int) -> list[int]:
    """Even split of frames over phonemes, remainder on the last one."""
    if n_phonemes < 1:
        raise DataError("need at least one phoneme")
    if total_frames < 0:
        raise DataError("total_frames must be >= 0")
    base = total_frames // n_phonemes
    durations = [base] * n_phonemes
    durations[-1] += total_frames - base * n_phonemes
    return durations


def reconcile_durations(durations: list[int], target_frames: int) -> list[int]:
    """Absorb a <= 2 frame grid mismatch into the last phoneme.

    Raises if the gap exceeds 2 frames or the adjustment would need a
    negative duration.
    """
    total = sum(durations)
    gap = target_frames - total
    if abs(gap) > 2:
        raise DataError(
            f"durations cover {total} frames but audio has {target_frames}: "
            f"gap {gap} exceeds the 2-frame reconciliation limit"
        )
    if gap == 0:
        return list(durations)
    adjusted = list(durations)
    adjusted[-1] += gap
    if adjusted[-1] < 0:
        raise DataError(
            f"cannot absorb a {gap}-frame gap into a {durations[-1]}-frame last phoneme"
        )
    return adjusted
