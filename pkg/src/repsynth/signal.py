"""Waveform-level primitives: audio I/O, resampling, mel analysis, SNR tools.

Everything here is a pure function of its inputs; RNG-dependent paths
(noise tiling) take an explicit seed. Waveform samples are kept as float64
so that power ratios survive round-trips at far better than 1e-6 dB.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import AudioIOError, DataError, NumericError

DEFAULT_SAMPLE_RATE = 24000


@dataclass
class Waveform:
    """Mono audio: a 1-D float64 sample array plus its rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise DataError(f"waveform must be 1-D, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(self.samples * factor, self.sample_rate)


@dataclass(frozen=True)
class SpectralConfig:
    """STFT + mel filterbank settings.

    Framing follows the center-padded rule: the signal is reflection-padded
    by ``fft_size // 2`` on each side and split into frames of ``fft_size``
    samples starting every ``hop_size``, giving ``ceil(len / hop_size)``
    frames. The Hann window of ``window_size`` samples is zero-padded to
    ``fft_size``. Mel energies are magnitudes (not powers) filtered by
    peak-1 triangular filters on the Slaney mel scale, floored at
    ``log_floor`` before the natural log.
    """

    fft_size: int = 1024
    hop_size: int = 480
    window_size: int = 960
    n_mels: int = 80
    sample_rate: int = DEFAULT_SAMPLE_RATE
    fmin: float = 0.0
    fmax: float = 12000.0
    log_floor: float = 1e-5

    def __post_init__(self):
        if not (self.hop_size <= self.window_size <= self.fft_size):
            raise DataError(
                f"need hop <= window <= fft, got {self.hop_size}/{self.window_size}/{self.fft_size}"
            )
        if self.n_mels <= 0:
            raise DataError("n_mels must be positive")
        if not (0 <= self.fmin < self.fmax <= self.sample_rate / 2):
            raise DataError(f"bad mel band edges [{self.fmin}, {self.fmax}]")


#: 10 ms hop, the conventional mel-vocoder analysis at 24 kHz.
BASELINE = SpectralConfig(fft_size=1024, hop_size=240, window_size=960, n_mels=80)
#: 20 ms hop, aligned with the representation frame grid.
REP_ALIGNED = SpectralConfig(fft_size=1024, hop_size=480, window_size=960, n_mels=80)


@dataclass
class MelSpectrogram:
    """Log-mel frame matrix (n_frames, n_mels) with its analysis config."""

    frames: np.ndarray
    config: SpectralConfig

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.config.n_mels:
            raise DataError(f"mel matrix shape {self.frames.shape} inconsistent with config")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


# ---------------------------------------------------------------------------
# audio I/O


def load_audio(path: Path, target_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Read a WAV file, down-mix to mono, and resample to ``target_rate``.

    Accepts 16-bit and 32-bit integer PCM plus 32/64-bit float WAV.
    Resampling is band-limited (polyphase).
    """
    path = Path(path)
    if not path.exists():
        raise AudioIOError(f"audio file not found: {path}")
    try:
        rate, data = wavfile.read(path)
    except Exception as exc:
        raise AudioIOError(f"cannot read {path}: {exc}") from exc
    if data.size == 0:
        raise AudioIOError(f"empty audio in {path}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise AudioIOError(f"unsupported WAV encoding {data.dtype} in {path}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return resample(Waveform(samples, int(rate)), target_rate)


def save_audio(wav: Waveform, path: Path, encoding: str = "float32") -> None:
    """Write a mono WAV file, ``encoding`` one of 'float32' or 'int16'."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if encoding == "float32":
        wavfile.write(path, wav.sample_rate, wav.samples.astype(np.float32))
    elif encoding == "int16":
        clipped = np.clip(wav.samples, -1.0, 1.0)
        wavfile.write(path, wav.sample_rate, np.round(clipped * 32767.0).astype(np.int16))
    else:
        raise AudioIOError(f"unsupported encoding {encoding!r}")


def resample(wav: Waveform, target_rate: int) -> Waveform:
    """Band-limited polyphase resampling; identity when rates match."""
    if target_rate <= 0:
        raise DataError(f"target_rate must be positive, got {target_rate}")
    if target_rate == wav.sample_rate:
        return Waveform(wav.samples.copy(), wav.sample_rate)
    ratio = Fraction(target_rate, wav.sample_rate)
    out = resample_poly(wav.samples, ratio.numerator, ratio.denominator)
    return Waveform(out, target_rate)


# ---------------------------------------------------------------------------
# framing + mel analysis


def frame_count(n_samples: int, hop_size: int) -> int:
    """Frames produced by center-padded analysis: ceil(n_samples / hop)."""
    return -(-n_samples // hop_size)


def _frame_signal(samples: np.ndarray, fft_size: int, hop_size: int) -> np.ndarray:
    """(n_frames, fft_size) frame matrix under the center-padded rule."""
    n_frames = frame_count(len(samples), hop_size)
    padded = np.pad(samples, fft_size // 2, mode="reflect")
    idx = np.arange(fft_size)[None, :] + hop_size * np.arange(n_frames)[:, None]
    return padded[idx]


def _hz_to_mel(freq):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    freq = np.asarray(freq, dtype=np.float64)
    f_sp = 200.0 / 3
    mel = freq / f_sp
    min_log_hz = 1000.0
    logstep = np.log(6.4) / 27.0
    log_region = freq >= min_log_hz
    mel = np.where(log_region, min_log_hz / f_sp + np.log(np.maximum(freq, min_log_hz) / min_log_hz) / logstep, mel)
    return mel


def _mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    f_sp = 200.0 / 3
    freq = mel * f_sp
    min_log_mel = 1000.0 / f_sp
    logstep = np.log(6.4) / 27.0
    log_region = mel >= min_log_mel
    return np.where(log_region, 1000.0 * np.exp(logstep * (mel - min_log_mel)), freq)


@lru_cache(maxsize=8)
def mel_filterbank(config: SpectralConfig) -> np.ndarray:
    """(n_mels, fft_size // 2 + 1) triangular filter matrix, peak 1."""
    centers = mel_band_centers(config)
    edges = np.concatenate([[_edge_below(config)], centers, [_edge_above(config)]])
    fft_freqs = np.fft.rfftfreq(config.fft_size, d=1.0 / config.sample_rate)
    weights = np.zeros((config.n_mels, len(fft_freqs)))
    for m in range(config.n_mels):
        lo, center, hi = edges[m], edges[m + 1], edges[m + 2]
        up = (fft_freqs - lo) / (center - lo)
        down = (hi - fft_freqs) / (hi - center)
        weights[m] = np.maximum(0.0, np.minimum(up, down))
    return weights


def mel_band_centers(config: SpectralConfig) -> np.ndarray:
    """Center frequency (Hz) of each mel band."""
    mels = np.linspace(_hz_to_mel(config.fmin), _hz_to_mel(config.fmax), config.n_mels + 2)
    return _mel_to_hz(mels)[1:-1]


def _edge_below(config: SpectralConfig) -> float:
    return float(config.fmin)


def _edge_above(config: SpectralConfig) -> float:
    return float(config.fmax)


def mel_spectrogram(wav: Waveform, config: SpectralConfig) -> MelSpectrogram:
    """Log-mel analysis of ``wav`` under ``config``.

    Returns ``ceil(len / hop)`` frames of floor-clamped natural-log mel
    magnitudes.
    """
    if wav.sample_rate != config.sample_rate:
        raise DataError(
            f"waveform rate {wav.sample_rate} != analysis rate {config.sample_rate}"
        )
    if len(wav) == 0:
        raise DataError("cannot analyze an empty waveform")
    frames = _frame_signal(wav.samples, config.fft_size, config.hop_size)
    window = _padded_hann(config.window_size, config.fft_size)
    spectra = np.abs(np.fft.rfft(frames * window, axis=1))
    energies = spectra @ mel_filterbank(config).T
    return MelSpectrogram(np.log(np.maximum(energies, config.log_floor)), config)


@lru_cache(maxsize=8)
def _padded_hann(window_size: int, fft_size: int) -> np.ndarray:
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window_size) / window_size)
    left = (fft_size - window_size) // 2
    return np.pad(window, (left, fft_size - window_size - left))


# ---------------------------------------------------------------------------
# SNR tools


def mix_at_snr(clean: Waveform, noise: Waveform, target_snr_db: float, seed: int = 0) -> Waveform:
    """Add ``noise`` to ``clean`` scaled so the mixture hits ``target_snr_db``.

    The noise is tiled with a seeded random circular offset when shorter than
    the clean signal, or truncated when longer; the scale is then chosen so
    that 10*log10(P_clean / P_noise) equals the target over the full length.
    """
    if clean.sample_rate != noise.sample_rate:
        raise DataError(
            f"sample-rate mismatch: clean {clean.sample_rate} vs noise {noise.sample_rate}"
        )
    if len(clean) == 0 or len(noise) == 0:
        raise DataError("clean and noise must be nonempty")
    fitted = _fit_noise_length(noise.samples, len(clean), seed)
    p_clean = float(np.mean(clean.samples**2))
    p_noise = float(np.mean(fitted**2))
    if p_clean == 0.0:
        raise NumericError("clean signal has zero power; SNR scaling undefined")
    if p_noise == 0.0:
        raise NumericError("noise signal has zero power; SNR scaling undefined")
    scale = math.sqrt(p_clean / (p_noise * 10.0 ** (target_snr_db / 10.0)))
    return Waveform(clean.samples + scale * fitted, clean.sample_rate)


def _fit_noise_length(noise: np.ndarray, n: int, seed: int) -> np.ndarray:
    if len(noise) >= n:
        return noise[:n]
    offset = int(np.random.default_rng(seed).integers(len(noise)))
    rolled = np.roll(noise, -offset)
    reps = -(-n // len(rolled))
    return np.tile(rolled, reps)[:n]


def estimate_snr(wav: Waveform) -> float | None:
    """Reference-free SNR from an energy-based speech/noise frame split.

    Frames of 25 ms every 10 ms are ranked by mean power; frames below the
    20th percentile count as noise and frames above the 60th as speech. The
    result is 10*log10(mean speech power / mean noise power). Returns None
    when the split leaves either class empty (e.g. pure silence), and +inf
    when the noise class has exactly zero power.
    """
    if len(wav) == 0:
        raise DataError("cannot estimate SNR of an empty waveform")
    if wav.duration < 0.5:
        raise DataError(f"waveform too short for SNR estimation ({wav.duration:.3f} s < 0.5 s)")
    flen = round(0.025 * wav.sample_rate)
    hop = round(0.010 * wav.sample_rate)
    n = 1 + (len(wav) - flen) // hop
    idx = np.arange(flen)[None, :] + hop * np.arange(n)[:, None]
    energies = np.mean(wav.samples[idx] ** 2, axis=1)
    lo, hi = np.percentile(energies, [20.0, 60.0])
    noise = energies[energies < lo]
    speech = energies[energies > hi]
    if len(noise) == 0 or len(speech) == 0:
        return None
    p_noise = float(np.mean(noise))
    p_speech = float(np.mean(speech))
    if p_noise == 0.0:
        return math.inf
    return 10.0 * math.log10(p_speech / p_noise)


def residual_snr(test: Waveform, reference: Waveform) -> float:
    """10*log10(||reference||^2 / ||test - reference||^2), +inf when equal."""
    if test.sample_rate != reference.sample_rate:
        raise DataError("sample-rate mismatch in residual_snr")
    if len(test) != len(reference):
        raise DataError(f"length mismatch: {len(test)} vs {len(reference)}")
    p_ref = float(np.sum(reference.samples**2))
    if p_ref == 0.0:
        raise NumericError("reference has zero power; residual SNR undefined")
    p_res = float(np.sum((test.samples - reference.samples) ** 2))
    if p_res == 0.0:
        return math.inf
    return 10.0 * math.log10(p_ref / p_res)


def save_mel(mel: MelSpectrogram, path: Path) -> None:
    """Persist the frame matrix in the binary mel tensor format."""
    from . import tensorfile

    tensorfile.save_mel_matrix(path, mel.frames)


def load_mel(path: Path, config: SpectralConfig) -> MelSpectrogram:
    """Load a mel tensor file back under its analysis config."""
    from . import tensorfile

    return MelSpectrogram(tensorfile.load_mel_matrix(path), config)
