"""Speech enhancement front ends behind one frozen interface.

An enhancer maps a waveform to a same-rate, same-length waveform and is
never trained here. Three implementations: a pass-through, a classical
spectral-subtraction baseline so the pipeline runs without any external
model, and a file-based subprocess adapter for pretrained enhancement
tools.
"""

import subprocess
import tempfile
import threading
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
import scipy.signal

from .errors import ConfigError, DataError
from .signal import Waveform, load_audio, resample, save_audio


@runtime_checkable
class Enhancer(Protocol):
    """Waveform -> Waveform at the same sample rate and length, deterministic."""

    name: str

    def __call__(self, wav: Waveform) -> Waveform: ...


class IdentityEnhancer:
    name = "identity"

    def __call__(self, wav: Waveform) -> Waveform:
        return Waveform(wav.samples.copy(), wav.sample_rate)


def identity_enhancer() -> IdentityEnhancer:
    return IdentityEnhancer()


class SpectralSubtractionEnhancer:
    """Magnitude-domain noise reduction with a percentile noise floor.

    Per frequency band, the noise floor is the given percentile of frame
    magnitudes over time; ``oversubtraction`` times that floor is removed
    and the result never drops below ``magnitude_floor`` times the original
    magnitude. Phase is kept and the signal is rebuilt by overlap-add.
    """

    def __init__(
        self,
        noise_floor_percentile: float = 20.0,
        oversubtraction: float = 1.5,
        magnitude_floor: float = 0.01,
        fft_size: int = 1024,
        overlap: int = 768,
    ):
        if not 0 <= noise_floor_percentile <= 100:
            raise ConfigError(f"percentile must be in [0, 100], got {noise_floor_percentile}")
        if oversubtraction < 0 or magnitude_floor < 0:
            raise ConfigError("oversubtraction and magnitude_floor must be >= 0")
        if not 0 < overlap < fft_size:
            raise ConfigError(f"overlap must be in (0, fft_size), got {overlap}")
        self.noise_floor_percentile = noise_floor_percentile
        self.oversubtraction = oversubtraction
        self.magnitude_floor = magnitude_floor
        self.fft_size = fft_size
        self.overlap = overlap
        self.name = f"specsub_p{noise_floor_percentile:g}_x{oversubtraction:g}"

    def __call__(self, wav: Waveform) -> Waveform:
        if len(wav) < self.fft_size:
            raise DataError(
                f"input of {len(wav)} samples is shorter than one "
                f"{self.fft_size}-sample analysis window"
            )
        _, _, spectrum = scipy.signal.stft(
            wav.samples,
            fs=wav.sample_rate,
            window="hann",
            nperseg=self.fft_size,
            noverlap=self.overlap,
        )
        magnitude = np.abs(spectrum)
        floor = np.percentile(magnitude, self.noise_floor_percentile, axis=1, keepdims=True)
        reduced = np.maximum(
            magnitude - self.oversubtraction * floor, self.magnitude_floor * magnitude
        )
        phase = np.exp(1j * np.angle(spectrum))
        _, rebuilt = scipy.signal.istft(
            reduced * phase,
            fs=wav.sample_rate,
            window="hann",
            nperseg=self.fft_size,
            noverlap=self.overlap,
        )
        return Waveform(_fit_length(np.asarray(rebuilt, dtype=np.float64), len(wav)), wav.sample_rate)


def spectral_subtraction_enhancer(
    noise_floor_percentile: float = 20.0, oversubtraction: float = 1.5, **kwargs
) -> SpectralSubtractionEnhancer:
    return SpectralSubtractionEnhancer(noise_floor_percentile, oversubtraction, **kwargs)


def _fit_length(samples: np.ndarray, n: int) -> np.ndarray:
    if len(samples) >= n:
        return samples[:n]
    return np.pad(samples, (0, n - len(samples)))


class ExternalEnhancer:
    """Runs a pretrained enhancement tool through a file-based contract.

    The tool is invoked as ``<tool> <in.wav> <out.wav>`` and must exit 0.
    Audio is resampled to the tool's native rate on the way in and back to
    the source rate on the way out. Output whose duration drifts by more
    than one 20 ms frame is rejected as malformed.
    """

    def __init__(self, tool: str | Path, tool_rate: int = 16000, timeout_s: float = 300.0):
        tool = Path(tool)
        if not tool.exists():
            raise ConfigError(f"enhancement tool not found: {tool}")
        if tool_rate <= 0:
            raise ConfigError(f"tool_rate must be positive, got {tool_rate}")
        self.tool = tool
        self.tool_rate = tool_rate
        self.timeout_s = timeout_s
        self.name = f"external_{tool.name}"
        self._lock = threading.Lock()

    def __call__(self, wav: Waveform) -> Waveform:
        with self._lock, tempfile.TemporaryDirectory(prefix="enhance_") as tmp:
            in_path = Path(tmp) / "in.wav"
            out_path = Path(tmp) / "out.wav"
            sent = wav if wav.sample_rate == self.tool_rate else resample(wav, self.tool_rate)
            save_audio(sent, in_path, encoding="float32")
            proc = subprocess.run(
                [str(self.tool), str(in_path), str(out_path)],
                capture_output=True,
                text=True,
                timeout=self.timeout_s,
            )
            if proc.returncode != 0:
                raise DataError(
                    f"enhancement tool {self.tool.name} exited {proc.returncode}: "
                    f"{proc.stderr.strip()[:500]}"
                )
            if not out_path.exists():
                raise DataError(f"enhancement tool {self.tool.name} produced no output file")
            got = load_audio(out_path, target_rate=self.tool_rate)
        max_drift = self.tool_rate // 50
        if abs(len(got) - len(sent)) > max_drift:
            raise DataError(
                f"enhancement tool {self.tool.name} returned {len(got)} samples "
                f"for a {len(sent)}-sample input (more than one frame of drift)"
            )
        back = got if wav.sample_rate == self.tool_rate else resample(got, wav.sample_rate)
        return Waveform(_fit_length(back.samples, len(wav)), wav.sample_rate)


def external_enhancer(tool: str | Path, tool_rate: int = 16000, **kwargs) -> ExternalEnhancer:
    return ExternalEnhancer(tool, tool_rate, **kwargs)
