"""Frame-level representations from a pluggable pretrained-model backend.

A backend turns a waveform into one feature matrix per model layer on a
20 ms grid. The shipped ``MockBackend`` stands in for a real pretrained
model: each of its layers is a fixed seeded linear map of the input's
log-mel frames, which keeps every downstream contract testable without
checkpoint files. Real backends plug in through the same interface.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from . import tensorfile
from .errors import DataError
from .signal import SpectralConfig, Waveform, mel_spectrogram, resample
from .util import content_hash

REP_DIM = 768
FRAME_SHIFT_MS = 20.0


def rep_frame_count(n_samples: int, sample_rate: int) -> int:
    """Frames on the 20 ms grid: ceil(duration / 0.020)."""
    return -(-(50 * n_samples) // sample_rate)


@dataclass
class RepresentationSequence:
    """(n_frames, dim) float32 feature matrix at a fixed frame shift."""

    frames: np.ndarray
    frame_shift_ms: float = FRAME_SHIFT_MS
    source_rate: int = 24000

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2:
            raise DataError(f"representation must be 2-D, got shape {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise DataError("representation contains non-finite values")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class LayerSpec:
    """Which backend layer to use: a single index, or the all-layer mean."""

    layer: int | None = None

    @classmethod
    def single(cls, layer: int) -> "LayerSpec":
        if layer < 0:
            raise DataError(f"layer index must be >= 0, got {layer}")
        return cls(layer=layer)

    @classmethod
    def average_all(cls) -> "LayerSpec":
        return cls(layer=None)

    @property
    def is_average(self) -> bool:
        return self.layer is None

    @property
    def tag(self) -> str:
        return "average" if self.layer is None else f"layer{self.layer}"

    @classmethod
    def from_tag(cls, tag: str) -> "LayerSpec":
        if tag == "average":
            return cls.average_all()
        if tag.startswith("layer"):
            return cls.single(int(tag[len("layer") :]))
        raise DataError(f"unknown layer spec tag {tag!r}")


@runtime_checkable
class RepresentationBackend(Protocol):
    """Contract for pretrained feature extractors.

    ``layer_outputs`` returns the ordered per-layer matrices (layer 0 is the
    model's convolutional front end) for a waveform at ``expected_rate``.
    All matrices share one (n_frames, dim) shape, and the mapping must be
    deterministic for a fixed input and backend identity.
    """

    backend_id: str
    expected_rate: int
    n_layers: int
    dim: int

    def layer_outputs(self, wav: Waveform) -> list[np.ndarray]: ...


def extract(wav: Waveform, spec: LayerSpec, backend: RepresentationBackend) -> RepresentationSequence:
    """Run ``backend`` on ``wav`` and select layers per ``spec``.

    The waveform is resampled to the backend's declared rate if needed and
    the output is regridded onto the 20 ms grid of the *original* duration,
    so ``n_frames == ceil(duration / 0.020)`` regardless of the backend's
    native rate.
    """
    if spec.layer is not None and spec.layer >= backend.n_layers:
        raise DataError(
            f"layer {spec.layer} out of range for backend {backend.backend_id!r} "
            f"with {backend.n_layers} layers"
        )
    fed = wav if wav.sample_rate == backend.expected_rate else resample(wav, backend.expected_rate)
    try:
        layers = backend.layer_outputs(fed)
    except Exception as exc:
        raise DataError(f"backend {backend.backend_id!r} failed: {exc}") from exc
    if len(layers) != backend.n_layers:
        raise DataError(
            f"backend {backend.backend_id!r} returned {len(layers)} layers, "
            f"declared {backend.n_layers}"
        )
    shapes = {m.shape for m in layers}
    if len(shapes) != 1:
        raise DataError(f"backend {backend.backend_id!r} layer shapes disagree: {shapes}")
    if spec.is_average:
        frames = np.mean(np.stack([m.astype(np.float64) for m in layers]), axis=0)
    else:
        frames = layers[spec.layer]
    target = rep_frame_count(len(wav), wav.sample_rate)
    return RepresentationSequence(
        _regrid(np.asarray(frames, dtype=np.float32), target),
        frame_shift_ms=FRAME_SHIFT_MS,
        source_rate=wav.sample_rate,
    )


def _regrid(frames: np.ndarray, target: int) -> np.ndarray:
    """Trim or extend (repeating the last frame) to exactly ``target`` rows."""
    if frames.shape[0] == target:
        return frames
    if frames.shape[0] > target:
        return frames[:target]
    if frames.shape[0] == 0:
        raise DataError("backend produced zero frames")
    pad = np.repeat(frames[-1:], target - frames.shape[0], axis=0)
    return np.concatenate([frames, pad])


# ---------------------------------------------------------------------------
# mock backend


_MOCK_ANALYSIS = SpectralConfig(
    fft_size=1024,
    hop_size=320,
    window_size=640,
    n_mels=80,
    sample_rate=16000,
    fmin=0.0,
    fmax=8000.0,
)


class MockBackend:
    """Deterministic stand-in for a frozen pretrained model.

    Layer k multiplies the floor-centered log-mel frames by a fixed random
    matrix seeded from (seed, k): same input, same output, and distinct
    layers produce distinct features.
    """

    def __init__(self, seed: int, n_layers: int = 13, dim: int = REP_DIM):
        if n_layers < 1:
            raise DataError(f"n_layers must be >= 1, got {n_layers}")
        self.backend_id = f"mock-s{seed}-l{n_layers}-d{dim}"
        self.expected_rate = _MOCK_ANALYSIS.sample_rate
        self.n_layers = n_layers
        self.dim = dim
        children = np.random.SeedSequence(seed).spawn(n_layers)
        scale = 0.25 / np.sqrt(_MOCK_ANALYSIS.n_mels)
        self._maps = [
            (scale * np.random.default_rng(c).standard_normal((_MOCK_ANALYSIS.n_mels, dim))).astype(
                np.float32
            )
            for c in children
        ]

    def layer_outputs(self, wav: Waveform) -> list[np.ndarray]:
        if wav.sample_rate != self.expected_rate:
            raise DataError(
                f"mock backend expects {self.expected_rate} Hz, got {wav.sample_rate}"
            )
        logmel = mel_spectrogram(wav, _MOCK_ANALYSIS).frames
        centered = (logmel - np.log(_MOCK_ANALYSIS.log_floor)).astype(np.float32)
        return [centered @ w for w in self._maps]


def mock_backend(seed: int, n_layers: int = 13, dim: int = REP_DIM) -> MockBackend:
    return MockBackend(seed, n_layers, dim)


class TorchScriptBackend:
    """Adapter for an externally supplied TorchScript feature extractor.

    The scripted module must map a float32 tensor of shape (n_samples,) to a
    list/tuple of per-layer tensors, each (n_frames, dim). The checkpoint is
    loaded once and never updated.
    """

    def __init__(self, checkpoint_path: Path, expected_rate: int = 16000, dim: int = REP_DIM):
        import torch

        checkpoint_path = Path(checkpoint_path)
        if not checkpoint_path.exists():
            raise DataError(f"backend checkpoint not found: {checkpoint_path}")
        self._module = torch.jit.load(str(checkpoint_path), map_location="cpu")
        self._module.eval()
        self.backend_id = f"torchscript-{content_hash(checkpoint_path.read_bytes())[:16]}"
        self.expected_rate = expected_rate
        self.dim = dim
        probe = self._run(np.zeros(expected_rate, dtype=np.float32))
        self.n_layers = len(probe)

    def _run(self, samples: np.ndarray) -> list[np.ndarray]:
        import torch

        with torch.no_grad():
            out = self._module(torch.from_numpy(samples))
        return [t.cpu().numpy().astype(np.float32) for t in out]

    def layer_outputs(self, wav: Waveform) -> list[np.ndarray]:
        if wav.sample_rate != self.expected_rate:
            raise DataError(f"backend expects {self.expected_rate} Hz, got {wav.sample_rate}")
        return self._run(wav.samples.astype(np.float32))


# ---------------------------------------------------------------------------
# persistence and caching


def persist_representation(seq: RepresentationSequence, path: Path) -> None:
    tensorfile.save_rep_matrix(path, seq.frames, seq.frame_shift_ms, seq.source_rate)


def load_representation(path: Path, expected_dim: int | None = None) -> RepresentationSequence:
    frames, shift_ms, rate = tensorfile.load_rep_matrix(path)
    if expected_dim is not None and frames.shape[1] != expected_dim:
        raise DataError(
            f"representation dim mismatch in {path}: expected {expected_dim}, got {frames.shape[1]}"
        )
    return RepresentationSequence(frames, frame_shift_ms=shift_ms, source_rate=rate)


@dataclass
class RepresentationCache:
    """Disk cache keyed by (audio content, backend id, layer spec).

    Writes go through atomic rename, so concurrent writers of the same key
    are safe; frozen backends make entries permanently valid.
    """

    root: Path
    hits: int = field(default=0, init=False)
    misses: int = field(default=0, init=False)

    def key(self, wav: Waveform, spec: LayerSpec, backend: RepresentationBackend) -> str:
        digest = content_hash(
            wav.samples.tobytes()
            + str(wav.sample_rate).encode()
            + backend.backend_id.encode()
            + spec.tag.encode()
        )
        return digest[:32]

    def path_for(self, key: str) -> Path:
        return Path(self.root) / f"{key}.rep"

    def get_or_extract(
        self, wav: Waveform, spec: LayerSpec, backend: RepresentationBackend
    ) -> tuple[RepresentationSequence, bool]:
        """Returns (sequence, cache_hit)."""
        path = self.path_for(self.key(wav, spec, backend))
        if path.exists():
            self.hits += 1
            return load_representation(path), True
        seq = extract(wav, spec, backend)
        persist_representation(seq, path)
        self.misses += 1
        return seq, False
