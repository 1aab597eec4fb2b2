"""Phoneme-to-representation model with duration, pitch, and energy control.

Phoneme embeddings plus sinusoidal positions run through self-attention
blocks with convolutional feed-forwards; a variance adaptor predicts
log-duration, pitch, and energy, adds quantized pitch/energy embeddings,
and expands states to the 20 ms frame grid; a projection (optionally after
more attention blocks) maps each frame into the representation space.

Sequences are processed one utterance at a time (batch dimension 1);
larger effective batches come from gradient accumulation in training.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import DataError, NumericError
from ..representation import FRAME_SHIFT_MS, RepresentationSequence


@dataclass
class PhonemeSequence:
    """Phoneme ids with optional per-phoneme training targets."""

    ids: list[int]
    durations: list[int] | None = None
    pitch: list[float] | None = None
    energy: list[float] | None = None

    def __post_init__(self):
        if not self.ids:
            raise DataError("empty phoneme sequence")
        if any(i < 0 for i in self.ids):
            raise DataError("negative phoneme id")
        for name in ("durations", "pitch", "energy"):
            value = getattr(self, name)
            if value is not None and len(value) != len(self.ids):
                raise DataError(
                    f"{name} has {len(value)} entries for {len(self.ids)} phonemes"
                )
        if self.durations is not None and any(d < 0 for d in self.durations):
            raise DataError("negative duration")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def has_targets(self) -> bool:
        return self.durations is not None


@dataclass(frozen=True)
class AcousticConfig:
    vocab_size: int = 64
    hidden_dim: int = 256
    encoder_layers: int = 4
    decoder_layers: int = 0
    heads: int = 2
    ff_filter_size: int = 1024
    ff_kernel: int = 9
    variance_filter_size: int = 256
    variance_kernel: int = 3
    n_bins: int = 256
    output_dim: int = 768
    dropout: float = 0.1
    max_frames: int = 4096

    def __post_init__(self):
        if self.hidden_dim % self.heads != 0:
            raise DataError("hidden_dim must be divisible by heads")
        if min(self.vocab_size, self.hidden_dim, self.encoder_layers, self.n_bins,
               self.output_dim) < 1:
            raise DataError("model dimensions must be >= 1")
        if self.decoder_layers < 0:
            raise DataError("decoder_layers must be >= 0")

    @classmethod
    def toy(cls, output_dim: int = 768) -> "AcousticConfig":
        return cls(
            hidden_dim=128,
            encoder_layers=2,
            ff_filter_size=256,
            ff_kernel=3,
            variance_filter_size=64,
            output_dim=output_dim,
        )

    @classmethod
    def tiny(cls, output_dim: int = 8) -> "AcousticConfig":
        """Smallest legal shape, for finite-difference gradient checks."""
        return cls(
            vocab_size=8,
            hidden_dim=4,
            encoder_layers=1,
            heads=1,
            ff_filter_size=4,
            ff_kernel=3,
            variance_filter_size=4,
            n_bins=4,
            output_dim=output_dim,
            dropout=0.0,
        )


def length_regulate(hidden: torch.Tensor, durations: torch.Tensor) -> torch.Tensor:
    """Repeat each row of ``hidden`` by its duration: (T, D) -> (sum durations, D)."""
    if hidden.shape[0] != durations.shape[0]:
        raise DataError(
            f"{hidden.shape[0]} hidden vectors but {durations.shape[0]} durations"
        )
    if torch.any(durations < 0):
        raise DataError("negative duration")
    return torch.repeat_interleave(hidden, durations, dim=0)


class SinusoidalPositions(nn.Module):
    def __init__(self, dim: int, max_len: int):
        super().__init__()
        position = torch.arange(max_len, dtype=torch.float64).unsqueeze(1)
        step = torch.exp(
            torch.arange(0, dim, 2, dtype=torch.float64) * (-math.log(10000.0) / dim)
        )
        table = torch.zeros(max_len, dim, dtype=torch.float64)
        table[:, 0::2] = torch.sin(position * step)
        table[:, 1::2] = torch.cos(position * step[: dim // 2])
        self.register_buffer("table", table.to(torch.float32))

    def forward(self, length: int) -> torch.Tensor:
        if length > self.table.shape[0]:
            raise DataError(
                f"sequence of {length} exceeds the positional table "
                f"({self.table.shape[0]}); raise max_frames"
            )
        return self.table[:length]


class FFTBlock(nn.Module):
    """Self-attention followed by a two-layer convolutional feed-forward."""

    def __init__(self, config: AcousticConfig):
        super().__init__()
        self.attention = nn.MultiheadAttention(
            config.hidden_dim, config.heads, dropout=config.dropout, batch_first=True
        )
        self.norm1 = nn.LayerNorm(config.hidden_dim)
        self.conv1 = nn.Conv1d(
            config.hidden_dim, config.ff_filter_size, config.ff_kernel,
            padding=(config.ff_kernel - 1) // 2,
        )
        self.conv2 = nn.Conv1d(
            config.ff_filter_size, config.hidden_dim, config.ff_kernel,
            padding=(config.ff_kernel - 1) // 2,
        )
        self.norm2 = nn.LayerNorm(config.hidden_dim)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        attended, _ = self.attention(x, x, x, need_weights=False)
        x = self.norm1(x + self.dropout(attended))
        y = self.conv2(F.relu(self.conv1(x.transpose(1, 2)))).transpose(1, 2)
        return self.norm2(x + self.dropout(y))


class VariancePredictor(nn.Module):
    """Two conv layers with layer norm, then a scalar head per position."""

    def __init__(self, config: AcousticConfig):
        super().__init__()
        k = config.variance_kernel
        self.conv1 = nn.Conv1d(
            config.hidden_dim, config.variance_filter_size, k, padding=(k - 1) // 2
        )
        self.norm1 = nn.LayerNorm(config.variance_filter_size)
        self.conv2 = nn.Conv1d(
            config.variance_filter_size, config.variance_filter_size, k, padding=(k - 1) // 2
        )
        self.norm2 = nn.LayerNorm(config.variance_filter_size)
        self.dropout = nn.Dropout(config.dropout)
        self.head = nn.Linear(config.variance_filter_size, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = F.relu(self.conv1(x.transpose(1, 2))).transpose(1, 2)
        y = self.dropout(self.norm1(y))
        y = F.relu(self.conv2(y.transpose(1, 2))).transpose(1, 2)
        y = self.dropout(self.norm2(y))
        return self.head(y).squeeze(-1)


@dataclass
class VarianceOutputs:
    """Per-phoneme predictions and the durations actually used for expansion."""

    log_duration_pred: torch.Tensor
    pitch_pred: torch.Tensor
    energy_pred: torch.Tensor
    durations_used: torch.Tensor

    @property
    def expanded_length(self) -> int:
        return int(self.durations_used.sum())


def _quantize(values: torch.Tensor, n_bins: int) -> torch.Tensor:
    """Map [0, 1] values onto integer bins, clamping out-of-range inputs."""
    return torch.clamp((values * n_bins).long(), 0, n_bins - 1)


class AcousticModel(nn.Module):
    def __init__(self, config: AcousticConfig):
        super().__init__()
        self.config = config
        self.embedding = nn.Embedding(config.vocab_size, config.hidden_dim)
        self.positions = SinusoidalPositions(config.hidden_dim, config.max_frames)
        self.encoder = nn.ModuleList(FFTBlock(config) for _ in range(config.encoder_layers))
        self.duration_predictor = VariancePredictor(config)
        self.pitch_predictor = VariancePredictor(config)
        self.energy_predictor = VariancePredictor(config)
        self.pitch_embedding = nn.Embedding(config.n_bins, config.hidden_dim)
        self.energy_embedding = nn.Embedding(config.n_bins, config.hidden_dim)
        self.decoder = nn.ModuleList(FFTBlock(config) for _ in range(config.decoder_layers))
        self.projection = nn.Linear(config.hidden_dim, config.output_dim)

    def encode(self, ids: torch.Tensor) -> torch.Tensor:
        """(T,) phoneme ids -> (T, hidden) contextual states."""
        if ids.dim() != 1 or ids.shape[0] < 1:
            raise DataError("phoneme id tensor must be 1-D and nonempty")
        if int(ids.max()) >= self.config.vocab_size or int(ids.min()) < 0:
            raise DataError(
                f"phoneme id out of range for vocab_size {self.config.vocab_size}"
            )
        x = self.embedding(ids) + self.positions(ids.shape[0])
        x = x.unsqueeze(0)
        for block in self.encoder:
            x = block(x)
        return x.squeeze(0)

    def variance_adapt(
        self, hidden: torch.Tensor, seq: PhonemeSequence
    ) -> tuple[torch.Tensor, VarianceOutputs]:
        """Predict variances, condition on them, expand to frame level.

        With targets present (teacher forcing) the ground-truth durations,
        pitch, and energy drive expansion and conditioning; otherwise the
        model's own predictions do, with duration = round(exp(pred))
        clamped to at least 1.
        """
        if hidden.shape[0] < 1:
            raise DataError("empty hidden sequence")
        batched = hidden.unsqueeze(0)
        log_dur = self.duration_predictor(batched).squeeze(0)
        pitch_pred = self.pitch_predictor(batched).squeeze(0)
        if seq.pitch is not None:
            pitch_used = torch.tensor(seq.pitch, dtype=hidden.dtype)
        else:
            pitch_used = pitch_pred.detach()
        hidden = hidden + self.pitch_embedding(_quantize(pitch_used, self.config.n_bins))
        energy_pred = self.energy_predictor(hidden.unsqueeze(0)).squeeze(0)
        if seq.energy is not None:
            energy_used = torch.tensor(seq.energy, dtype=hidden.dtype)
        else:
            energy_used = energy_pred.detach()
        hidden = hidden + self.energy_embedding(_quantize(energy_used, self.config.n_bins))
        if seq.durations is not None:
            durations = torch.tensor(seq.durations, dtype=torch.long)
        else:
            durations = torch.clamp(torch.round(torch.exp(log_dur.detach())).long(), min=1)
        expanded = length_regulate(hidden, durations)
        return expanded, VarianceOutputs(log_dur, pitch_pred, energy_pred, durations)

    def decode(self, expanded: torch.Tensor) -> torch.Tensor:
        """(frames, hidden) -> (frames, output_dim) representation frames."""
        if expanded.shape[0] < 1:
            raise DataError("empty expanded sequence")
        x = expanded + self.positions(expanded.shape[0])
        x = x.unsqueeze(0)
        for block in self.decoder:
            x = block(x)
        return self.projection(x).squeeze(0)

    def forward(self, seq: PhonemeSequence) -> tuple[torch.Tensor, VarianceOutputs]:
        hidden = self.encode(torch.tensor(seq.ids, dtype=torch.long))
        expanded, variances = self.variance_adapt(hidden, seq)
        rep = self.decode(expanded)
        return rep, variances


def build_acoustic_model(config: AcousticConfig, seed: int = 0) -> AcousticModel:
    torch.manual_seed(seed)
    return AcousticModel(config)


def encode(seq: PhonemeSequence, model: AcousticModel) -> torch.Tensor:
    """Deterministic per-phoneme hidden states (eval mode)."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            return model.encode(torch.tensor(seq.ids, dtype=torch.long))
    finally:
        model.train(was_training)


def decode_to_representation(expanded: torch.Tensor, model: AcousticModel) -> RepresentationSequence:
    """Frame states through the decoder and projection, as a sequence object."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            frames = model.decode(expanded)
    finally:
        model.train(was_training)
    return RepresentationSequence(
        frames.numpy().astype(np.float32), frame_shift_ms=FRAME_SHIFT_MS
    )


def predict_representation(
    seq: PhonemeSequence, model: AcousticModel
) -> tuple[RepresentationSequence, VarianceOutputs]:
    """Full inference pass: phonemes to representation frames.

    The returned frame count equals the sum of the predicted (or supplied)
    durations exactly.
    """
    for name, param in model.named_parameters():
        if not torch.isfinite(param).all():
            raise NumericError(f"acoustic parameter {name} contains non-finite values")
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            frames, variances = model(seq)
    finally:
        model.train(was_training)
    return (
        RepresentationSequence(frames.numpy().astype(np.float32), frame_shift_ms=FRAME_SHIFT_MS),
        variances,
    )
