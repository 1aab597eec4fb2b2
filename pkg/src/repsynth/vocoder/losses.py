"""Loss system for adversarial vocoder training.

Least-squares adversarial terms, feature matching over discriminator
activations, and an L1 log-mel term, combined as

    total_g = adv_g + alpha * fm + beta * mel        (alpha 2, beta 45)

Per-sub-discriminator contributions are summed, not averaged; within a
sub-discriminator the reduction is the elementwise mean.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import torch

from ..errors import DataError, NumericError
from ..signal import REP_ALIGNED, SpectralConfig, frame_count, mel_filterbank

ALPHA_FM = 2.0
BETA_MEL = 45.0


@dataclass(frozen=True)
class LossBreakdown:
    adv_g: float
    fm: float
    mel: float
    total_g: float
    adv_d: float
    alpha: float = ALPHA_FM
    beta: float = BETA_MEL

    def __post_init__(self):
        values = (self.adv_g, self.fm, self.mel, self.total_g, self.adv_d)
        if not all(math.isfinite(v) for v in values):
            raise NumericError(f"non-finite loss component in {values}")
        if any(v < 0 for v in values):
            raise NumericError(f"negative loss component in {values}")
        if self.total_g != self.adv_g + self.alpha * self.fm + self.beta * self.mel:
            raise NumericError("total_g does not equal adv_g + alpha*fm + beta*mel")

    def as_row(self) -> dict[str, float]:
        return {
            "adv_d": self.adv_d,
            "adv_g": self.adv_g,
            "fm": self.fm,
            "mel": self.mel,
            "total_g": self.total_g,
        }


def total_generator_loss(
    adv_g: float, fm: float, mel: float,
    alpha: float = ALPHA_FM, beta: float = BETA_MEL, adv_d: float = 0.0,
) -> LossBreakdown:
    return LossBreakdown(
        adv_g=adv_g,
        fm=fm,
        mel=mel,
        total_g=adv_g + alpha * fm + beta * mel,
        adv_d=adv_d,
        alpha=alpha,
        beta=beta,
    )


def adv_loss_d(real_scores: list[torch.Tensor], fake_scores: list[torch.Tensor]) -> torch.Tensor:
    """Discriminator objective: real toward 1, fake toward 0."""
    if not real_scores or len(real_scores) != len(fake_scores):
        raise DataError(
            f"score lists must be nonempty and paired, got {len(real_scores)} real "
            f"and {len(fake_scores)} fake"
        )
    total = None
    for real, fake in zip(real_scores, fake_scores):
        if real.shape != fake.shape:
            raise DataError(f"paired score shapes differ: {real.shape} vs {fake.shape}")
        term = torch.mean((real - 1.0) ** 2) + torch.mean(fake**2)
        total = term if total is None else total + term
    return total


def adv_loss_g(fake_scores: list[torch.Tensor]) -> torch.Tensor:
    """Generator objective: fake scores toward 1."""
    if not fake_scores:
        raise DataError("empty score list")
    total = None
    for fake in fake_scores:
        term = torch.mean((fake - 1.0) ** 2)
        total = term if total is None else total + term
    return total


def feature_matching_loss(
    real_feats: list[list[torch.Tensor]], fake_feats: list[list[torch.Tensor]]
) -> torch.Tensor:
    """Sum over sub-discriminators and layers of mean absolute difference."""
    if not real_feats or len(real_feats) != len(fake_feats):
        raise DataError("feature lists must be nonempty and paired per sub-discriminator")
    total = None
    for sub_real, sub_fake in zip(real_feats, fake_feats):
        if not sub_real or len(sub_real) != len(sub_fake):
            raise DataError("per-sub-discriminator layer lists must be nonempty and paired")
        for real, fake in zip(sub_real, sub_fake):
            if real.shape != fake.shape:
                raise DataError(f"paired feature shapes differ: {real.shape} vs {fake.shape}")
            term = torch.mean(torch.abs(real - fake))
            total = term if total is None else total + term
    return total


@lru_cache(maxsize=8)
def _torch_window_and_filterbank(config: SpectralConfig) -> tuple[torch.Tensor, torch.Tensor]:
    window = torch.hann_window(config.window_size, periodic=True, dtype=torch.float64)
    pad = (config.fft_size - config.window_size) // 2
    window = torch.nn.functional.pad(window, (pad, config.fft_size - config.window_size - pad))
    bank = torch.from_numpy(mel_filterbank(config).copy())
    return window, bank


def torch_log_mel(wave: torch.Tensor, config: SpectralConfig = REP_ALIGNED) -> torch.Tensor:
    """Differentiable log-mel of a 1-D waveform tensor, float64 internally.

    Matches the numpy analysis exactly: reflect padding of fft_size/2 on
    both sides, frames every hop starting at multiples of hop, magnitude
    spectrum through the shared filterbank, clamp at the floor, natural log.
    """
    if wave.dim() != 1:
        raise DataError(f"expected a 1-D waveform tensor, got shape {tuple(wave.shape)}")
    n = wave.shape[0]
    if n < 1:
        raise DataError("cannot analyze an empty waveform")
    x = wave.to(torch.float64)
    half = config.fft_size // 2
    x = torch.nn.functional.pad(x.view(1, 1, -1), (half, half), mode="reflect").view(-1)
    n_frames = frame_count(n, config.hop_size)
    frames = x.unfold(0, config.fft_size, config.hop_size)[:n_frames]
    window, bank = _torch_window_and_filterbank(config)
    spectrum = torch.fft.rfft(frames * window, n=config.fft_size, dim=1)
    mel = torch.abs(spectrum) @ bank.T
    return torch.log(torch.clamp(mel, min=config.log_floor))


def mel_loss(
    real: torch.Tensor, fake: torch.Tensor, config: SpectralConfig = REP_ALIGNED
) -> torch.Tensor:
    """Mean absolute difference between the two log-mel matrices."""
    if real.shape != fake.shape:
        raise DataError(f"waveform lengths differ: {tuple(real.shape)} vs {tuple(fake.shape)}")
    return torch.mean(torch.abs(torch_log_mel(real, config) - torch_log_mel(fake, config)))
