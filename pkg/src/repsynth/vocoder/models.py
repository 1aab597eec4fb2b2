"""Generator and discriminators for the representation-to-waveform vocoder.

The generator upsamples 20 ms representation frames to 24 kHz audio with
transpose convolutions whose factors multiply to the 480-sample hop,
interleaved with multi-receptive-field residual blocks. Two discriminator
families judge the result: one over periodic reshapings of the waveform,
one over progressively average-pooled scales.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.parametrizations import weight_norm

from ..errors import DataError, NumericError
from ..representation import RepresentationSequence
from ..signal import Waveform

SAMPLES_PER_FRAME = 480
LRELU_SLOPE = 0.1


@dataclass(frozen=True)
class GeneratorConfig:
    input_dim: int = 768
    upsample_factors: tuple[int, ...] = (10, 6, 4, 2)
    base_channels: int = 256
    min_channels: int = 1
    resblock_kernel_sizes: tuple[int, ...] = (3, 7, 11)
    resblock_dilations: tuple[tuple[int, ...], ...] = ((1, 3, 5), (1, 3, 5), (1, 3, 5))
    use_weight_norm: bool = True

    def __post_init__(self):
        if math.prod(self.upsample_factors) != SAMPLES_PER_FRAME:
            raise DataError(
                f"upsample factors {self.upsample_factors} multiply to "
                f"{math.prod(self.upsample_factors)}, need {SAMPLES_PER_FRAME}"
            )
        if len(self.resblock_kernel_sizes) != len(self.resblock_dilations):
            raise DataError("one dilation set is required per residual kernel size")
        if self.input_dim < 1 or self.base_channels < 1 or self.min_channels < 1:
            raise DataError("input_dim and channel widths must be >= 1")

    @classmethod
    def toy(cls, input_dim: int = 768) -> "GeneratorConfig":
        return cls(
            input_dim=input_dim,
            base_channels=48,
            min_channels=12,
            resblock_kernel_sizes=(3, 7),
            resblock_dilations=((1, 3), (1, 3)),
        )

    @classmethod
    def tiny(cls, input_dim: int = 8) -> "GeneratorConfig":
        """Smallest legal shape, for finite-difference gradient checks."""
        return cls(
            input_dim=input_dim,
            base_channels=4,
            resblock_kernel_sizes=(3,),
            resblock_dilations=((1,),),
            use_weight_norm=False,
        )


@dataclass(frozen=True)
class DiscriminatorConfig:
    periods: tuple[int, ...] = (2, 3, 5, 7, 11)
    period_channels: tuple[int, ...] = (32, 128, 512, 1024)
    scales: int = 3
    scale_channels: tuple[int, ...] = (128, 128, 256, 512, 1024, 1024, 1024)
    use_weight_norm: bool = True

    def __post_init__(self):
        if not self.periods and self.scales < 1:
            raise DataError("at least one sub-discriminator is required")

    @classmethod
    def toy(cls) -> "DiscriminatorConfig":
        return cls(period_channels=(8, 16, 32), scales=2, scale_channels=(8, 16, 32, 32))

    @classmethod
    def tiny(cls) -> "DiscriminatorConfig":
        return cls(
            periods=(2, 3),
            period_channels=(2, 4),
            scales=1,
            scale_channels=(2, 4),
            use_weight_norm=False,
        )


def _maybe_wn(module: nn.Module, enabled: bool) -> nn.Module:
    return weight_norm(module) if enabled else module


class ResidualBlock(nn.Module):
    """Pair-of-convs residual unit, one pair per dilation."""

    def __init__(self, channels: int, kernel_size: int, dilations: tuple[int, ...], wn: bool):
        super().__init__()
        self.dilated = nn.ModuleList()
        self.plain = nn.ModuleList()
        for d in dilations:
            self.dilated.append(
                _maybe_wn(
                    nn.Conv1d(channels, channels, kernel_size, dilation=d,
                              padding=d * (kernel_size - 1) // 2),
                    wn,
                )
            )
            self.plain.append(
                _maybe_wn(
                    nn.Conv1d(channels, channels, kernel_size, padding=(kernel_size - 1) // 2),
                    wn,
                )
            )

    def forward(self, x):
        for dilated, plain in zip(self.dilated, self.plain):
            y = dilated(F.leaky_relu(x, LRELU_SLOPE))
            y = plain(F.leaky_relu(y, LRELU_SLOPE))
            x = x + y
        return x


class Generator(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        wn = config.use_weight_norm
        self.conv_pre = _maybe_wn(nn.Conv1d(config.input_dim, config.base_channels, 7, padding=3), wn)
        self.upsamples = nn.ModuleList()
        self.resblocks = nn.ModuleList()
        channels = config.base_channels
        for factor in config.upsample_factors:
            out_channels = max(config.min_channels, channels // 2)
            self.upsamples.append(
                _maybe_wn(
                    nn.ConvTranspose1d(
                        channels,
                        out_channels,
                        factor * 2,
                        stride=factor,
                        padding=factor // 2 + factor % 2,
                        output_padding=factor % 2,
                    ),
                    wn,
                )
            )
            for kernel, dilations in zip(config.resblock_kernel_sizes, config.resblock_dilations):
                self.resblocks.append(ResidualBlock(out_channels, kernel, dilations, wn))
            channels = out_channels
        self.num_kernels = len(config.resblock_kernel_sizes)
        self.conv_post = _maybe_wn(nn.Conv1d(channels, 1, 7, padding=3), wn)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(batch, input_dim, frames) -> (batch, 1, frames * 480), in [-1, 1]."""
        x = self.conv_pre(x)
        for i, up in enumerate(self.upsamples):
            x = up(F.leaky_relu(x, LRELU_SLOPE))
            blocks = self.resblocks[i * self.num_kernels : (i + 1) * self.num_kernels]
            x = sum(block(x) for block in blocks) / self.num_kernels
        x = self.conv_post(F.leaky_relu(x, LRELU_SLOPE))
        return torch.tanh(x)


class PeriodDiscriminator(nn.Module):
    """Judges the waveform folded into (time/period, period) stripes."""

    def __init__(self, period: int, channels: tuple[int, ...], wn: bool):
        super().__init__()
        self.period = period
        self.convs = nn.ModuleList()
        in_ch = 1
        for ch in channels:
            self.convs.append(
                _maybe_wn(nn.Conv2d(in_ch, ch, (5, 1), stride=(3, 1), padding=(2, 0)), wn)
            )
            in_ch = ch
        self.conv_post = _maybe_wn(nn.Conv2d(in_ch, 1, (3, 1), padding=(1, 0)), wn)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        batch, _, length = x.shape
        remainder = length % self.period
        if remainder:
            x = F.pad(x, (0, self.period - remainder), mode="reflect")
            length = x.shape[-1]
        x = x.view(batch, 1, length // self.period, self.period)
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            features.append(x)
        x = self.conv_post(x)
        features.append(x)
        return x, features


class ScaleDiscriminator(nn.Module):
    def __init__(self, channels: tuple[int, ...], wn: bool):
        super().__init__()
        self.convs = nn.ModuleList()
        in_ch = 1
        kernel_sizes = [15] + [41] * max(0, len(channels) - 2) + ([5] if len(channels) > 1 else [])
        strides = [1] + [2] * max(0, len(channels) - 2) + ([1] if len(channels) > 1 else [])
        groups = [1] + [4] * max(0, len(channels) - 2) + ([1] if len(channels) > 1 else [])
        for ch, k, s, g in zip(channels, kernel_sizes, strides, groups):
            g = math.gcd(g, math.gcd(in_ch, ch))
            self.convs.append(
                _maybe_wn(nn.Conv1d(in_ch, ch, k, stride=s, groups=g, padding=(k - 1) // 2), wn)
            )
            in_ch = ch
        self.conv_post = _maybe_wn(nn.Conv1d(in_ch, 1, 3, padding=1), wn)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, list[torch.Tensor]]:
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            features.append(x)
        x = self.conv_post(x)
        features.append(x)
        return x, features


class MultiPeriodDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.subs = nn.ModuleList(
            PeriodDiscriminator(p, config.period_channels, config.use_weight_norm)
            for p in config.periods
        )

    def forward(self, x):
        outs = [sub(x) for sub in self.subs]
        return [o[0] for o in outs], [o[1] for o in outs]


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.subs = nn.ModuleList(
            ScaleDiscriminator(config.scale_channels, config.use_weight_norm)
            for _ in range(config.scales)
        )
        self.pool = nn.AvgPool1d(4, stride=2, padding=2)

    def forward(self, x):
        scores, features = [], []
        for i, sub in enumerate(self.subs):
            if i > 0:
                x = self.pool(x)
            s, f = sub(x)
            scores.append(s)
            features.append(f)
        return scores, features


class VocoderDiscriminator(nn.Module):
    """Period and scale discriminators combined behind one forward."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        self.mpd = MultiPeriodDiscriminator(config)
        self.msd = MultiScaleDiscriminator(config)

    def forward(self, x: torch.Tensor) -> tuple[list[torch.Tensor], list[list[torch.Tensor]]]:
        """(batch, 1, samples) -> per-sub-discriminator scores and feature lists."""
        p_scores, p_feats = self.mpd(x)
        s_scores, s_feats = self.msd(x)
        return p_scores + s_scores, p_feats + s_feats


def build_generator(config: GeneratorConfig, seed: int = 0) -> Generator:
    torch.manual_seed(seed)
    return Generator(config)


def build_discriminator(config: DiscriminatorConfig, seed: int = 0) -> VocoderDiscriminator:
    torch.manual_seed(seed)
    return VocoderDiscriminator(config)


def generate(rep: RepresentationSequence, generator: Generator) -> Waveform:
    """Vocode a representation sequence into 24 kHz audio.

    Output length is exactly rep.n_frames * 480 samples.
    """
    if rep.dim != generator.config.input_dim:
        raise DataError(
            f"representation dim {rep.dim} does not match "
            f"generator input_dim {generator.config.input_dim}"
        )
    if rep.n_frames < 1:
        raise DataError("cannot vocode an empty representation sequence")
    for name, param in generator.named_parameters():
        if not torch.isfinite(param).all():
            raise NumericError(f"generator parameter {name} contains non-finite values")
    dtype = next(generator.parameters()).dtype
    x = torch.from_numpy(rep.frames.T.copy()).to(dtype).unsqueeze(0)
    was_training = generator.training
    generator.eval()
    try:
        with torch.no_grad():
            audio = generator(x)
    finally:
        generator.train(was_training)
    samples = audio.squeeze(0).squeeze(0).numpy().astype(np.float64)
    if len(samples) != rep.n_frames * SAMPLES_PER_FRAME:
        raise NumericError(
            f"generator produced {len(samples)} samples for {rep.n_frames} frames"
        )
    return Waveform(samples, 24000)
