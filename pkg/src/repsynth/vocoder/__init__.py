"""Representation-conditioned GAN vocoder: models, losses, training."""

from .losses import (
    ALPHA_FM,
    BETA_MEL,
    LossBreakdown,
    adv_loss_d,
    adv_loss_g,
    feature_matching_loss,
    mel_loss,
    total_generator_loss,
)
from .models import (
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    MultiPeriodDiscriminator,
    MultiScaleDiscriminator,
    VocoderDiscriminator,
    build_generator,
    build_discriminator,
    generate,
)
from .training import VocoderTrainConfig, VocoderTrainer, train_vocoder

__all__ = [
    "ALPHA_FM",
    "BETA_MEL",
    "LossBreakdown",
    "adv_loss_d",
    "adv_loss_g",
    "feature_matching_loss",
    "mel_loss",
    "total_generator_loss",
    "DiscriminatorConfig",
    "Generator",
    "GeneratorConfig",
    "MultiPeriodDiscriminator",
    "MultiScaleDiscriminator",
    "VocoderDiscriminator",
    "build_generator",
    "build_discriminator",
    "generate",
    "VocoderTrainConfig",
    "VocoderTrainer",
    "train_vocoder",
]
