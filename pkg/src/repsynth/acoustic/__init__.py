"""Text-to-representation acoustic model: encoder, variance adaptor, training."""

from .features import (
    frame_energy,
    frame_pitch,
    phoneme_level_average,
    reconcile_durations,
    uniform_durations,
)
from .model import (
    AcousticConfig,
    AcousticModel,
    PhonemeSequence,
    VarianceOutputs,
    build_acoustic_model,
    decode_to_representation,
    encode,
    length_regulate,
    predict_representation,
)
from .training import (
    AcousticLossBreakdown,
    AcousticTrainConfig,
    AcousticTrainer,
    acoustic_loss,
    train_acoustic,
)

__all__ = [
    "frame_energy",
    "frame_pitch",
    "phoneme_level_average",
    "reconcile_durations",
    "uniform_durations",
    "AcousticConfig",
    "AcousticModel",
    "PhonemeSequence",
    "VarianceOutputs",
    "build_acoustic_model",
    "decode_to_representation",
    "encode",
    "length_regulate",
    "predict_representation",
    "AcousticLossBreakdown",
    "AcousticTrainConfig",
    "AcousticTrainer",
    "acoustic_loss",
    "train_acoustic",
]
