import numpy as np
import pytest

from repsynth.signal import Waveform
from repsynth.toydata import SAMPLE_RATE, make_utterance


@pytest.fixture
def speechlike() -> Waveform:
    """A ~1.5 s pause-framed speech-like utterance."""
    return make_utterance(
        ["_", "m", "a", "s", "i", "_", "t", "o", "_"],
        [6, 3, 12, 6, 10, 4, 3, 14, 6],
        seed=11,
    )


@pytest.fixture
def white_noise() -> Waveform:
    rng = np.random.default_rng(99)
    return Waveform(0.05 * rng.standard_normal(2 * SAMPLE_RATE), SAMPLE_RATE)
