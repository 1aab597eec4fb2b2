"""Synthetic speech-like corpora for desk-scale experiments.

Real corpora are large and license-bound; everything in the test and demo
suites runs instead on procedurally generated utterances built from a small
phoneme inventory. Segment boundaries land exactly on the 20 ms frame grid,
so the generated duration annotations are exact by construction.
"""

from pathlib import Path

import numpy as np

from .signal import Waveform, save_audio

SAMPLE_RATE = 24000
FRAME_SAMPLES = 480  # 20 ms at 24 kHz

#: id 0 is the pause symbol.
PHONEMES = ["_", "a", "e", "i", "o", "u", "m", "n", "l", "s", "sh", "f", "k", "t"]
PHONEME_TO_ID = {p: i for i, p in enumerate(PHONEMES)}

_VOWEL_FORMANTS = {
    "a": (850.0, 1600.0),
    "e": (500.0, 2100.0),
    "i": (300.0, 2700.0),
    "o": (450.0, 900.0),
    "u": (350.0, 750.0),
    "m": (250.0, 1100.0),
    "n": (300.0, 1400.0),
    "l": (400.0, 1200.0),
}
_FRICATIVE_BANDS = {
    "s": (5000.0, 9500.0),
    "sh": (2500.0, 6000.0),
    "f": (1500.0, 8000.0),
}
_STOPS = {"k": 1800.0, "t": 4200.0}


def _voiced_segment(n, f0, formants, rng):
    t = np.arange(n) / SAMPLE_RATE
    # slow pitch drift + vibrato keeps the signal from being a steady tone
    f0_track = f0 * (1.0 + 0.02 * np.sin(2 * np.pi * 4.5 * t) + 0.04 * rng.standard_normal() * t)
    phase = 2 * np.pi * np.cumsum(f0_track) / SAMPLE_RATE
    out = np.zeros(n)
    f1, f2 = formants
    for k in range(1, int(10000.0 / f0)):
        freq = k * f0
        amp = np.exp(-(((freq - f1) / 450.0) ** 2)) + 0.5 * np.exp(-(((freq - f2) / 600.0) ** 2))
        amp += 0.08 / k
        out += amp * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    return out


def _noise_band(n, lo, hi, rng):
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / SAMPLE_RATE)
    mask = (freqs >= lo) & (freqs <= hi)
    return np.fft.irfft(spectrum * mask, n)


def _segment(symbol, n, f0, rng):
    if symbol == "_":
        return np.zeros(n)
    if symbol in _VOWEL_FORMANTS:
        seg = _voiced_segment(n, f0, _VOWEL_FORMANTS[symbol], rng)
    elif symbol in _FRICATIVE_BANDS:
        lo, hi = _FRICATIVE_BANDS[symbol]
        seg = 0.7 * _noise_band(n, lo, hi, rng)
    elif symbol in _STOPS:
        seg = np.zeros(n)
        burst = min(n, round(0.012 * SAMPLE_RATE))
        seg[n - burst :] = _noise_band(burst, _STOPS[symbol], _STOPS[symbol] + 3000.0, rng)
    else:
        raise KeyError(f"unknown phoneme symbol {symbol!r}")
    peak = np.max(np.abs(seg))
    if peak > 0:
        seg = seg / peak
    ramp = min(n // 4, round(0.005 * SAMPLE_RATE))
    if ramp > 0:
        env = np.ones(n)
        env[:ramp] = np.linspace(0.0, 1.0, ramp)
        env[-ramp:] = np.linspace(1.0, 0.0, ramp)
        seg = seg * env
    return seg


def make_utterance(symbols: list[str], durations: list[int], seed: int = 0, f0: float = 140.0) -> Waveform:
    """Render phoneme ``symbols`` with per-phoneme ``durations`` (20 ms frames)."""
    rng = np.random.default_rng(seed)
    parts = [_segment(sym, d * FRAME_SAMPLES, f0, rng) for sym, d in zip(symbols, durations)]
    samples = 0.4 * np.concatenate(parts) if parts else np.zeros(0)
    return Waveform(samples, SAMPLE_RATE)


def random_sentence(rng: np.random.Generator, n_syllables: int = 5) -> tuple[list[str], list[int]]:
    """A pause-framed consonant-vowel sequence with plausible durations."""
    consonants = ["m", "n", "l", "s", "sh", "f", "k", "t"]
    vowels = ["a", "e", "i", "o", "u"]
    symbols = ["_"]
    durations = [int(rng.integers(4, 8))]
    for i in range(n_syllables):
        symbols.append(str(rng.choice(consonants)))
        durations.append(int(rng.integers(2, 5)))
        symbols.append(str(rng.choice(vowels)))
        durations.append(int(rng.integers(4, 10)))
        if i < n_syllables - 1 and rng.random() < 0.25:
            symbols.append("_")
            durations.append(int(rng.integers(2, 5)))
    symbols.append("_")
    durations.append(int(rng.integers(4, 8)))
    return symbols, durations


def make_noise_clip(kind: str, n: int, seed: int = 0) -> Waveform:
    """Background noise of a given flavor: 'white', 'hum', 'rumble', 'babble'."""
    rng = np.random.default_rng(seed)
    t = np.arange(n) / SAMPLE_RATE
    if kind == "white":
        samples = rng.standard_normal(n)
    elif kind == "hum":
        samples = 0.6 * np.sin(2 * np.pi * 100.0 * t) + 0.4 * rng.standard_normal(n)
    elif kind == "rumble":
        samples = _noise_band(n, 20.0, 400.0, rng)
    elif kind == "babble":
        samples = np.zeros(n)
        for _ in range(6):
            f0 = rng.uniform(90.0, 260.0)
            env = 0.5 + 0.5 * np.sin(2 * np.pi * rng.uniform(1.0, 4.0) * t + rng.uniform(0, 6.28))
            samples += env * np.sin(2 * np.pi * f0 * t + rng.uniform(0, 6.28))
    else:
        raise KeyError(f"unknown noise kind {kind!r}")
    peak = np.max(np.abs(samples))
    return Waveform(0.3 * samples / peak, SAMPLE_RATE)


def make_toy_corpus(
    root: Path,
    n_utterances: int = 5,
    seed: int = 0,
    n_noise_clips: int = 3,
    syllable_range: tuple[int, int] = (3, 6),
) -> Path:
    """Write a self-contained corpus under ``root``; returns the manifest path.

    Layout: ``wav/utt####.wav`` clean utterances, ``noise/noise#.wav`` noise
    clips (some deliberately shorter than the utterances), and
    ``manifest.jsonl`` with exact frame-grid durations.
    """
    from .pipeline.manifest import UtteranceRecord, save_manifest

    root = Path(root)
    (root / "wav").mkdir(parents=True, exist_ok=True)
    (root / "noise").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_utterances):
        symbols, durations = random_sentence(rng, int(rng.integers(*syllable_range)))
        speaker = i % 2
        wav = make_utterance(
            symbols, durations, seed=int(rng.integers(2**31)), f0=(140.0, 210.0)[speaker]
        )
        rel = f"wav/utt{i:04d}.wav"
        save_audio(wav, root / rel)
        records.append(
            UtteranceRecord(
                id=f"utt{i:04d}",
                audio_path=rel,
                transcript=" ".join(symbols),
                phonemes=[PHONEME_TO_ID[s] for s in symbols],
                durations=durations,
                speaker=f"spk{speaker}",
                split="train" if i % 5 else "test",
            )
        )
    kinds = ["white", "hum", "rumble", "babble"]
    for k in range(n_noise_clips):
        # every other clip shorter than a typical utterance to exercise tiling
        n = SAMPLE_RATE * 2 if k % 2 == 0 else SAMPLE_RATE // 2
        clip = make_noise_clip(kinds[k % len(kinds)], n, seed=seed + 1000 + k)
        save_audio(clip, root / "noise" / f"noise{k}.wav")
    manifest_path = root / "manifest.jsonl"
    save_manifest(records, manifest_path)
    return manifest_path
