"""
Training a representation-to-waveform vocoder on one utterance
==============================================================

Overfits a small adversarial vocoder to a single clip for sixty steps,
watches the spectral loss fall, and resynthesizes the clip from its
representation frames. A real run uses the full preset and a corpus;
the mechanics are identical.
"""

import dataclasses
from pathlib import Path

from repsynth.pipeline import resynthesize
from repsynth.pipeline.manifest import UtteranceRecord, load_manifest, save_manifest
from repsynth.representation import LayerSpec, extract, mock_backend
from repsynth.signal import load_audio, save_audio
from repsynth.toydata import PHONEME_TO_ID, make_utterance
from repsynth.vocoder import VocoderTrainConfig, train_vocoder

out_dir = Path("demo_output") / "04_vocoder"
corpus = out_dir / "corpus"
corpus.mkdir(parents=True, exist_ok=True)

# A one-utterance corpus: WAV file plus a manifest line carrying the
# phoneme sequence and per-phoneme frame durations.
symbols = ["m", "a", "o", "l", "u", "n", "e", "a", "m"]
durations = [6, 6, 6, 5, 5, 5, 5, 5, 5]
save_audio(make_utterance(symbols, durations, seed=11), corpus / "utt.wav")
save_manifest(
    [UtteranceRecord(id="utt", audio_path="utt.wav", transcript="maolu neam",
                     phonemes=[PHONEME_TO_ID[s] for s in symbols],
                     durations=durations)],
    corpus / "manifest.jsonl",
)
records = load_manifest(corpus / "manifest.jsonl")

# The toy preset shrinks the generator and discriminators so CPU steps
# take a fraction of a second. Widening the crop beyond the utterance
# length makes every step see the same full input: pure memorization.
config = dataclasses.replace(
    VocoderTrainConfig.toy(input_dim=768, steps=60, seed=0), crop_frames=64
)
backend = mock_backend(seed=0)
result = train_vocoder(records, corpus, backend, LayerSpec.single(5),
                       config, out_dir / "run")

mel = [b.mel for b in result.history]
print("spectral loss every 10 steps:")
for step in range(0, 60, 10):
    print(f"  step {step + 1:3d}  mel {mel[step]:.3f}")
print(f"loss log: {result.loss_log}")

# Resynthesis: extract frames from the training clip, push them through
# the trained generator. 60 steps is far too few for clean audio, but the
# output length already obeys the 480-samples-per-frame contract.
wav = load_audio(corpus / "utt.wav")
rep = extract(wav, LayerSpec.single(5), backend)
resynth = resynthesize(rep, result.final_checkpoint)
print(f"{rep.n_frames} frames -> {len(resynth)} samples "
      f"({len(resynth) // rep.n_frames} per frame)")
save_audio(resynth, out_dir / "resynthesized.wav")
print(f"wrote {out_dir / 'resynthesized.wav'}")
