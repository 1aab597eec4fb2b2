"""
Training the text-to-representation acoustic model
==================================================

Fits the phoneme-to-representation model on a three-utterance corpus
for a few hundred steps, then predicts representation frames for an
unseen phoneme string, with and without ground-truth durations.
"""

from pathlib import Path

from repsynth.acoustic import (
    AcousticTrainConfig,
    PhonemeSequence,
    build_acoustic_model,
    predict_representation,
    train_acoustic,
)
from repsynth.pipeline import load_checkpoint
from repsynth.pipeline.manifest import load_manifest
from repsynth.representation import LayerSpec, mock_backend
from repsynth.toydata import PHONEME_TO_ID, make_toy_corpus

out_dir = Path("demo_output") / "05_acoustic"
out_dir.mkdir(parents=True, exist_ok=True)

# make_toy_corpus writes WAVs, a manifest with phonemes and durations,
# and a few noise clips (unused here).
manifest = make_toy_corpus(out_dir / "corpus", n_utterances=3, seed=5)
records = load_manifest(manifest)
print(f"corpus: {len(records)} utterances, first transcript "
      f"{records[0].transcript!r}")

# The trainer builds (phoneme sequence, target representation) pairs from
# the manifest, extracting targets through the backend, then runs Adam
# with a warmup-then-decay learning rate. 300 steps is enough to see the
# representation error drop well below its starting point.
config = AcousticTrainConfig.toy(steps=300, seed=0)
result = train_acoustic(records, out_dir / "corpus", mock_backend(seed=0),
                        LayerSpec.single(5), config, out_dir / "run")
l1 = [b.rep_l1 for b in result.history]
print("representation L1 every 60 steps:")
for step in range(0, 300, 60):
    print(f"  step {step + 1:3d}  L1 {l1[step]:.3f}")
print(f"final {l1[-1]:.3f} ({l1[-1] / l1[0]:.0%} of initial)")

# Checkpoints are self-describing containers: kind, step, layer tag, the
# config echo needed to rebuild the model, and all mutable training state.
payload = load_checkpoint(result.final_checkpoint, expect_kind="acoustic")
print(f"checkpoint kind {payload['kind']!r}, layer tag "
      f"{payload['layer_tag']!r}, step {payload['step']}")
acoustic = build_acoustic_model(config.model)
acoustic.load_state_dict(payload["model"]["model"])

# Inference on a new sentence. With explicit durations the output length
# is their sum; without them the model falls back on its own duration
# predictor, exponentiated and rounded to at least one frame each.
ids = [PHONEME_TO_ID[s] for s in ["n", "o", "l", "a", "m", "i"]]
forced = PhonemeSequence(ids, durations=[4, 6, 4, 6, 4, 6])
seq_forced, _ = predict_representation(forced, acoustic)
seq_free, variances = predict_representation(PhonemeSequence(ids), acoustic)
print(f"teacher-forced durations sum 30 -> {seq_forced.n_frames} frames")
print(f"predicted durations {variances.durations_used.tolist()} "
      f"-> {seq_free.n_frames} frames")
