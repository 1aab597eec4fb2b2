"""
The full pipeline, end to end, through the command-line verbs
=============================================================

Writes an experiment config, then walks the exact sequence a real run
uses: prepare-data (mix, enhance, cache), train-vocoder, train-acoustic,
synthesize, evaluate, and a two-layer sweep. Every stage is invoked
through the same entry point the installed ``repsynth`` command uses,
so each printed command line can be rerun from a shell verbatim.
"""

from pathlib import Path

from repsynth.pipeline.cli import main
from repsynth.toydata import PHONEME_TO_ID, make_toy_corpus

out_dir = Path("demo_output") / "06_pipeline"
out_dir.mkdir(parents=True, exist_ok=True)
make_toy_corpus(out_dir / "corpus", n_utterances=4, seed=1)

# The whole experiment lives in one YAML file. Paths are resolved
# relative to the file, so the directory is relocatable. Step counts are
# cut far below the toy preset defaults to keep this demo under a minute.
config_path = out_dir / "experiment.yaml"
config_path.write_text(
    "manifest: corpus/manifest.jsonl\n"
    "noise_dir: corpus/noise\n"
    "out_dir: out\n"
    "mix_snr_db: 5.0\n"
    "enhancer: spectral_subtraction\n"
    "backend: mock:0\n"
    "layer: layer5\n"
    "preset: toy\n"
    "seed: 0\n"
    "vocoder_steps: 40\n"
    "acoustic_steps: 150\n"
)
print(f"wrote {config_path}:\n{config_path.read_text()}")


def run(*argv):
    print(f"$ repsynth {' '.join(argv)}")
    code = main(list(argv))
    assert code == 0, f"verb failed with exit code {code}"
    print()


# Stage 1: mix each utterance with a deterministic noise clip at 5 dB,
# enhance it, and cache its representation. The report records per-file
# status and achieved SNR; rerunning would hit the cache.
run("prepare-data", "--config", str(config_path))

# Stage 2 and 3: the two models train independently, each holding a lock
# in its output directory and writing a checkpoint plus a loss CSV.
run("train-vocoder", "--config", str(config_path))
run("train-acoustic", "--config", str(config_path))

# Stage 4: phoneme ids through both checkpoints to a waveform. Here the
# durations come from the model's own predictor.
sentence = [PHONEME_TO_ID[s] for s in ["_", "m", "a", "l", "o", "_"]]
run("synthesize",
    "--acoustic", str(out_dir / "out" / "acoustic" / "acoustic_final.ckpt"),
    "--vocoder", str(out_dir / "out" / "vocoder" / "vocoder_final.ckpt"),
    "--phonemes", ",".join(str(i) for i in sentence),
    "--out", str(out_dir / "synthesized.wav"))

# Stage 5: SNR and speaker-similarity tables over the clean, noisy, and
# enhanced conditions, written as a CSV with a summary block.
run("evaluate", "--config", str(config_path))

# Stage 6: train a vocoder per representation layer and compare them on
# resynthesis quality. Two layers keep it quick; a study would sweep all.
run("sweep-layers", "--config", str(config_path), "--layers", "layer2,layer5")

print("artifacts under", out_dir / "out")
for path in sorted((out_dir / "out").rglob("*")):
    if path.is_file():
        print(" ", path.relative_to(out_dir))
