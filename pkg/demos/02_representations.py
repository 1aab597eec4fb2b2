"""
Self-supervised speech representations and the extraction cache
===============================================================

Shows the frame-rate contract of the representation interface, the
difference between single-layer and averaged extraction, the binary
file format, and the content-addressed disk cache.
"""

from pathlib import Path

from repsynth.representation import (
    LayerSpec,
    RepresentationCache,
    extract,
    load_representation,
    mock_backend,
    persist_representation,
    rep_frame_count,
)
from repsynth.toydata import make_utterance

out_dir = Path("demo_output") / "02_representations"
out_dir.mkdir(parents=True, exist_ok=True)

# The mock backend stands in for a pretrained speech encoder: it is
# deterministic in (audio, seed) and exposes the same interface, which is
# enough to exercise every downstream component without model weights.
backend = mock_backend(seed=0)
print(f"backend '{backend.backend_id}': {backend.n_layers} layers, "
      f"{backend.dim}-dim frames")

wav = make_utterance(["m", "e", "l", "o", "n"], [5, 7, 5, 7, 6], seed=9)

# One representation frame per 20 ms of audio. rep_frame_count states the
# law; extract must agree with it for any clip length.
expected = rep_frame_count(len(wav), wav.sample_rate)
seq = extract(wav, LayerSpec.single(5), backend)
print(f"{len(wav)} samples -> {seq.frames.shape[0]} frames of dim "
      f"{seq.frames.shape[1]} (law says {expected})")

# Layer choice is part of the request: a single encoder layer or the mean
# over all of them. Specs serialize to short tags used in checkpoint and
# cache keys, so models trained on different layers can never be mixed up.
averaged = extract(wav, LayerSpec.average_all(), backend)
print(f"tags: {LayerSpec.single(5).tag!r} vs {LayerSpec.average_all().tag!r}; "
      f"frame matrices differ: {(averaged.frames != seq.frames).any()}")

# Sequences round-trip through a little-endian binary container so that
# cached extractions are identical across runs and platforms.
rep_path = out_dir / "melon.rep"
persist_representation(seq, rep_path)
again = load_representation(rep_path, expected_dim=backend.dim)
print(f"file round trip exact: {(again.frames == seq.frames).all()} "
      f"({rep_path.stat().st_size} bytes)")

# The cache keys on (audio content, backend id, layer spec). Asking twice
# hits the disk copy the second time; changing the layer misses again.
cache = RepresentationCache(out_dir / "cache")
_, hit_first = cache.get_or_extract(wav, LayerSpec.single(5), backend)
_, hit_second = cache.get_or_extract(wav, LayerSpec.single(5), backend)
_, hit_other = cache.get_or_extract(wav, LayerSpec.single(6), backend)
print(f"cache hits: first {hit_first}, second {hit_second}, "
      f"different layer {hit_other}; stats hits={cache.hits} misses={cache.misses}")
