"""The three pipeline procedures: data preparation, synthesis, layer sweep.

Preparation mixes each clean utterance with seeded noise at the target SNR,
enhances it, and populates the representation cache. Synthesis chains an
acoustic checkpoint into a vocoder checkpoint after checking they were
trained against the same representation space. The layer sweep trains (or
reuses) one toy vocoder per layer choice and emits a comparative report.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..acoustic import AcousticConfig, AcousticModel, PhonemeSequence, predict_representation
from ..errors import ConfigError, DataError, RepsynthError
from ..evaluation import EvalReport, MelAverageEmbedder, evaluate_corpus
from ..representation import LayerSpec, RepresentationCache
from ..signal import Waveform, load_audio, mix_at_snr, residual_snr
from ..util import content_hash
from ..vocoder import Generator, GeneratorConfig, VocoderTrainConfig, generate, train_vocoder
from .checkpoints import load_checkpoint
from .config import (
    ExperimentConfig,
    build_backend,
    build_cache,
    build_enhancer,
    validate_layer_for_backend,
    verify_config_echo,
    write_config_echo,
)
from .manifest import UtteranceRecord, load_manifest

FAILURE_BUDGET = 0.10


@dataclass
class UtteranceReport:
    id: str
    status: str
    achieved_snr_db: float | None = None
    cache_hit: bool = False
    error: str | None = None


@dataclass
class PrepareReport:
    utterances: list[UtteranceReport]
    noise_clips: int
    cache_dir: str

    @property
    def failures(self) -> int:
        return sum(1 for u in self.utterances if u.status == "failed")

    @property
    def cache_hits(self) -> int:
        return sum(1 for u in self.utterances if u.cache_hit)

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "noise_clips": self.noise_clips,
            "cache_dir": self.cache_dir,
            "failures": self.failures,
            "cache_hits": self.cache_hits,
            "utterances": [dataclasses.asdict(u) for u in self.utterances],
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def _noise_files(noise_dir: Path) -> list[Path]:
    files = sorted(Path(noise_dir).glob("*.wav"))
    if not files:
        raise DataError(f"no noise clips found in {noise_dir}")
    return files


def _utterance_seed(global_seed: int, utterance_id: str) -> int:
    return int(content_hash(f"{global_seed}:{utterance_id}".encode())[:8], 16)


def mix_for_record(
    record: UtteranceRecord,
    clean: Waveform,
    noise_files: list[Path],
    mix_snr_db: float,
    seed: int,
) -> Waveform:
    """The mixture is fully determined by (seed, utterance id, noise set)."""
    utt_seed = _utterance_seed(seed, record.id)
    noise = load_audio(noise_files[utt_seed % len(noise_files)])
    return mix_at_snr(clean, noise, mix_snr_db, seed=utt_seed)


def prepare_data(config: ExperimentConfig) -> PrepareReport:
    """Mix, enhance, and cache representations for every utterance.

    Per-utterance failures are recorded rather than fatal; the run fails
    only when more than 10% of utterances fail. Reruns verify the config
    echo and hit the cache instead of recomputing.
    """
    if config.noise_dir is None:
        raise ConfigError("prepare_data needs noise_dir in the config")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    verify_config_echo(config, out_dir / "config_echo.json")
    records = load_manifest(config.manifest, check_audio=True)
    noise_files = _noise_files(config.noise_dir)
    backend = build_backend(config)
    layer_spec = validate_layer_for_backend(config.layer_spec, backend)
    enhancer = build_enhancer(config)
    cache = build_cache(config)
    audio_root = Path(config.manifest).parent

    reports = []
    for record in records:
        try:
            clean = load_audio(audio_root / record.audio_path)
            noisy = mix_for_record(
                record, clean, noise_files, config.mix_snr_db, config.seed
            )
            achieved = residual_snr(noisy, clean)
            enhanced = enhancer(noisy)
            _, hit = cache.get_or_extract(enhanced, layer_spec, backend)
            reports.append(
                UtteranceReport(record.id, "ok", achieved_snr_db=achieved, cache_hit=hit)
            )
        except RepsynthError as exc:
            reports.append(UtteranceReport(record.id, "failed", error=str(exc)))
    report = PrepareReport(reports, len(noise_files), str(cache.root))
    report.save(out_dir / "prepare_report.json")
    write_config_echo(config, out_dir / "config_echo.json")
    if report.failures > FAILURE_BUDGET * len(records):
        raise DataError(
            f"{report.failures} of {len(records)} utterances failed preparation "
            f"(budget {FAILURE_BUDGET:.0%}); see {out_dir / 'prepare_report.json'}"
        )
    return report


def _load_acoustic(path: Path) -> tuple[AcousticModel, str, dict]:
    payload = load_checkpoint(path, expect_kind="acoustic")
    model = AcousticModel(AcousticConfig(**payload["config"]["model"]))
    model.load_state_dict(payload["model"]["model"])
    model.eval()
    return model, payload["layer_tag"], payload


def _load_generator(path: Path) -> tuple[Generator, str, dict]:
    payload = load_checkpoint(path, expect_kind="vocoder")
    generator = Generator(GeneratorConfig(**payload["config"]["generator"]))
    generator.load_state_dict(payload["model"]["generator"])
    generator.eval()
    return generator, payload["layer_tag"], payload


def synthesize(
    phonemes: list[int],
    acoustic_checkpoint: Path,
    vocoder_checkpoint: Path,
    durations: list[int] | None = None,
) -> Waveform:
    """Text-side phonemes through both models into a waveform.

    The checkpoints must agree on the representation space: equal layer
    tags and acoustic output dim == vocoder input dim. Output length is
    exactly (sum of predicted or supplied durations) x 480 samples.
    """
    acoustic, acoustic_tag, _ = _load_acoustic(acoustic_checkpoint)
    generator, vocoder_tag, _ = _load_generator(vocoder_checkpoint)
    if acoustic_tag != vocoder_tag:
        raise ConfigError(
            f"checkpoint layer specs differ: acoustic was trained against "
            f"{acoustic_tag!r} but the vocoder against {vocoder_tag!r}; "
            f"synthesis needs one shared representation space"
        )
    out_dim = acoustic.config.output_dim
    in_dim = generator.config.input_dim
    if out_dim != in_dim:
        raise ConfigError(
            f"acoustic output dim {out_dim} does not match vocoder input dim {in_dim}"
        )
    seq = PhonemeSequence(phonemes, durations)
    rep, _ = predict_representation(seq, acoustic)
    return generate(rep, generator)


def resynthesize(
    rep_frames, vocoder_checkpoint: Path
) -> Waveform:
    """Cached or freshly extracted representation frames through the vocoder."""
    from ..representation import RepresentationSequence

    generator, _, _ = _load_generator(vocoder_checkpoint)
    if not isinstance(rep_frames, RepresentationSequence):
        rep_frames = RepresentationSequence(rep_frames)
    return generate(rep_frames, generator)


def run_layer_sweep(config: ExperimentConfig, layers: list[LayerSpec]) -> EvalReport:
    """Per-layer toy vocoder training plus resynthesis metrics in one table.

    For each layer spec a vocoder is trained (or reloaded when its final
    checkpoint already exists) on the prepared corpus, every utterance is
    resynthesized from its cached representation, and the report carries
    one condition per layer tag. Reruns reuse checkpoints, so the report
    regenerates byte-identically.
    """
    if not layers:
        raise DataError("empty layer list")
    out_dir = Path(config.out_dir)
    records = load_manifest(config.manifest, check_audio=True)
    backend = build_backend(config)
    enhancer = build_enhancer(config)
    cache = build_cache(config)
    audio_root = Path(config.manifest).parent
    noise_files = _noise_files(config.noise_dir) if config.noise_dir else None

    utterance_ids = [r.id for r in records]
    references = []
    enhanced_all = []
    for record in records:
        clean = load_audio(audio_root / record.audio_path)
        references.append(clean)
        if noise_files is not None:
            noisy = mix_for_record(
                record, clean, noise_files, config.mix_snr_db, config.seed
            )
            enhanced_all.append(enhancer(noisy))
        else:
            enhanced_all.append(clean)

    conditions: dict[str, list[Waveform]] = {}
    for spec in layers:
        validate_layer_for_backend(spec, backend)
        layer_dir = out_dir / f"sweep_{spec.tag}"
        final = layer_dir / "vocoder_final.ckpt"
        if not final.exists():
            train_cfg = VocoderTrainConfig.toy(
                input_dim=backend.dim,
                steps=config.resolved_vocoder_steps(),
                seed=config.seed,
            )
            train_vocoder(
                records, audio_root, backend, spec, train_cfg, layer_dir, cache=cache
            )
        generator, _, _ = _load_generator(final)
        synthesized = []
        for wav in enhanced_all:
            rep, _ = cache.get_or_extract(wav, spec, backend)
            synthesized.append(generate(rep, generator))
        conditions[f"rep-{spec.tag}"] = synthesized

    report = evaluate_corpus(
        utterance_ids,
        conditions,
        metrics=("snr", "speaker_similarity"),
        embedder=MelAverageEmbedder(),
        references=references,
    )
    report.save(out_dir / "layer_sweep.csv")
    return report
