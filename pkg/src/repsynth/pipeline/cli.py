"""Command-line entry point.

Verbs: prepare-data, train-vocoder, train-acoustic, synthesize, evaluate,
sweep-layers. Every verb takes --config <yaml> plus repeatable --set
key=value overrides. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numeric failure. Training verbs hold a lock file in their output
directory so two runs cannot write the same artifacts concurrently.
"""

import argparse
import os
import sys
from pathlib import Path

from ..errors import ConfigError, DataError, NumericError
from ..representation import LayerSpec
from .config import ExperimentConfig, build_backend, build_cache, build_enhancer, load_config, parse_overrides

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class _Lock:
    """Exclusive per-directory lock; stale locks must be removed by hand."""

    def __init__(self, directory: Path):
        directory.mkdir(parents=True, exist_ok=True)
        self.path = directory / ".lock"

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"another run holds the lock {self.path}; remove it if that "
                f"run is no longer alive"
            ) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc_info):
        self.path.unlink(missing_ok=True)
        return False


def _load(args) -> ExperimentConfig:
    return load_config(Path(args.config), parse_overrides(args.set or []))


def _cmd_prepare_data(args) -> int:
    from .orchestrate import prepare_data

    config = _load(args)
    report = prepare_data(config)
    ok = len(report.utterances) - report.failures
    print(
        f"prepared {ok}/{len(report.utterances)} utterances "
        f"({report.cache_hits} cache hits, {report.failures} failures); "
        f"report: {Path(config.out_dir) / 'prepare_report.json'}"
    )
    return EXIT_OK


def _cmd_train_vocoder(args) -> int:
    from ..vocoder import VocoderTrainConfig, train_vocoder
    from .manifest import load_manifest

    config = _load(args)
    out_dir = Path(config.out_dir) / "vocoder"
    with _Lock(out_dir):
        records = load_manifest(config.manifest, check_audio=True)
        backend = build_backend(config)
        train_cfg = VocoderTrainConfig.toy(
            input_dim=backend.dim,
            steps=config.resolved_vocoder_steps(),
            seed=config.seed,
        )
        result = train_vocoder(
            records,
            Path(config.manifest).parent,
            backend,
            config.layer_spec,
            train_cfg,
            out_dir,
            resume_from=Path(args.resume) if args.resume else None,
            cache=build_cache(config),
        )
    print(f"vocoder checkpoint: {result.final_checkpoint}")
    print(f"loss log: {result.loss_log}")
    return EXIT_OK


def _cmd_train_acoustic(args) -> int:
    from ..acoustic import AcousticTrainConfig, train_acoustic
    from .manifest import load_manifest

    config = _load(args)
    out_dir = Path(config.out_dir) / "acoustic"
    with _Lock(out_dir):
        records = load_manifest(config.manifest, check_audio=True)
        backend = build_backend(config)
        train_cfg = AcousticTrainConfig.toy(
            output_dim=backend.dim,
            steps=config.resolved_acoustic_steps(),
            seed=config.seed,
        )
        result = train_acoustic(
            records,
            Path(config.manifest).parent,
            backend,
            config.layer_spec,
            train_cfg,
            out_dir,
            enhancer=build_enhancer(config),
            resume_from=Path(args.resume) if args.resume else None,
            cache=build_cache(config),
        )
    for utt_id, reason in result.rejected:
        print(f"rejected {utt_id}: {reason}", file=sys.stderr)
    print(f"acoustic checkpoint: {result.final_checkpoint}")
    print(f"loss log: {result.loss_log}")
    return EXIT_OK


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(token) for token in text.split(",") if token.strip() != ""]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _cmd_synthesize(args) -> int:
    from ..signal import save_audio
    from .orchestrate import synthesize

    phonemes = _parse_int_list(args.phonemes, "--phonemes")
    durations = _parse_int_list(args.durations, "--durations") if args.durations else None
    wav = synthesize(
        phonemes, Path(args.acoustic), Path(args.vocoder), durations=durations
    )
    save_audio(wav, Path(args.out))
    print(f"wrote {len(wav)} samples ({len(wav) / wav.sample_rate:.2f} s) to {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from ..evaluation import MelAverageEmbedder, evaluate_corpus
    from ..signal import load_audio
    from .manifest import load_manifest
    from .orchestrate import _noise_files, mix_for_record

    config = _load(args)
    records = load_manifest(config.manifest, check_audio=True)
    noise_files = _noise_files(config.noise_dir) if config.noise_dir else None
    enhancer = build_enhancer(config)
    audio_root = Path(config.manifest).parent
    ids, clean_all, noisy_all, enhanced_all = [], [], [], []
    for record in records:
        clean = load_audio(audio_root / record.audio_path)
        ids.append(record.id)
        clean_all.append(clean)
        if noise_files is not None:
            noisy = mix_for_record(
                record, clean, noise_files, config.mix_snr_db, config.seed
            )
            noisy_all.append(noisy)
            enhanced_all.append(enhancer(noisy))
    conditions = {"clean": clean_all}
    if noisy_all:
        conditions["noisy"] = noisy_all
        conditions["enhanced"] = enhanced_all
    report = evaluate_corpus(
        ids,
        conditions,
        metrics=("snr", "speaker_similarity"),
        embedder=MelAverageEmbedder(),
        references=clean_all,
    )
    out = Path(config.out_dir) / "evaluation.csv"
    report.save(out)
    for condition in report.conditions():
        _print_mean_snr(report, condition)
    print(f"report: {out}")
    return EXIT_OK


def _print_mean_snr(report, condition: str) -> None:
    values = report.values(condition, "snr")
    if values:
        mean = sum(values) / len(values)
        print(f"{condition}: mean SNR {mean:.2f} dB over {len(values)} utterances")
    else:
        print(f"{condition}: SNR undefined (no measurable noise floor)")


def _cmd_sweep_layers(args) -> int:
    from .orchestrate import run_layer_sweep

    config = _load(args)
    layers = [LayerSpec.from_tag(tag.strip()) for tag in args.layers.split(",") if tag.strip()]
    with _Lock(Path(config.out_dir)):
        report = run_layer_sweep(config, layers)
    for condition in report.conditions():
        _print_mean_snr(report, condition)
    print(f"report: {Path(config.out_dir) / 'layer_sweep.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repsynth",
        description="Noise-robust text-to-speech on self-supervised representations.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def add_config_args(p):
        p.add_argument("--config", required=True, help="experiment YAML")
        p.add_argument(
            "--set", action="append", metavar="KEY=VALUE",
            help="override a config key (repeatable)",
        )

    p = sub.add_parser("prepare-data", help="mix, enhance, and cache representations")
    add_config_args(p)
    p.set_defaults(func=_cmd_prepare_data)

    p = sub.add_parser("train-vocoder", help="train the representation-to-waveform model")
    add_config_args(p)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=_cmd_train_vocoder)

    p = sub.add_parser("train-acoustic", help="train the text-to-representation model")
    add_config_args(p)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=_cmd_train_acoustic)

    p = sub.add_parser("synthesize", help="phoneme ids to waveform via two checkpoints")
    p.add_argument("--acoustic", required=True, help="acoustic checkpoint path")
    p.add_argument("--vocoder", required=True, help="vocoder checkpoint path")
    p.add_argument("--phonemes", required=True, help="comma-separated phoneme ids")
    p.add_argument("--durations", help="comma-separated frame counts (optional)")
    p.add_argument("--out", required=True, help="output WAV path")
    p.set_defaults(func=_cmd_synthesize)

    p = sub.add_parser("evaluate", help="SNR and similarity tables for the corpus")
    add_config_args(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep-layers", help="compare representation layer choices")
    add_config_args(p)
    p.add_argument(
        "--layers", required=True,
        help="comma-separated layer tags, e.g. layer0,layer5,average",
    )
    p.set_defaults(func=_cmd_sweep_layers)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
