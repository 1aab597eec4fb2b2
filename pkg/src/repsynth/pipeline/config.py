"""Experiment configuration: one YAML file drives every pipeline verb.

Schema (all keys optional unless marked required):

    manifest: path              # required; JSON-lines corpus manifest
    noise_dir: path             # required for prepare-data; directory of WAVs
    out_dir: path               # required; artifact root for this experiment
    mix_snr_db: 5.0             # mixture target in dB
    enhancer: spectral_subtraction   # identity | spectral_subtraction | external:<tool>
    backend: mock:0             # mock:<seed> | torchscript:<path>
    layer: average              # average | layer<K>
    mel_preset: rep_aligned     # log-mel preset for training losses
    preset: toy                 # toy | full model sizes
    seed: 0
    vocoder_steps: null         # null -> preset default
    acoustic_steps: null
    cache_dir: null             # null -> $REPSYNTH_CACHE_DIR or <out_dir>/cache

Paths are resolved relative to the config file's directory.
"""

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

import yaml

from ..enhancement import (
    Enhancer,
    external_enhancer,
    identity_enhancer,
    spectral_subtraction_enhancer,
)
from ..errors import ConfigError, DataError
from ..representation import (
    LayerSpec,
    RepresentationBackend,
    RepresentationCache,
    TorchScriptBackend,
    mock_backend,
)
from ..signal import REP_ALIGNED, DEFAULT_SAMPLE_RATE, SpectralConfig

CACHE_ENV_VAR = "REPSYNTH_CACHE_DIR"
MEL_PRESETS = {"rep_aligned": REP_ALIGNED}
PRESETS = ("toy", "full")
TOY_VOCODER_STEPS = 500
TOY_ACOUSTIC_STEPS = 2000
FULL_VOCODER_STEPS = 800_000
FULL_ACOUSTIC_STEPS = 900_000


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: Path
    out_dir: Path
    noise_dir: Path | None = None
    mix_snr_db: float = 5.0
    enhancer: str = "spectral_subtraction"
    backend: str = "mock:0"
    layer: str = "average"
    mel_preset: str = "rep_aligned"
    preset: str = "toy"
    seed: int = 0
    vocoder_steps: int | None = None
    acoustic_steps: int | None = None
    cache_dir: Path | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {PRESETS}, got {self.preset!r}")
        if self.mel_preset not in MEL_PRESETS:
            raise ConfigError(
                f"mel_preset must be one of {sorted(MEL_PRESETS)}, got {self.mel_preset!r}"
            )
        mel = MEL_PRESETS[self.mel_preset]
        if mel.hop_size * 50 != DEFAULT_SAMPLE_RATE:
            raise ConfigError(
                f"mel preset hop {mel.hop_size} is not aligned with the "
                f"20 ms representation grid at {DEFAULT_SAMPLE_RATE} Hz"
            )
        try:
            LayerSpec.from_tag(self.layer)
        except DataError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def mel_config(self) -> SpectralConfig:
        return MEL_PRESETS[self.mel_preset]

    @property
    def layer_spec(self) -> LayerSpec:
        return LayerSpec.from_tag(self.layer)

    def resolved_vocoder_steps(self) -> int:
        if self.vocoder_steps is not None:
            return self.vocoder_steps
        return TOY_VOCODER_STEPS if self.preset == "toy" else FULL_VOCODER_STEPS

    def resolved_acoustic_steps(self) -> int:
        if self.acoustic_steps is not None:
            return self.acoustic_steps
        return TOY_ACOUSTIC_STEPS if self.preset == "toy" else FULL_ACOUSTIC_STEPS

    def resolved_cache_dir(self) -> Path:
        if self.cache_dir is not None:
            return Path(self.cache_dir)
        env = os.environ.get(CACHE_ENV_VAR)
        if env:
            return Path(env)
        return Path(self.out_dir) / "cache"

    def echo(self) -> dict:
        data = dataclasses.asdict(self)
        for key, value in data.items():
            if isinstance(value, Path):
                data[key] = str(value)
        return data


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_PATH_FIELDS = {"manifest", "out_dir", "noise_dir", "cache_dir"}
_INT_FIELDS = {"seed", "vocoder_steps", "acoustic_steps"}
_FLOAT_FIELDS = {"mix_snr_db"}


def _coerce(key: str, value, base: Path | None):
    if key not in _FIELD_TYPES:
        raise ConfigError(
            f"unknown config key {key!r}; known keys: {sorted(_FIELD_TYPES)}"
        )
    if value is None or (isinstance(value, str) and value.lower() == "null"):
        return None
    if key in _PATH_FIELDS:
        path = Path(value)
        if base is not None and not path.is_absolute():
            path = base / path
        return path
    try:
        if key in _INT_FIELDS:
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} expects a number, got {value!r}") from None
    return str(value)


def load_config(path: Path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a YAML config, apply key=value overrides, resolve paths."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse {path}: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    base = path.parent
    data = {key: _coerce(key, value, base) for key, value in raw.items()}
    for key, value in (overrides or {}).items():
        data[key] = _coerce(key, value, None)
    missing = {"manifest", "out_dir"} - set(k for k, v in data.items() if v is not None)
    if missing:
        raise ConfigError(f"config is missing required keys: {sorted(missing)}")
    return ExperimentConfig(**data)


def save_config(config: ExperimentConfig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(config.echo(), sort_keys=True))
    return path


def parse_overrides(pairs: list[str]) -> dict:
    """``key=value`` strings from the command line into an override dict."""
    overrides = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, _, value = pair.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def build_backend(config: ExperimentConfig) -> RepresentationBackend:
    kind, _, arg = config.backend.partition(":")
    if kind == "mock":
        return mock_backend(seed=int(arg or 0))
    if kind == "torchscript":
        if not arg:
            raise ConfigError("torchscript backend needs a path: torchscript:<path>")
        return TorchScriptBackend(Path(arg))
    raise ConfigError(
        f"unknown backend {config.backend!r}; use mock:<seed> or torchscript:<path>"
    )


def validate_layer_for_backend(spec: LayerSpec, backend: RepresentationBackend) -> LayerSpec:
    if not spec.is_average and spec.layer >= backend.n_layers:
        raise ConfigError(
            f"layer {spec.layer} out of range for backend with {backend.n_layers} layers"
        )
    return spec


def build_enhancer(config: ExperimentConfig) -> Enhancer:
    name, _, arg = config.enhancer.partition(":")
    if name == "identity":
        return identity_enhancer()
    if name == "spectral_subtraction":
        return spectral_subtraction_enhancer()
    if name == "external":
        if not arg:
            raise ConfigError("external enhancer needs a path: external:<tool>")
        return external_enhancer(Path(arg))
    raise ConfigError(
        f"unknown enhancer {config.enhancer!r}; use identity, "
        f"spectral_subtraction, or external:<tool>"
    )


def build_cache(config: ExperimentConfig) -> RepresentationCache:
    return RepresentationCache(config.resolved_cache_dir())


def verify_config_echo(config: ExperimentConfig, echo_path: Path) -> None:
    """Reruns must use the exact config that produced the artifact directory."""
    if not echo_path.exists():
        return
    recorded = json.loads(echo_path.read_text())
    if recorded != config.echo():
        changed = sorted(
            k for k in set(recorded) | set(config.echo())
            if recorded.get(k) != config.echo().get(k)
        )
        raise ConfigError(
            f"config does not match the echo recorded in {echo_path} "
            f"(differing keys: {changed}); use a fresh out_dir for new settings"
        )


def write_config_echo(config: ExperimentConfig, echo_path: Path) -> None:
    echo_path.parent.mkdir(parents=True, exist_ok=True)
    echo_path.write_text(json.dumps(config.echo(), indent=2, sort_keys=True) + "\n")
