"""Configuration, manifests, orchestration, and persistence."""

from .checkpoints import load_checkpoint, save_checkpoint
from .config import (
    CACHE_ENV_VAR,
    ExperimentConfig,
    build_backend,
    build_cache,
    build_enhancer,
    load_config,
    parse_overrides,
    save_config,
)
from .manifest import UtteranceRecord, load_manifest, resolve_audio, save_manifest
from .orchestrate import (
    PrepareReport,
    UtteranceReport,
    prepare_data,
    resynthesize,
    run_layer_sweep,
    synthesize,
)

__all__ = [
    "CACHE_ENV_VAR",
    "ExperimentConfig",
    "PrepareReport",
    "UtteranceRecord",
    "UtteranceReport",
    "build_backend",
    "build_cache",
    "build_enhancer",
    "load_checkpoint",
    "load_config",
    "load_manifest",
    "parse_overrides",
    "prepare_data",
    "resolve_audio",
    "resynthesize",
    "run_layer_sweep",
    "save_checkpoint",
    "save_config",
    "save_manifest",
    "synthesize",
]
