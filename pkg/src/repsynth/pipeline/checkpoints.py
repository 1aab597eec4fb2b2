"""Self-describing checkpoint containers for both trainable models.

A checkpoint carries everything needed to resume training bit-for-bit:
model and optimizer tensors, scheduler state, the RNG states of both
random sources, the step count, a JSON-safe echo of the config that
produced it, and the representation layer tag used to stamp model
compatibility at synthesis time.
"""

import io
from pathlib import Path
from typing import Any

import torch

from ..errors import ConfigError, DataError
from ..util import atomic_write_bytes

FORMAT_NAME = "repsynth-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(
    path: Path,
    kind: str,
    step: int,
    layer_tag: str,
    config_echo: dict,
    model_state: dict,
    optimizer_state: dict | None = None,
    scheduler_state: dict | None = None,
    rng_state: dict | None = None,
    loss_history: list | None = None,
    extra: dict | None = None,
) -> None:
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": kind,
        "step": int(step),
        "layer_tag": layer_tag,
        "config": config_echo,
        "model": model_state,
        "optimizer": optimizer_state,
        "scheduler": scheduler_state,
        "rng": rng_state,
        "loss_history": loss_history or [],
        "extra": extra or {},
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    atomic_write_bytes(Path(path), buf.getvalue())


def load_checkpoint(path: Path, expect_kind: str | None = None) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"checkpoint not found: {path}")
    try:
        # we only load our own containers, which hold plain python values
        # and tensors, so the unrestricted unpickler is appropriate here
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise DataError(f"corrupt checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise DataError(f"{path} is not a {FORMAT_NAME} container")
    if payload.get("version") != FORMAT_VERSION:
        raise ConfigError(
            f"checkpoint version mismatch in {path}: "
            f"found {payload.get('version')}, supported {FORMAT_VERSION}"
        )
    if expect_kind is not None and payload.get("kind") != expect_kind:
        raise ConfigError(
            f"checkpoint kind mismatch in {path}: "
            f"expected {expect_kind!r}, found {payload.get('kind')!r}"
        )
    return payload


def capture_rng(np_rng) -> dict:
    """Snapshot both random sources for exact resume."""
    return {
        "torch": torch.get_rng_state(),
        "numpy": np_rng.bit_generator.state,
    }


def restore_rng(state: dict, np_rng) -> None:
    torch.set_rng_state(state["torch"])
    np_rng.bit_generator.state = state["numpy"]
