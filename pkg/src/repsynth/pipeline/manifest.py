"""Utterance manifests: JSON-lines records binding audio to annotations."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import DataError


@dataclass
class UtteranceRecord:
    """One corpus entry.

    ``audio_path`` is stored relative to the manifest file. ``durations``
    are integer counts on the 20 ms representation grid; the optional
    ``pitch`` / ``energy`` targets are phoneme-level values in [0, 1].
    """

    id: str
    audio_path: str
    transcript: str
    phonemes: list[int]
    durations: list[int] | None = None
    pitch: list[float] | None = None
    energy: list[float] | None = None
    speaker: str = "spk0"
    split: str = "train"

    def __post_init__(self):
        for name in ("durations", "pitch", "energy"):
            value = getattr(self, name)
            if value is not None and len(value) != len(self.phonemes):
                raise DataError(
                    f"utterance {self.id}: {name} has {len(value)} entries "
                    f"for {len(self.phonemes)} phonemes"
                )
        if self.durations is not None and any(d < 0 for d in self.durations):
            raise DataError(f"utterance {self.id}: negative duration")


def save_manifest(records: list[UtteranceRecord], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    seen = set()
    for rec in records:
        if rec.id in seen:
            raise DataError(f"duplicate utterance id {rec.id!r}")
        seen.add(rec.id)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")


def load_manifest(path: Path, check_audio: bool = True) -> list[UtteranceRecord]:
    """Parse a JSONL manifest; verifies ids are unique and audio files exist."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"manifest not found: {path}")
    records = []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = UtteranceRecord(**json.loads(line))
            except (json.JSONDecodeError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: bad manifest line: {exc}") from exc
            if rec.id in seen:
                raise DataError(f"{path}:{lineno}: duplicate utterance id {rec.id!r}")
            seen.add(rec.id)
            if check_audio and not resolve_audio(path, rec).exists():
                raise DataError(f"{path}:{lineno}: audio missing: {rec.audio_path}")
            records.append(rec)
    return records


def resolve_audio(manifest_path: Path, record: UtteranceRecord) -> Path:
    return (Path(manifest_path).parent / record.audio_path).resolve()
