"""Measurement harness: SNR and similarity tables, spectrogram figures.

Reports are plain CSVs with one row per (condition, metric, utterance) and
a trailing per-condition summary block, written deterministically so a
rerun on identical inputs is byte-identical. Perceptual quality (MOS-LQO)
comes only through an external-tool adapter; subjective MOS is a human
study and is marked unavailable rather than imitated.
"""

import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ConfigError, DataError
from .signal import (
    REP_ALIGNED,
    SpectralConfig,
    Waveform,
    estimate_snr,
    mel_spectrogram,
    resample,
    save_audio,
)
from .util import atomic_write_bytes

MOS_LQO_RANGE = (1.0, 4.75)
_UNIT_NORM_TOL = 1e-6


@runtime_checkable
class SpeakerEmbedder(Protocol):
    """Maps a waveform to a fixed-dimension unit-norm vector, deterministically."""

    embedder_id: str

    def __call__(self, wav: Waveform) -> np.ndarray: ...


class MelAverageEmbedder:
    """Time-averaged log-mel vector, mean-removed and unit-normalized.

    A stand-in with the right contract shape: deterministic, fixed dimension,
    unit norm. Spectrally flat inputs (for example silence) carry no shape to
    compare, so they map to a fixed reference direction instead of dividing
    by a vanishing norm.
    """

    def __init__(self, config: SpectralConfig = REP_ALIGNED):
        self.config = config
        self.embedder_id = f"mel-average-{config.n_mels}"

    def __call__(self, wav: Waveform) -> np.ndarray:
        mean_mel = mel_spectrogram(wav, self.config).frames.mean(axis=0)
        centered = mean_mel - mean_mel.mean()
        norm = float(np.linalg.norm(centered))
        if norm < 1e-12:
            fallback = np.zeros(self.config.n_mels)
            fallback[0] = 1.0
            return fallback
        return centered / norm


def _checked_embedding(wav: Waveform, embedder: SpeakerEmbedder) -> np.ndarray:
    vec = np.asarray(embedder(wav), dtype=np.float64)
    if vec.ndim != 1:
        raise DataError(f"embedder returned shape {vec.shape}, expected a vector")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > _UNIT_NORM_TOL:
        raise DataError(
            f"embedder {embedder.embedder_id} violated the unit-norm contract "
            f"(norm {norm})"
        )
    return vec


def speaker_similarity(a: Waveform, b: Waveform, embedder: SpeakerEmbedder) -> float:
    """Cosine similarity of the two speaker embeddings, in [-1, 1]."""
    if len(a) < 1 or len(b) < 1:
        raise DataError("cannot embed an empty waveform")
    cosine = float(np.dot(_checked_embedding(a, embedder), _checked_embedding(b, embedder)))
    return max(-1.0, min(1.0, cosine))


@dataclass(frozen=True)
class EvalRow:
    condition: str
    metric: str
    utterance_id: str
    value: float


@dataclass
class EvalReport:
    rows: list[EvalRow]

    def values(self, condition: str, metric: str) -> list[float]:
        return [
            r.value for r in self.rows if r.condition == condition and r.metric == metric
        ]

    def mean(self, condition: str, metric: str) -> float:
        values = self.values(condition, metric)
        if not values:
            raise DataError(f"no rows for condition {condition!r}, metric {metric!r}")
        return sum(values) / len(values)

    def conditions(self) -> list[str]:
        return sorted({r.condition for r in self.rows})

    def metrics(self) -> list[str]:
        return sorted({r.metric for r in self.rows})

    def to_csv_text(self) -> str:
        lines = ["condition,metric,utterance_id,value"]
        for r in self.rows:
            lines.append(f"{r.condition},{r.metric},{r.utterance_id},{format(r.value, '.17g')}")
        lines.append("# summary")
        lines.append("condition,metric,mean,count")
        for condition in self.conditions():
            for metric in self.metrics():
                values = self.values(condition, metric)
                if values:
                    mean = format(sum(values) / len(values), ".17g")
                    lines.append(f"{condition},{metric},{mean},{len(values)}")
            lines.append(f"{condition},mos,unavailable,0")
        return "\n".join(lines) + "\n"

    def save(self, path: Path) -> Path:
        path = Path(path)
        atomic_write_bytes(path, self.to_csv_text().encode())
        return path


def evaluate_corpus(
    utterance_ids: Sequence[str],
    conditions: dict[str, Sequence[Waveform]],
    metrics: Sequence[str] = ("snr",),
    embedder: SpeakerEmbedder | None = None,
    references: Sequence[Waveform] | None = None,
    quality_fn: Callable[[Waveform, Waveform], float] | None = None,
) -> EvalReport:
    """One row per (condition, metric, utterance), deterministically ordered.

    Metrics: "snr" (reference-free; utterances whose energy split is
    undecidable are omitted from that metric), "speaker_similarity" and
    "mos_lqo" (both against aligned ``references``). Conditions are visited
    in sorted label order; utterances in the order given.
    """
    if not utterance_ids:
        raise DataError("no utterances to evaluate")
    if not conditions:
        raise DataError("no conditions to evaluate")
    if not metrics:
        raise DataError("no metrics selected")
    known = {"snr", "speaker_similarity", "mos_lqo"}
    unknown = set(metrics) - known
    if unknown:
        raise ConfigError(f"unknown metrics {sorted(unknown)}; available: {sorted(known)}")
    if "speaker_similarity" in metrics and (embedder is None or references is None):
        raise ConfigError("speaker_similarity needs an embedder and reference audio")
    if "mos_lqo" in metrics and (quality_fn is None or references is None):
        raise ConfigError("mos_lqo needs a quality function and reference audio")
    if references is not None and len(references) != len(utterance_ids):
        raise DataError(
            f"{len(references)} references for {len(utterance_ids)} utterances"
        )
    for label, audio in conditions.items():
        if len(audio) != len(utterance_ids):
            raise DataError(
                f"condition {label!r} has {len(audio)} clips for "
                f"{len(utterance_ids)} utterances"
            )
    rows = []
    for label in sorted(conditions):
        audio = conditions[label]
        for metric in sorted(set(metrics)):
            for i, (utt_id, wav) in enumerate(zip(utterance_ids, audio)):
                if metric == "snr":
                    value = estimate_snr(wav)
                    if value is None:
                        continue
                elif metric == "speaker_similarity":
                    value = speaker_similarity(references[i], wav, embedder)
                else:
                    value = quality_fn(references[i], wav)
                rows.append(EvalRow(label, metric, utt_id, float(value)))
    return EvalReport(rows)


def spectrogram_figure(
    labeled: Sequence[tuple[str, Waveform]],
    out_path: Path,
    config: SpectralConfig = REP_ALIGNED,
) -> Path:
    """Stacked log-mel panels on a shared color scale, written as a PNG."""
    if not labeled:
        raise DataError("need at least one labeled waveform")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    mels = [mel_spectrogram(wav, config).frames for _, wav in labeled]
    vmin = min(float(m.min()) for m in mels)
    vmax = max(float(m.max()) for m in mels)
    if vmax <= vmin:
        vmax = vmin + 1.0
    fig, axes = plt.subplots(
        len(labeled), 1, figsize=(8, 2.2 * len(labeled)), squeeze=False
    )
    for ax, (label, _), mel in zip(axes[:, 0], labeled, mels):
        image = ax.imshow(
            mel.T, origin="lower", aspect="auto", vmin=vmin, vmax=vmax, cmap="magma"
        )
        ax.set_title(label)
        ax.set_ylabel("mel band")
    axes[-1, 0].set_xlabel("frame")
    fig.colorbar(image, ax=axes[:, 0], label="log energy")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out_path, dpi=100, format="png")
    except OSError as exc:
        raise DataError(f"could not write figure to {out_path}: {exc}") from exc
    finally:
        plt.close(fig)
    return out_path


@dataclass(frozen=True)
class ExternalQualityConfig:
    """Subprocess contract: ``<tool> <reference.wav> <test.wav>`` prints a
    MOS-LQO scalar on its last stdout line and exits 0."""

    tool: Path
    tool_rate: int = 16000
    timeout_s: float = 300.0


def external_quality_adapter(
    config: ExternalQualityConfig,
) -> Callable[[Waveform, Waveform], float]:
    tool = Path(config.tool)
    if not tool.exists():
        raise ConfigError(f"quality tool not found: {tool}")

    def mos_lqo(reference: Waveform, test: Waveform) -> float:
        with tempfile.TemporaryDirectory(prefix="quality_") as td:
            ref_path = Path(td) / "reference.wav"
            test_path = Path(td) / "test.wav"
            save_audio(resample(reference, config.tool_rate), ref_path)
            save_audio(resample(test, config.tool_rate), test_path)
            proc = subprocess.run(
                [str(tool), str(ref_path), str(test_path)],
                capture_output=True,
                text=True,
                timeout=config.timeout_s,
            )
        if proc.returncode != 0:
            raise DataError(
                f"quality tool exited {proc.returncode}: {proc.stderr.strip()[:500]}"
            )
        lines = [line for line in proc.stdout.strip().splitlines() if line.strip()]
        if not lines:
            raise DataError("quality tool produced no output")
        try:
            score = float(lines[-1].strip())
        except ValueError:
            raise DataError(
                f"could not parse a MOS-LQO scalar from {lines[-1]!r}"
            ) from None
        low, high = MOS_LQO_RANGE
        if not (low <= score <= high):
            raise DataError(
                f"MOS-LQO {score} outside the defined range [{low}, {high}]"
            )
        return score

    return mos_lqo
