"""Teacher-forced training of the text-to-representation model.

Targets come from (optionally enhanced) audio run through the frozen
representation backend; ground-truth durations expand the phoneme states
so predicted and target frame counts always agree. The optimizer follows
the inverse-square-root warmup schedule; examples are visited one at a
time with gradient accumulation standing in for batching.
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..enhancement import Enhancer
from ..errors import ConfigError, DataError, NumericError
from ..pipeline.checkpoints import capture_rng, load_checkpoint, restore_rng, save_checkpoint
from ..pipeline.manifest import UtteranceRecord
from ..representation import LayerSpec, RepresentationBackend, RepresentationCache, extract
from ..signal import load_audio
from ..util import atomic_write_bytes
from .features import (
    frame_energy,
    normalized_pitch,
    phoneme_level_average,
    reconcile_durations,
    uniform_durations,
)
from .model import AcousticConfig, AcousticModel, PhonemeSequence, VarianceOutputs

LOSS_COLUMNS = ("step", "rep_l1", "dur_mse", "pitch_mse", "energy_mse", "total")


@dataclass(frozen=True)
class AcousticLossBreakdown:
    rep_l1: float
    dur_mse: float
    pitch_mse: float
    energy_mse: float
    total: float

    def __post_init__(self):
        import math

        values = (self.rep_l1, self.dur_mse, self.pitch_mse, self.energy_mse, self.total)
        if not all(math.isfinite(v) for v in values):
            raise NumericError(f"non-finite loss component in {values}")
        if any(v < 0 for v in values):
            raise NumericError(f"negative loss component in {values}")
        if self.total != self.rep_l1 + self.dur_mse + self.pitch_mse + self.energy_mse:
            raise NumericError("total does not equal the sum of its components")

    def as_row(self) -> dict[str, float]:
        return {
            "rep_l1": self.rep_l1,
            "dur_mse": self.dur_mse,
            "pitch_mse": self.pitch_mse,
            "energy_mse": self.energy_mse,
            "total": self.total,
        }


def log_duration_targets(durations: list[int] | torch.Tensor) -> torch.Tensor:
    """log of durations with a 0.5-frame floor so zero durations stay finite."""
    d = torch.as_tensor(durations, dtype=torch.float64)
    return torch.log(torch.clamp(d, min=0.5))


def acoustic_loss(
    pred_rep: torch.Tensor,
    target_rep: torch.Tensor,
    predictions: VarianceOutputs,
    duration_targets: list[int] | torch.Tensor,
    pitch_targets: torch.Tensor,
    energy_targets: torch.Tensor,
) -> tuple[torch.Tensor, AcousticLossBreakdown]:
    """L1 on representations plus MSE on log-duration, pitch, and energy.

    Unit weights. Returns the differentiable total and a float breakdown.
    """
    pred_rep = torch.as_tensor(pred_rep)
    target_rep = torch.as_tensor(target_rep)
    if pred_rep.shape != target_rep.shape:
        raise DataError(
            f"predicted frames {tuple(pred_rep.shape)} do not match "
            f"target frames {tuple(target_rep.shape)}"
        )
    log_dur_t = log_duration_targets(duration_targets).to(pred_rep.dtype)
    pitch_t = torch.as_tensor(pitch_targets, dtype=pred_rep.dtype)
    energy_t = torch.as_tensor(energy_targets, dtype=pred_rep.dtype)
    for name, pred, target in (
        ("duration", predictions.log_duration_pred, log_dur_t),
        ("pitch", predictions.pitch_pred, pitch_t),
        ("energy", predictions.energy_pred, energy_t),
    ):
        if pred.shape != target.shape:
            raise DataError(f"{name} prediction/target lengths differ")
    rep_l1 = torch.mean(torch.abs(pred_rep - target_rep))
    dur_mse = torch.mean((predictions.log_duration_pred - log_dur_t) ** 2)
    pitch_mse = torch.mean((predictions.pitch_pred - pitch_t) ** 2)
    energy_mse = torch.mean((predictions.energy_pred - energy_t) ** 2)
    total = rep_l1 + dur_mse + pitch_mse + energy_mse
    parts = (
        float(rep_l1.detach()),
        float(dur_mse.detach()),
        float(pitch_mse.detach()),
        float(energy_mse.detach()),
    )
    return total, AcousticLossBreakdown(*parts, total=sum(parts))


@dataclass(frozen=True)
class AcousticTrainConfig:
    model: AcousticConfig = field(default_factory=AcousticConfig)
    steps: int = 900_000
    warmup_steps: int = 4000
    lr_scale: float = 1.0
    adam_betas: tuple[float, float] = (0.9, 0.98)
    grad_accum: int = 1
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.steps < 0 or self.warmup_steps < 1 or self.grad_accum < 1:
            raise ConfigError("steps >= 0, warmup_steps >= 1, grad_accum >= 1 required")

    @classmethod
    def toy(cls, output_dim: int = 768, steps: int = 2000, seed: int = 0) -> "AcousticTrainConfig":
        return cls(
            model=AcousticConfig.toy(output_dim=output_dim),
            steps=steps,
            warmup_steps=200,
            lr_scale=0.5,
            seed=seed,
        )

    def echo(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class AcousticExample:
    utterance_id: str
    seq: PhonemeSequence
    target_rep: np.ndarray


@dataclass
class AcousticTrainResult:
    final_checkpoint: Path
    loss_log: Path
    history: list[AcousticLossBreakdown]
    checkpoints: list[Path]
    rejected: list[tuple[str, str]]


def build_acoustic_examples(
    records: list[UtteranceRecord],
    audio_root: Path,
    backend: RepresentationBackend,
    layer_spec: LayerSpec,
    enhancer: Enhancer | None = None,
    cache: RepresentationCache | None = None,
) -> tuple[list[AcousticExample], list[tuple[str, str]]]:
    """Training examples with reconciled durations and prosody targets.

    Returns (examples, rejected) where rejected pairs utterance ids with a
    reason. Utterances whose durations cannot be reconciled to the target
    frame count are rejected, not fatal.
    """
    if not records:
        raise DataError("empty training dataset")
    examples, rejected = [], []
    for rec in records:
        wav = load_audio(Path(audio_root) / rec.audio_path)
        enhanced = enhancer(wav) if enhancer is not None else wav
        if cache is not None:
            seq_rep, _ = cache.get_or_extract(enhanced, layer_spec, backend)
        else:
            seq_rep = extract(enhanced, layer_spec, backend)
        n_frames = seq_rep.n_frames
        durations = rec.durations or uniform_durations(len(rec.phonemes), n_frames)
        try:
            durations = reconcile_durations(durations, n_frames)
        except DataError as exc:
            rejected.append((rec.id, str(exc)))
            continue
        pitch = rec.pitch or list(phoneme_level_average(normalized_pitch(enhanced), durations))
        energy = rec.energy or list(phoneme_level_average(frame_energy(enhanced), durations))
        examples.append(
            AcousticExample(
                rec.id,
                PhonemeSequence(rec.phonemes, durations, pitch, energy),
                seq_rep.frames,
            )
        )
    return examples, rejected


def _noam_factor(step: int, warmup: int) -> float:
    step = max(step, 1)
    return min(step**-0.5, step * warmup**-1.5)


class AcousticTrainer:
    def __init__(
        self,
        examples: list[AcousticExample],
        config: AcousticTrainConfig,
        layer_tag: str,
        out_dir: Path,
    ):
        if not examples:
            raise DataError("empty training dataset")
        dims = {e.target_rep.shape[1] for e in examples}
        if dims != {config.model.output_dim}:
            raise DataError(
                f"representation dims {sorted(dims)} do not match "
                f"model output_dim {config.model.output_dim}"
            )
        for e in examples:
            if max(e.seq.ids) >= config.model.vocab_size:
                raise DataError(
                    f"utterance {e.utterance_id} uses phoneme id {max(e.seq.ids)} "
                    f">= vocab_size {config.model.vocab_size}"
                )
        self.examples = examples
        self.config = config
        self.layer_tag = layer_tag
        self.out_dir = Path(out_dir)
        torch.manual_seed(config.seed)
        self.model = AcousticModel(config.model)
        peak = config.lr_scale * config.model.hidden_dim**-0.5
        self.optimizer = torch.optim.Adam(
            self.model.parameters(), lr=peak, betas=config.adam_betas, eps=1e-9
        )
        self.scheduler = torch.optim.lr_scheduler.LambdaLR(
            self.optimizer, lambda s: _noam_factor(s + 1, config.warmup_steps)
        )
        self.rng = np.random.default_rng(config.seed)
        self.step = 0
        self.history: list[AcousticLossBreakdown] = []

    def train_step(self) -> AcousticLossBreakdown:
        self.model.train()
        self.optimizer.zero_grad()
        sums = np.zeros(4)
        try:
            for _ in range(self.config.grad_accum):
                example = self.examples[int(self.rng.integers(len(self.examples)))]
                rep, variances = self.model(example.seq)
                total, parts = acoustic_loss(
                    rep,
                    torch.from_numpy(example.target_rep),
                    variances,
                    example.seq.durations,
                    torch.tensor(example.seq.pitch),
                    torch.tensor(example.seq.energy),
                )
                (total / self.config.grad_accum).backward()
                sums += (parts.rep_l1, parts.dur_mse, parts.pitch_mse, parts.energy_mse)
            means = sums / self.config.grad_accum
            breakdown = AcousticLossBreakdown(*means, total=float(means.sum()))
        except NumericError as exc:
            snapshot = self.out_dir / f"diagnostic_step{self.step + 1:06d}.ckpt"
            self.out_dir.mkdir(parents=True, exist_ok=True)
            self.save(snapshot)
            raise NumericError(
                f"non-finite loss at step {self.step + 1} ({exc}); "
                f"state snapshot written to {snapshot}"
            ) from None
        self.optimizer.step()
        self.scheduler.step()
        self.step += 1
        self.history.append(breakdown)
        return breakdown

    def save(self, path: Path) -> None:
        save_checkpoint(
            path,
            kind="acoustic",
            step=self.step,
            layer_tag=self.layer_tag,
            config_echo=self.config.echo(),
            model_state={"model": self.model.state_dict()},
            optimizer_state={"optimizer": self.optimizer.state_dict()},
            scheduler_state={"scheduler": self.scheduler.state_dict()},
            rng_state=capture_rng(self.rng),
            loss_history=[{"step": i + 1, **b.as_row()} for i, b in enumerate(self.history)],
        )

    @classmethod
    def resume(
        cls,
        checkpoint_path: Path,
        examples: list[AcousticExample],
        config: AcousticTrainConfig,
        out_dir: Path,
    ) -> "AcousticTrainer":
        payload = load_checkpoint(checkpoint_path, expect_kind="acoustic")
        if payload["config"]["model"] != config.echo()["model"]:
            raise ConfigError(
                "checkpoint model config does not match the requested one: "
                f"{payload['config']['model']} vs {config.echo()['model']}"
            )
        trainer = cls(examples, config, payload["layer_tag"], out_dir)
        trainer.model.load_state_dict(payload["model"]["model"])
        trainer.optimizer.load_state_dict(payload["optimizer"]["optimizer"])
        trainer.scheduler.load_state_dict(payload["scheduler"]["scheduler"])
        restore_rng(payload["rng"], trainer.rng)
        trainer.step = payload["step"]
        trainer.history = [
            AcousticLossBreakdown(
                row["rep_l1"], row["dur_mse"], row["pitch_mse"], row["energy_mse"], row["total"]
            )
            for row in payload["loss_history"]
        ]
        return trainer


def write_loss_log(path: Path, history: list[AcousticLossBreakdown]) -> None:
    lines = [",".join(LOSS_COLUMNS)]
    for i, breakdown in enumerate(history):
        row = {"step": i + 1, **breakdown.as_row()}
        lines.append(
            ",".join(
                str(row[c]) if c == "step" else format(row[c], ".17g") for c in LOSS_COLUMNS
            )
        )
    atomic_write_bytes(Path(path), ("\n".join(lines) + "\n").encode())


def train_acoustic(
    records: list[UtteranceRecord],
    audio_root: Path,
    backend: RepresentationBackend,
    layer_spec: LayerSpec,
    config: AcousticTrainConfig,
    out_dir: Path,
    enhancer: Enhancer | None = None,
    resume_from: Path | None = None,
    cache: RepresentationCache | None = None,
) -> AcousticTrainResult:
    """Optimize the acoustic model on enhanced-audio representations.

    Deterministic for a fixed seed; rejected utterances are reported, and
    training proceeds on the remainder (an empty remainder is an error).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    examples, rejected = build_acoustic_examples(
        records, audio_root, backend, layer_spec, enhancer, cache
    )
    if not examples:
        raise DataError(
            f"no trainable utterances remain; rejections: {rejected}"
        )
    if resume_from is not None:
        trainer = AcousticTrainer.resume(resume_from, examples, config, out_dir)
    else:
        trainer = AcousticTrainer(examples, config, layer_spec.tag, out_dir)
    checkpoints = []
    while trainer.step < config.steps:
        trainer.train_step()
        if config.checkpoint_every and trainer.step % config.checkpoint_every == 0:
            path = out_dir / f"acoustic_step{trainer.step:06d}.ckpt"
            trainer.save(path)
            checkpoints.append(path)
    final = out_dir / "acoustic_final.ckpt"
    trainer.save(final)
    checkpoints.append(final)
    log_path = out_dir / "acoustic_losses.csv"
    write_loss_log(log_path, trainer.history)
    return AcousticTrainResult(final, log_path, trainer.history, checkpoints, rejected)
