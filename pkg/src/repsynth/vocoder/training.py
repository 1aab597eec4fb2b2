"""Adversarial training loop for the representation-to-waveform vocoder.

Alternates one discriminator update and one generator update per step on
random fixed-length crops aligned to the representation grid. Fully
deterministic for a fixed seed in single-worker mode: batch order comes
from a dedicated numpy generator whose state rides along in checkpoints.
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigError, DataError, NumericError
from ..pipeline.checkpoints import capture_rng, load_checkpoint, restore_rng, save_checkpoint
from ..pipeline.manifest import UtteranceRecord
from ..representation import LayerSpec, RepresentationBackend, RepresentationCache, extract
from ..signal import REP_ALIGNED, SpectralConfig, load_audio
from ..util import atomic_write_bytes
from .losses import (
    ALPHA_FM,
    BETA_MEL,
    LossBreakdown,
    adv_loss_d,
    adv_loss_g,
    feature_matching_loss,
    mel_loss,
    total_generator_loss,
)
from .models import SAMPLES_PER_FRAME, DiscriminatorConfig, Generator, GeneratorConfig, VocoderDiscriminator

LOSS_COLUMNS = ("step", "adv_d", "adv_g", "fm", "mel", "total_g")


@dataclass(frozen=True)
class VocoderTrainConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    steps: int = 800_000
    crop_frames: int = 40
    batch_size: int = 16
    lr: float = 2e-4
    adam_betas: tuple[float, float] = (0.8, 0.99)
    lr_decay: float = 0.999
    seed: int = 0
    checkpoint_every: int = 0
    mel_config: SpectralConfig = REP_ALIGNED

    def __post_init__(self):
        if self.steps < 0 or self.crop_frames < 1 or self.batch_size < 1:
            raise ConfigError("steps must be >= 0, crop_frames and batch_size >= 1")

    @classmethod
    def toy(cls, input_dim: int = 768, steps: int = 500, seed: int = 0) -> "VocoderTrainConfig":
        """Desk-scale preset: small widths, short crops, faster learning rate."""
        return cls(
            generator=GeneratorConfig.toy(input_dim=input_dim),
            discriminator=DiscriminatorConfig.toy(),
            steps=steps,
            crop_frames=32,
            batch_size=1,
            lr=3e-3,
            seed=seed,
        )

    def echo(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class TrainingPair:
    utterance_id: str
    rep: np.ndarray
    audio: np.ndarray


@dataclass
class VocoderTrainResult:
    final_checkpoint: Path
    loss_log: Path
    history: list[LossBreakdown]
    checkpoints: list[Path]


def build_training_pairs(
    records: list[UtteranceRecord],
    audio_root: Path,
    backend: RepresentationBackend,
    layer_spec: LayerSpec,
    cache: RepresentationCache | None = None,
) -> list[TrainingPair]:
    """Load (representation, waveform) pairs padded to exact 480x alignment.

    ``audio_root`` is the directory utterance audio paths are relative to,
    normally the manifest's parent directory.
    """
    if not records:
        raise DataError("empty training dataset")
    pairs = []
    for rec in records:
        wav = load_audio(Path(audio_root) / rec.audio_path)
        if cache is not None:
            seq, _ = cache.get_or_extract(wav, layer_spec, backend)
        else:
            seq = extract(wav, layer_spec, backend)
        audio = np.zeros(seq.n_frames * SAMPLES_PER_FRAME, dtype=np.float32)
        audio[: len(wav)] = wav.samples.astype(np.float32)
        pairs.append(TrainingPair(rec.id, seq.frames, audio))
    return pairs


class VocoderTrainer:
    def __init__(
        self,
        pairs: list[TrainingPair],
        config: VocoderTrainConfig,
        layer_tag: str,
        out_dir: Path,
    ):
        if not pairs:
            raise DataError("empty training dataset")
        dims = {p.rep.shape[1] for p in pairs}
        if dims != {config.generator.input_dim}:
            raise DataError(
                f"representation dims {sorted(dims)} do not match "
                f"generator input_dim {config.generator.input_dim}"
            )
        self.pairs = pairs
        self.config = config
        self.layer_tag = layer_tag
        self.out_dir = Path(out_dir)
        torch.manual_seed(config.seed)
        self.generator = Generator(config.generator)
        self.discriminator = VocoderDiscriminator(config.discriminator)
        self.opt_g = torch.optim.Adam(
            self.generator.parameters(), lr=config.lr, betas=config.adam_betas
        )
        self.opt_d = torch.optim.Adam(
            self.discriminator.parameters(), lr=config.lr, betas=config.adam_betas
        )
        self.sched_g = torch.optim.lr_scheduler.ExponentialLR(self.opt_g, gamma=config.lr_decay)
        self.sched_d = torch.optim.lr_scheduler.ExponentialLR(self.opt_d, gamma=config.lr_decay)
        self.rng = np.random.default_rng(config.seed)
        self.step = 0
        self.history: list[LossBreakdown] = []
        self._crop = min(config.crop_frames, min(p.rep.shape[0] for p in pairs))

    def _batch(self) -> tuple[torch.Tensor, torch.Tensor]:
        reps, audios = [], []
        for _ in range(self.config.batch_size):
            pair = self.pairs[int(self.rng.integers(len(self.pairs)))]
            start = int(self.rng.integers(pair.rep.shape[0] - self._crop + 1))
            reps.append(torch.from_numpy(pair.rep[start : start + self._crop].T.copy()))
            audios.append(
                torch.from_numpy(
                    pair.audio[
                        start * SAMPLES_PER_FRAME : (start + self._crop) * SAMPLES_PER_FRAME
                    ].copy()
                )
            )
        return torch.stack(reps), torch.stack(audios).unsqueeze(1)

    def d_step(self, rep: torch.Tensor, audio: torch.Tensor) -> float:
        with torch.no_grad():
            fake = self.generator(rep)
        real_scores, _ = self.discriminator(audio)
        fake_scores, _ = self.discriminator(fake)
        loss = adv_loss_d(real_scores, fake_scores)
        self.opt_d.zero_grad()
        loss.backward()
        self.opt_d.step()
        return float(loss.detach())

    def g_step(self, rep: torch.Tensor, audio: torch.Tensor) -> tuple[float, float, float]:
        fake = self.generator(rep)
        fake_scores, fake_feats = self.discriminator(fake)
        with torch.no_grad():
            _, real_feats = self.discriminator(audio)
        adv = adv_loss_g(fake_scores)
        fm = feature_matching_loss(real_feats, fake_feats)
        per_clip = [
            mel_loss(audio[b, 0], fake[b, 0], self.config.mel_config)
            for b in range(audio.shape[0])
        ]
        mel = sum(per_clip) / len(per_clip)
        total = adv + ALPHA_FM * fm + BETA_MEL * mel
        self.opt_g.zero_grad()
        total.backward()
        self.opt_g.step()
        return float(adv.detach()), float(fm.detach()), float(mel.detach())

    def train_step(self) -> LossBreakdown:
        rep, audio = self._batch()
        adv_d = self.d_step(rep, audio)
        adv_g, fm, mel = self.g_step(rep, audio)
        self.step += 1
        if self.step % len(self.pairs) == 0:
            self.sched_g.step()
            self.sched_d.step()
        try:
            breakdown = total_generator_loss(adv_g, fm, mel, adv_d=adv_d)
        except NumericError:
            snapshot = self.out_dir / f"diagnostic_step{self.step:06d}.ckpt"
            self.save(snapshot)
            raise NumericError(
                f"non-finite loss at step {self.step} "
                f"(adv_d={adv_d}, adv_g={adv_g}, fm={fm}, mel={mel}); "
                f"state snapshot written to {snapshot}"
            ) from None
        self.history.append(breakdown)
        return breakdown

    def save(self, path: Path) -> None:
        save_checkpoint(
            path,
            kind="vocoder",
            step=self.step,
            layer_tag=self.layer_tag,
            config_echo=self.config.echo(),
            model_state={
                "generator": self.generator.state_dict(),
                "discriminator": self.discriminator.state_dict(),
            },
            optimizer_state={"g": self.opt_g.state_dict(), "d": self.opt_d.state_dict()},
            scheduler_state={"g": self.sched_g.state_dict(), "d": self.sched_d.state_dict()},
            rng_state=capture_rng(self.rng),
            loss_history=[
                {"step": i + 1, **b.as_row()} for i, b in enumerate(self.history)
            ],
        )

    @classmethod
    def resume(
        cls, checkpoint_path: Path, pairs: list[TrainingPair],
        config: VocoderTrainConfig, out_dir: Path,
    ) -> "VocoderTrainer":
        payload = load_checkpoint(checkpoint_path, expect_kind="vocoder")
        echoed = payload["config"]
        ours = config.echo()
        for key in ("generator", "discriminator"):
            if echoed[key] != ours[key]:
                raise ConfigError(
                    f"checkpoint {key} config does not match the requested one: "
                    f"{echoed[key]} vs {ours[key]}"
                )
        trainer = cls(pairs, config, payload["layer_tag"], out_dir)
        trainer.generator.load_state_dict(payload["model"]["generator"])
        trainer.discriminator.load_state_dict(payload["model"]["discriminator"])
        trainer.opt_g.load_state_dict(payload["optimizer"]["g"])
        trainer.opt_d.load_state_dict(payload["optimizer"]["d"])
        trainer.sched_g.load_state_dict(payload["scheduler"]["g"])
        trainer.sched_d.load_state_dict(payload["scheduler"]["d"])
        restore_rng(payload["rng"], trainer.rng)
        trainer.step = payload["step"]
        trainer.history = [
            total_generator_loss(
                row["adv_g"], row["fm"], row["mel"], adv_d=row["adv_d"]
            )
            for row in payload["loss_history"]
        ]
        return trainer


def write_loss_log(path: Path, history: list[LossBreakdown], columns=LOSS_COLUMNS) -> None:
    lines = [",".join(columns)]
    for i, breakdown in enumerate(history):
        row = {"step": i + 1, **breakdown.as_row()}
        lines.append(",".join(_format_cell(row[c]) for c in columns))
    atomic_write_bytes(Path(path), ("\n".join(lines) + "\n").encode())


def _format_cell(value) -> str:
    if isinstance(value, int):
        return str(value)
    return format(value, ".17g")


def train_vocoder(
    records: list[UtteranceRecord],
    audio_root: Path,
    backend: RepresentationBackend,
    layer_spec: LayerSpec,
    config: VocoderTrainConfig,
    out_dir: Path,
    resume_from: Path | None = None,
    cache: RepresentationCache | None = None,
) -> VocoderTrainResult:
    """Run the GAN training procedure and leave checkpoints plus a loss CSV.

    With ``resume_from`` the run continues a previous checkpoint and the
    combined loss log is bit-identical to an uninterrupted run of the same
    seed and step count.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = build_training_pairs(records, audio_root, backend, layer_spec, cache)
    if resume_from is not None:
        trainer = VocoderTrainer.resume(resume_from, pairs, config, out_dir)
    else:
        trainer = VocoderTrainer(pairs, config, layer_spec.tag, out_dir)
    checkpoints = []
    while trainer.step < config.steps:
        trainer.train_step()
        if config.checkpoint_every and trainer.step % config.checkpoint_every == 0:
            path = out_dir / f"vocoder_step{trainer.step:06d}.ckpt"
            trainer.save(path)
            checkpoints.append(path)
    final = out_dir / "vocoder_final.ckpt"
    trainer.save(final)
    checkpoints.append(final)
    log_path = out_dir / "vocoder_losses.csv"
    write_loss_log(log_path, trainer.history)
    return VocoderTrainResult(final, log_path, trainer.history, checkpoints)
