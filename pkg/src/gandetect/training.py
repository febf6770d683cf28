"""Adversarial training of generator and discriminator over clean windows."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import nn
from .checkpoint import load_checkpoint, save_checkpoint
from .selection import NaRatio, na_ratio
from .timeseries import WindowMatrix


@dataclass(frozen=True)
class GanConfig:
    wl: int = 100
    noise_dim: int = 128
    g_lr: float = 1e-3
    d_lr: float = 1e-4
    max_epochs: int = 100
    checkpoint_interval: int = 5
    batch_size: int = 64
    seed: int = 0
    d_arch: str = "cnn_d"
    dropout: float = 0.25
    noise: str = "normal"
    g_loss: str = "non_saturating"
    g_output_tanh: bool = False
    beta1: float = 0.5

    def __post_init__(self):
        if not (self.g_lr > 0 and self.d_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.checkpoint_interval < 1 or self.max_epochs < self.checkpoint_interval:
            raise ValueError("need max_epochs >= checkpoint_interval >= 1")
        if self.batch_size < 1 or self.wl < 1 or self.noise_dim < 1:
            raise ValueError("batch_size, wl and noise_dim must be positive")
        if self.noise not in ("normal", "uniform01"):
            raise ValueError(f"unknown noise mode {self.noise!r}")
        if self.g_loss not in ("non_saturating", "minimax"):
            raise ValueError(f"unknown generator loss {self.g_loss!r}")
        if self.d_arch not in ("cnn_d", "dense_d"):
            raise ValueError(f"unknown discriminator arch {self.d_arch!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CheckpointRecord:
    epoch: int
    params: nn.Network
    na: NaRatio

    @property
    def na_ratio(self) -> float:
        return self.na.value

    @property
    def anomaly_count(self) -> int:
        return self.na.anomalous_count


@dataclass
class EpochLog:
    epoch: int
    d_loss: float
    g_loss: float
    na_ratio: float | None = None
    anomaly_count: int | None = None


@dataclass
class CheckpointSeries:
    records: list[CheckpointRecord] = field(default_factory=list)
    log: list[EpochLog] = field(default_factory=list)
    config: GanConfig | None = None
    generator: nn.Network | None = None

    def __len__(self) -> int:
        return len(self.records)

    def epochs(self) -> list[int]:
        return [r.epoch for r in self.records]

    def at_epoch(self, epoch: int) -> CheckpointRecord:
        for r in self.records:
            if r.epoch == epoch:
                return r
        raise KeyError(f"no checkpoint at epoch {epoch}")

    def save(self, run_dir) -> Path:
        run_dir = Path(run_dir)
        ckpt_dir = run_dir / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        for r in self.records:
            save_checkpoint(r.params, ckpt_dir / f"epoch_{r.epoch:04d}.ckpt")
        write_log(self.log, run_dir / "train_log.csv")
        with (run_dir / "checkpoints.csv").open("w", encoding="utf-8", newline="") as fh:
            fh.write("epoch,normal_count,anomalous_count,na_ratio,file\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.na.normal_count},{r.na.anomalous_count},"
                         f"{_fmt_ratio(r.na.value)},checkpoints/epoch_{r.epoch:04d}.ckpt\n")
        return run_dir

    @classmethod
    def load(cls, run_dir) -> "CheckpointSeries":
        run_dir = Path(run_dir)
        records = []
        with (run_dir / "checkpoints.csv").open(encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                net = load_checkpoint(run_dir / row["file"])
                na = NaRatio(int(row["normal_count"]), int(row["anomalous_count"]))
                records.append(CheckpointRecord(int(row["epoch"]), net, na))
        return cls(records)


def _fmt_ratio(v: float | None) -> str:
    if v is None:
        return ""
    return "inf" if math.isinf(v) else format(v, ".17g")


def write_log(log: list[EpochLog], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("epoch,d_loss,g_loss,na_ratio,anomaly_count\n")
        for e in log:
            count = "" if e.anomaly_count is None else str(e.anomaly_count)
            fh.write(f"{e.epoch},{e.d_loss:.17g},{e.g_loss:.17g},{_fmt_ratio(e.na_ratio)},{count}\n")


def sample_noise(batch: int, noise_dim: int, rng: np.random.Generator, mode: str = "normal") -> np.ndarray:
    if batch < 1:
        raise ValueError("batch must be >= 1")
    if mode == "normal":
        return rng.standard_normal((batch, noise_dim))
    if mode == "uniform01":
        return rng.random((batch, noise_dim))
    raise ValueError(f"unknown noise mode {mode!r}")


def stop_when_infinite(record: CheckpointRecord, records: list[CheckpointRecord]) -> bool:
    """Hook: stop once the validation series is predicted entirely normal after a finite checkpoint."""
    return math.isinf(record.na.value) and any(math.isfinite(r.na.value) for r in records[:-1])


REAL = np.array([1.0, 0.0])
FAKE = np.array([0.0, 1.0])


def discriminator_loss(logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean over samples of the two-unit cross-entropy."""
    return float(nn.bce_with_logits(logits, targets).sum(axis=1).mean())


def train_gan(train_windows, validation, config: GanConfig,
              selection_hook: Callable[[CheckpointRecord, list], bool] | None = None,
              progress: Callable[[EpochLog], None] | None = None) -> CheckpointSeries:
    """Alternate one discriminator and one generator Adam step per batch.

    ``validation`` is a clean TimeSeries (or window matrix) scored every
    ``checkpoint_interval`` epochs. Training stops at ``max_epochs`` or when
    ``selection_hook`` returns True for a new checkpoint.
    """
    rows = train_windows.rows if isinstance(train_windows, WindowMatrix) else np.asarray(train_windows, float)
    if rows.ndim != 2 or rows.shape[1] != config.wl:
        raise ValueError(f"training windows must have shape (N, {config.wl})")
    n = len(rows)
    if n == 0:
        raise ValueError("no training windows")
    if not np.isfinite(rows).all():
        raise ValueError("training windows contain non-finite values")
    seed = config.seed
    g = nn.build_generator(config.wl, config.noise_dim, seed=seed, output_tanh=config.g_output_tanh)
    d = nn.build_discriminator(config.d_arch, config.wl, dropout=config.dropout, seed=seed)
    g_state = nn.TrainState.create(g, beta1=config.beta1)
    d_state = nn.TrainState.create(d, beta1=config.beta1)
    shuffle_rng = np.random.default_rng([seed, 2])
    noise_rng = np.random.default_rng([seed, 3])
    drop_rng = np.random.default_rng([seed, 4])

    out = CheckpointSeries(config=config, generator=g)
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        d_losses, g_losses = [], []
        for start in range(0, n, config.batch_size):
            real = rows[order[start:start + config.batch_size]]
            b = len(real)
            # discriminator: real -> [1, 0], generated -> [0, 1]
            z = sample_noise(b, config.noise_dim, noise_rng, config.noise)
            fake, _ = nn.forward(g, z)
            batch = np.concatenate([real, fake])
            targets = np.concatenate([np.broadcast_to(REAL, (b, 2)), np.broadcast_to(FAKE, (b, 2))])
            p, cache = nn.forward(d, batch, train=True, rng=drop_rng)
            logits = nn.output_logits(cache)
            d_losses.append(discriminator_loss(logits, targets))
            grads, _ = nn.backward(d, cache, (p - targets) / (2 * b), from_logits=True, input_grad=False)
            try:
                nn.optimizer_step(d_state, grads, config.d_lr)
            except nn.DivergedError:
                raise nn.DivergedError("diverged; reduce learning rates") from None

            # generator through the (now fixed) discriminator
            z = sample_noise(b, config.noise_dim, noise_rng, config.noise)
            fake, g_cache = nn.forward(g, z, train=True)
            p, cache = nn.forward(d, fake, train=True, rng=drop_rng)
            logits = nn.output_logits(cache)
            if config.g_loss == "non_saturating":
                g_losses.append(discriminator_loss(logits, np.broadcast_to(REAL, (b, 2))))
                dlogits = (p - REAL) / b
            else:
                g_losses.append(-discriminator_loss(logits, np.broadcast_to(FAKE, (b, 2))))
                dlogits = -(p - FAKE) / b
            _, dx = nn.backward(d, cache, dlogits, from_logits=True, param_grads=False)
            g_grads, _ = nn.backward(g, g_cache, dx, input_grad=False)
            try:
                nn.optimizer_step(g_state, g_grads, config.g_lr)
            except nn.DivergedError:
                raise nn.DivergedError("diverged; reduce learning rates") from None

        entry = EpochLog(epoch, float(np.mean(d_losses)), float(np.mean(g_losses)))
        if not (math.isfinite(entry.d_loss) and math.isfinite(entry.g_loss)):
            raise nn.DivergedError("diverged; reduce learning rates")
        out.log.append(entry)
        stop = False
        if epoch % config.checkpoint_interval == 0:
            snap = d.copy()
            snap.epoch = epoch
            ratio = na_ratio(snap, validation)
            entry.na_ratio = ratio.value
            entry.anomaly_count = ratio.anomalous_count
            record = CheckpointRecord(epoch, snap, ratio)
            out.records.append(record)
            if selection_hook is not None and selection_hook(record, out.records):
                stop = True
        if progress is not None:
            progress(entry)
        if stop:
            break
    return out


def with_lrs(config: GanConfig, g_lr: float, d_lr: float, **changes) -> GanConfig:
    return replace(config, g_lr=g_lr, d_lr=d_lr, **changes)
