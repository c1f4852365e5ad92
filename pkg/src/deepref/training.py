"""Generator training: MSE loss over (X, Y) block pairs, Adadelta updates,
stepped learning-rate decay, deterministic seeded shuffling."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, NonFiniteError, ShapeMismatchError
from .flow import ExtractionConfig, SamplePair, extract_pairs
from .generator import (
    GeneratorNet,
    ModelConfig,
    build_network,
    copy_network,
    generate_reference,
    named_params,
    net_backward,
    net_forward,
)
from .metrics import psnr
from .nn import AdadeltaState, adadelta_step


@dataclass
class TrainConfig:
    lr0: float = 1e-4
    decay_interval_epochs: int = 20
    decay_factor: float = 0.5
    batch_size: int = 32
    epochs: int = 80
    shuffle_seed: int = 0
    rho: float = 0.95
    eps: float = 1e-6
    model: ModelConfig | None = None  # used by block_size_sweep to build fresh nets

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.decay_factor <= 1.0:
            raise ConfigError(f"decay_factor must be in (0,1], got {self.decay_factor}")
        if self.decay_interval_epochs < 1:
            raise ConfigError(
                f"decay_interval_epochs must be >= 1, got {self.decay_interval_epochs}"
            )
        if self.lr0 < 0:
            raise ConfigError(f"lr0 must be non-negative, got {self.lr0}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")


class EpochStats(NamedTuple):
    epoch: int
    lr: float
    loss: float  # mean per-sample training loss over the epoch
    seconds: float


@dataclass
class LossReport:
    epochs: list[EpochStats] = field(default_factory=list)

    def csv_rows(self):
        return [(e.epoch, e.lr, e.loss) for e in self.epochs]

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].loss


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """loss = (1/M) sum_i ||pred_i - target_i||^2 / (m*n) over the batch.

    Returns the loss and its gradient w.r.t. pred: 2*(pred-target)/(M*m*n).
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    loss = float(np.sum(diff * diff)) / diff.size
    grad = (2.0 / diff.size) * diff
    return loss, grad


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """lr0 decayed by decay_factor at every decay_interval_epochs boundary."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr0 * cfg.decay_factor ** (epoch // cfg.decay_interval_epochs)


def normalize_blocks(pairs: list[SamplePair], dtype) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([p.x_block for p in pairs]).astype(dtype)[:, None] / 255.0
    ys = np.stack([p.y_block for p in pairs]).astype(dtype)[:, None] / 255.0
    return xs, ys


def train(
    net: GeneratorNet, dataset: list[SamplePair], cfg: TrainConfig
) -> tuple[GeneratorNet, LossReport]:
    """Optimize a copy of `net` on the dataset; the input network is untouched.

    Bit-deterministic for a fixed shuffle seed on a fixed machine.
    """
    if not dataset:
        raise ConfigError("training dataset is empty")
    dtype = np.dtype(net.config.dtype)
    xs, ys = normalize_blocks(dataset, dtype)

    net = copy_network(net)
    params = named_params(net)
    states = {
        name: (
            AdadeltaState.zeros_like(p.weights, rho=cfg.rho, eps=cfg.eps),
            AdadeltaState.zeros_like(p.bias, rho=cfg.rho, eps=cfg.eps),
        )
        for name, p in params
    }
    rng = np.random.default_rng(cfg.shuffle_seed)
    report = LossReport()
    n = len(dataset)
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg)
        states = {
            name: (replace(sw, lr=lr), replace(sb, lr=lr))
            for name, (sw, sb) in states.items()
        }
        started = time.perf_counter()
        order = rng.permutation(n)
        epoch_loss = 0.0
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            out, cache = net_forward(net, xs[idx], want_cache=True)
            loss, grad = mse_loss(out, ys[idx])
            if not math.isfinite(loss):
                raise NonFiniteError(
                    f"non-finite training loss at epoch {epoch}, batch {batch_index}"
                )
            grads, _ = net_backward(net, cache, grad)
            for name, p in params:
                gw, gb = grads[name]
                sw, sb = states[name]
                p.weights, sw = adadelta_step(p.weights, gw, sw)
                p.bias, sb = adadelta_step(p.bias, gb, sb)
                states[name] = (sw, sb)
            epoch_loss += loss * len(idx)
        report.epochs.append(
            EpochStats(epoch, lr, epoch_loss / n, time.perf_counter() - started)
        )
    return net, report


def block_size_sweep(
    frames,
    sizes,
    cfg: TrainConfig,
    extraction: ExtractionConfig | None = None,
    holdout_fraction: float = 1.0 / 3.0,
    sequence_name: str = "sequence",
) -> list[tuple[int, str, float]]:
    """Train one fresh network per block size and measure whole-frame PSNR of
    generated references on held-out frames. Rows: (block_size, name, psnr)."""
    frames = [np.asarray(f) for f in frames]
    if len(frames) < 4:
        raise ConfigError(f"block_size_sweep needs at least 4 frames, got {len(frames)}")
    model_cfg = cfg.model if cfg.model is not None else ModelConfig()
    n_hold = max(2, int(round(len(frames) * holdout_fraction)))
    train_frames = frames[: len(frames) - n_hold]
    holdout = frames[len(frames) - n_hold :]
    if len(train_frames) < 2:
        raise ConfigError("not enough frames left for training after holdout split")

    rows = []
    for size in sizes:
        base = extraction if extraction is not None else ExtractionConfig(block_size=size)
        ex = replace(base, block_size=int(size))
        pairs: list[SamplePair] = []
        for prev, cur in zip(train_frames, train_frames[1:]):
            pairs.extend(extract_pairs(prev, cur, ex))
        if not pairs:
            raise ConfigError(f"no training pairs extracted at block size {size}")
        trained, _ = train(build_network(model_cfg), pairs, cfg)
        scores = [
            psnr(generate_reference(trained, holdout[i - 1]), holdout[i])
            for i in range(1, len(holdout))
        ]
        rows.append((int(size), sequence_name, float(np.mean(scores))))
    return rows
