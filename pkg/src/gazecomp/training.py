"""Training loop for the completion model."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import AdamW
from .errors import ModelError, NonFiniteError, OptimizationError, TrainingError
from .model import CompletionModel, ModelConfig, window_inputs, window_targets

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    weight_decay: float = 0.07
    betas: tuple = (0.9, 0.999)
    batch_size: int = 4
    epochs: int = 1
    steps_per_epoch: int | None = None  # None = one full pass over the windows
    lr_schedule: str = "constant"  # or "cosine" (decays to lr_min over all steps)
    lr_min: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["betas"] = list(self.betas)
        return d


@dataclass
class TrainResult:
    model: CompletionModel
    epoch_losses: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)


def _batches(n, batch_size, rng, steps):
    """Seed-stable batch order; reshuffles on each pass through the data."""
    order = rng.permutation(n)
    pos = 0
    for _ in range(steps):
        if pos + batch_size > n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos:pos + batch_size]
        if len(idx) < batch_size:  # dataset smaller than a batch: cycle
            idx = np.resize(order, batch_size)
        pos += batch_size
        yield idx


def train(windows, model_config: ModelConfig, train_config: TrainConfig = TrainConfig(),
          model_seed=0, epochs=None, callback=None):
    """Minimize KL over supervised frames; returns the model and loss curves.

    With ``epochs=0`` the returned model is the seeded initialization.
    """
    windows = list(windows)
    if not windows:
        raise TrainingError("training set is empty")
    epochs = train_config.epochs if epochs is None else epochs
    model = CompletionModel(model_config, seed=model_seed)
    opt = AdamW(model.parameters(), lr=train_config.lr, weight_decay=train_config.weight_decay,
                betas=train_config.betas)
    result = TrainResult(model)
    bs = train_config.batch_size
    steps = train_config.steps_per_epoch or max(1, math.ceil(len(windows) / bs))
    rng = np.random.default_rng(train_config.seed)
    total_steps = epochs * steps
    for epoch in range(epochs):
        losses = []
        for idx in _batches(len(windows), bs, rng, steps):
            if train_config.lr_schedule == "cosine":
                frac = opt.step_count / max(1, total_steps)
                opt.lr = train_config.lr_min + 0.5 * (train_config.lr - train_config.lr_min) * (1 + math.cos(math.pi * frac))
            batch = [windows[i] for i in idx]
            frames, partial = window_inputs(batch, model_config)
            target = window_targets(batch, model_config)
            opt.zero_grad()
            try:
                loss = model.loss(frames, partial, target)
                loss.backward()
                opt.step()
            except (ModelError, NonFiniteError, OptimizationError) as exc:
                raise TrainingError(f"training diverged in epoch {epoch}: {exc}", epoch=epoch) from exc
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"loss is not finite in epoch {epoch}", epoch=epoch)
            losses.append(value)
            result.step_losses.append(value)
        result.epoch_losses.append(float(np.mean(losses)))
        log.info("epoch %d loss %.5f", epoch, result.epoch_losses[-1])
        if callback is not None:
            callback(epoch, result)
    return result
