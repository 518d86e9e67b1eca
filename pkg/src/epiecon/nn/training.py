"""Generic full-batch training loop with learning-rate decay, early stopping
on a chronological validation split, and best-checkpoint restore.

A trainable model must expose:
  params() / grads() -> dict[str, ndarray]     live parameter/gradient views
  zero_grads()
  training_loss(batch, rng, config) -> float   accumulates gradients
  validation_loss(batch) -> float              clean loss, no gradients
  clone_params() / set_params(dict)

Datasets are model-specific batch objects supporting len() and slice(a, b)
(rows in chronological order).
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, NumericError
from .adam import AdamState, adam_step


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    lr_decay_factor: float = 1.0
    lr_decay_period: int = 200
    patience: int = 100
    max_epochs: int = 1000
    noise_sigma: float = 0.0
    loss_weights: dict = field(default_factory=dict)
    validation_fraction: float = 0.2
    seed: int = 0
    early_stop: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DomainError("learning_rate must be > 0")
        if self.patience < 1:
            raise DomainError("patience must be >= 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise DomainError("validation_fraction must lie in (0, 1)")
        if self.noise_sigma < 0:
            raise DomainError("noise_sigma must be >= 0")
        if self.lr_decay_period < 1:
            raise DomainError("lr_decay_period must be >= 1")
        if self.max_epochs < 1:
            raise DomainError("max_epochs must be >= 1")

    def weight(self, name: str) -> float:
        """Loss-term weight, defaulting to 1.0 for unspecified terms."""
        return float(self.loss_weights.get(name, 1.0))

    def replace(self, **kwargs) -> "TrainConfig":
        data = {**self.__dict__, **kwargs}
        return TrainConfig(**data)


@dataclass
class TrainResult:
    train_history: list
    val_history: list
    best_epoch: int
    best_val: float
    epochs_run: int
    stopped_early: bool


def chronological_split(dataset, validation_fraction: float):
    """Last `validation_fraction` of the rows becomes the validation set
    (time series: no shuffling)."""
    n = len(dataset)
    n_val = max(1, int(round(validation_fraction * n)))
    n_val = min(n_val, n - 1)
    return dataset.slice(0, n - n_val), dataset.slice(n - n_val, n)


def train(model, dataset, config: TrainConfig) -> TrainResult:
    """Full-batch epochs; lr multiplied by lr_decay_factor every
    lr_decay_period epochs; stops after `patience` epochs without a new
    validation-loss minimum (when early_stop) or at max_epochs. The model is
    left holding the parameters of the best validation epoch."""
    if len(dataset) < 2:
        raise DomainError(f"dataset too small to train on ({len(dataset)} samples)")
    train_set, val_set = chronological_split(dataset, config.validation_fraction)
    rng = np.random.default_rng(config.seed)
    adam = AdamState.for_params(model.params(), lr=config.learning_rate,
                                weight_decay=config.weight_decay)

    train_history, val_history = [], []
    best_val = np.inf
    best_epoch = -1
    best_params = model.clone_params()
    since_best = 0
    stopped_early = False

    for epoch in range(config.max_epochs):
        adam.lr = config.learning_rate * config.lr_decay_factor ** (epoch // config.lr_decay_period)
        model.zero_grads()
        train_loss = model.training_loss(train_set, rng, config)
        if not np.isfinite(train_loss):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        adam_step(adam, model.params(), model.grads())
        val_loss = model.validation_loss(val_set)
        train_history.append(float(train_loss))
        val_history.append(float(val_loss))
        if val_loss < best_val:
            best_val = float(val_loss)
            best_epoch = epoch
            best_params = model.clone_params()
            since_best = 0
        else:
            since_best += 1
            if config.early_stop and since_best >= config.patience:
                stopped_early = True
                break

    model.set_params(best_params)
    return TrainResult(train_history, val_history, best_epoch, best_val,
                       epochs_run=len(train_history), stopped_early=stopped_early)


def clone_param_dict(params: dict) -> dict:
    return {k: np.array(v, copy=True) for k, v in params.items()}


def assign_param_dict(params: dict, source: dict) -> None:
    for k, p in params.items():
        p[...] = source[k]


def mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    return float(np.mean((pred - target) ** 2))


# copy is used by callers cloning whole models (cheap: plain ndarrays)
deep_copy_model = copy.deepcopy
