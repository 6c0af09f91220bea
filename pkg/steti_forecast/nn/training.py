"""
Mini-batch training with early stopping on the validation loss.
"""
import logging
import math
from collections.abc import Mapping

import numpy as np
from pydantic import BaseModel, Field

from ..config import BatchSize, HyperParams, TrainConfig, spawn_rng
from ..exceptions import DivergedLoss, FeatureError
from ..features import ExampleSet
from ..steti.metrics import mse
from .model import ModelParams, copy_params, loss_and_gradients, predict
from .optimizers import create_optimizer

logger = logging.getLogger(__name__)


class TrainingHistory(BaseModel):
    train_loss: list[float] = Field(default_factory=list)
    val_loss: list[float] = Field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    batch_size: int = 0

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


class EarlyStopping:
    """
    Stops training once the validation loss has not improved for ``patience``
    consecutive epochs, and keeps a copy of the best parameters seen.
    """

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.counter = 0
        self.best_loss = math.inf
        self.best_epoch = 0
        self.best_params: ModelParams | None = None

    def __call__(self, val_loss: float, epoch: int, params: Mapping[str, np.ndarray]) -> bool:
        if val_loss < self.best_loss - self.min_delta:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.best_params = copy_params(params)
            self.counter = 0
            return False
        self.counter += 1
        return self.counter >= self.patience


def resolve_batch_size(batch_size: BatchSize, n_train: int) -> int:
    if batch_size == "full":
        return n_train
    if batch_size > n_train:
        logger.warning("batch size %d exceeds the %d training examples; using full batch", batch_size, n_train)
        return n_train
    return batch_size


def train(
    train_set: ExampleSet,
    val_set: ExampleSet,
    params: Mapping[str, np.ndarray],
    hyperparams: HyperParams,
    config: TrainConfig,
) -> tuple[ModelParams, TrainingHistory]:
    """
    Trains on mean squared error with the configured optimizer.

    Args:
        train_set: Training examples.
        val_set: Validation examples monitored for early stopping.
        params: Initial parameters; not modified.
        hyperparams: Optimizer, learning rate, dropout and activations.
        config: Batch size, epoch budget, patience and seed.

    Returns:
        The parameters with the lowest validation loss ever observed, and the loss history.

    Raises:
        DivergedLoss: If a training or validation loss is not finite.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise FeatureError("training needs non-empty training and validation sets")
    n = len(train_set)
    batch_size = resolve_batch_size(config.batch_size, n)
    shuffle_rng = spawn_rng(config.seed, "shuffle")
    dropout_rng = spawn_rng(config.seed, "dropout")
    optimizer = create_optimizer(hyperparams.optimizer, hyperparams.learning_rate)
    stopper = EarlyStopping(min(config.patience, config.max_epochs))
    history = TrainingHistory(batch_size=batch_size)
    params = copy_params(params)

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = train_set.subset(order[start : start + batch_size])
            loss, grads, running = loss_and_gradients(batch, params, hyperparams, dropout_rng)
            if not math.isfinite(loss):
                raise DivergedLoss(epoch, loss)
            params = optimizer.step(params, grads)
            params.update(running)
            total += loss * len(batch)
        train_loss = total / n
        val_loss = mse(val_set.target, predict(val_set, params, hyperparams))
        if not math.isfinite(val_loss):
            raise DivergedLoss(epoch, val_loss)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        if epoch % config.log_every == 0:
            logger.debug("epoch %d: train %.6g, val %.6g", epoch, train_loss, val_loss)
        if stopper(val_loss, epoch, params):
            logger.debug("early stop at epoch %d, best epoch %d", epoch, stopper.best_epoch)
            break

    history.best_epoch = stopper.best_epoch
    history.best_val_loss = stopper.best_loss
    return stopper.best_params, history
