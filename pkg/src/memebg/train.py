"""Deterministic minibatch SGD training for multi-task and single-task runs.

One run is single-threaded and fully determined by (dataset, config): the
seed drives parameter initialization first, then the per-epoch shuffles.
Updates use SGD with momentum (v = momentum * v + g; theta -= lr * v) and
the last partial minibatch is kept, so every sample contributes each epoch.
Validation data, when supplied, is only ever scored, never trained on.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .data import EmbeddingDataset
from .errors import ConfigError, DivergenceError
from .loss import TaskLoss, joint_loss, softmax_cross_entropy
from .metrics import confusion, report
from .model import ArchConfig, Gradients, MTLNetwork, backward, forward, init_network, predict
from .numerics import Rng


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and architecture hyperparameters for one training run.

    Defaults: learning rate 0.01, momentum 0.9, 100 epochs, batches of 32.
    learning_rate=0 is accepted and performs null updates (useful for
    plumbing checks).  task_weights scales each task's loss and gradient
    before the joint sum; unspecified tasks weigh 1.  patience, off by
    default, stops a run early once the mean validation macro-F1 has gone
    that many consecutive epochs without improving (requires a val set).
    """

    arch: ArchConfig
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    task_weights: dict[str, float] = field(default_factory=dict)
    patience: int | None = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.momentum < 0:
            raise ConfigError(f"momentum must be >= 0, got {self.momentum}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        unknown = set(self.task_weights) - {t.name for t in self.arch.tasks}
        if unknown:
            raise ConfigError(f"task_weights name unknown tasks: {sorted(unknown)}")

    def weight(self, task: str) -> float:
        return self.task_weights.get(task, 1.0)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    joint_loss: float
    task_losses: dict[str, float]
    val_accuracy: dict[str, float] | None
    val_macro_f1: dict[str, float] | None


@dataclass
class TrainHistory:
    """One record per epoch plus the total parameter-update count."""

    tasks: tuple[str, ...]
    records: list[EpochRecord] = field(default_factory=list)
    num_updates: int = 0

    def to_csv(self) -> str:
        """epoch,joint_loss,loss_<task>...,val_acc_<task>...,val_f1_<task>...

        Validation cells are left empty for epochs without a validation set.
        """
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(
            ["epoch", "joint_loss"]
            + [f"loss_{t}" for t in self.tasks]
            + [f"val_acc_{t}" for t in self.tasks]
            + [f"val_f1_{t}" for t in self.tasks]
        )
        for r in self.records:
            acc = r.val_accuracy or {}
            f1 = r.val_macro_f1 or {}
            writer.writerow(
                [r.epoch, repr(r.joint_loss)]
                + [repr(r.task_losses[t]) for t in self.tasks]
                + [repr(acc[t]) if t in acc else "" for t in self.tasks]
                + [repr(f1[t]) if t in f1 else "" for t in self.tasks]
            )
        return buf.getvalue()


def _check_dataset(ds: EmbeddingDataset, arch: ArchConfig, role: str) -> None:
    if ds.dim != arch.input_dim:
        raise ConfigError(
            f"{role} dataset dim {ds.dim} does not match arch input_dim "
            f"{arch.input_dim}"
        )
    for t in arch.tasks:
        if t.name not in ds.labels:
            raise ConfigError(f"{role} dataset is missing labels for task {t.name}")
        if ds.schema(t.name).classes != t.classes:
            raise ConfigError(
                f"{role} dataset classes {ds.schema(t.name).classes} differ "
                f"from arch classes {t.classes} for task {t.name}"
            )


def _validation_metrics(
    net: MTLNetwork, val_ds: EmbeddingDataset
) -> tuple[dict[str, float], dict[str, float]]:
    preds = predict(net, val_ds.x)
    acc, f1 = {}, {}
    for t in net.arch.tasks:
        rep = report(confusion(val_ds.labels[t.name], preds[t.name], t.classes))
        acc[t.name] = rep.accuracy
        f1[t.name] = rep.macro.f1
    return acc, f1


def train_mtl(
    train_ds: EmbeddingDataset,
    val_ds: EmbeddingDataset | None,
    config: TrainConfig,
) -> tuple[MTLNetwork, TrainHistory]:
    """Train all configured task heads jointly on a shared trunk.

    Per epoch: seeded shuffle, minibatch forward, per-task cross-entropy,
    summed joint loss, one backward pass (the trunk accumulates every
    head's gradient), then an SGD-with-momentum step on all parameters.
    """
    arch = config.arch
    _check_dataset(train_ds, arch, "train")
    if val_ds is not None:
        _check_dataset(val_ds, arch, "validation")
    if config.patience is not None and val_ds is None:
        raise ConfigError("patience-based early stopping requires a validation set")

    rng = Rng(config.seed)
    net = init_network(arch, rng)
    velocity = [np.zeros_like(p) for p in net.parameters()]
    task_names = tuple(t.name for t in arch.tasks)
    history = TrainHistory(tasks=task_names)

    n = train_ds.n
    best_val = -np.inf
    stale_epochs = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        epoch_task_sums = {t: 0.0 for t in task_names}
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            x = train_ds.x[batch]
            try:
                logits, cache = forward(net, x)
            except ValueError as exc:
                # shapes and labels were validated up front, so a ValueError
                # mid-step means the parameters blew up to non-finite values
                raise DivergenceError(epoch, config.learning_rate) from exc

            task_losses: list[TaskLoss] = []
            dlogits: dict[str, np.ndarray] = {}
            for t in task_names:
                tl = softmax_cross_entropy(logits[t], train_ds.labels[t][batch], t)
                w = config.weight(t)
                if w != 1.0:
                    tl = TaskLoss(t, w * tl.value, w * tl.dlogits)
                task_losses.append(tl)
                dlogits[t] = tl.dlogits
            batch_joint = joint_loss(task_losses)
            if not np.isfinite(batch_joint):
                raise DivergenceError(epoch, config.learning_rate)
            for tl in task_losses:
                epoch_task_sums[tl.task] += tl.value * len(batch)

            grads = backward(net, cache, dlogits)
            _sgd_step(net, grads, velocity, config)
            history.num_updates += 1

        task_means = {t: epoch_task_sums[t] / n for t in task_names}
        val_acc = val_f1 = None
        if val_ds is not None:
            val_acc, val_f1 = _validation_metrics(net, val_ds)
        history.records.append(
            EpochRecord(
                epoch=epoch,
                joint_loss=sum(task_means.values()),
                task_losses=task_means,
                val_accuracy=val_acc,
                val_macro_f1=val_f1,
            )
        )
        if config.patience is not None:
            score = sum(val_f1.values()) / len(val_f1)
            if score > best_val:
                best_val = score
                stale_epochs = 0
            else:
                stale_epochs += 1
                if stale_epochs >= config.patience:
                    break
    return net, history


def _sgd_step(
    net: MTLNetwork, grads: Gradients, velocity: list[np.ndarray], config: TrainConfig
) -> None:
    grad_arrays = []
    for gw, gb in grads.trunk:
        grad_arrays.extend((gw, gb))
    for t in net.arch.tasks:
        gw, gb = grads.heads[t.name]
        grad_arrays.extend((gw, gb))
    for param, vel, grad in zip(net.parameters(), velocity, grad_arrays):
        vel *= config.momentum
        vel += grad
        param -= config.learning_rate * vel


def train_stl(
    train_ds: EmbeddingDataset,
    val_ds: EmbeddingDataset | None,
    task: str,
    config: TrainConfig,
) -> tuple[MTLNetwork, TrainHistory]:
    """Same loop restricted to one task, with identical per-head capacity."""
    try:
        arch = config.arch.restrict(task)
    except KeyError:
        raise ConfigError(
            f"unknown task {task!r}; configured tasks are "
            f"{[t.name for t in config.arch.tasks]}"
        ) from None
    weights = {task: config.task_weights[task]} if task in config.task_weights else {}
    return train_mtl(train_ds, val_ds, replace(config, arch=arch, task_weights=weights))


def mtl_trainer(train_ds: EmbeddingDataset, config: TrainConfig, seed: int) -> MTLNetwork:
    """Trainer callable for comparisons: joint training under the given seed."""
    net, _ = train_mtl(train_ds, None, replace(config, seed=seed))
    return net


def make_stl_trainer(task: str):
    """Trainer callable training only ``task`` under the given seed."""

    def trainer(train_ds: EmbeddingDataset, config: TrainConfig, seed: int) -> MTLNetwork:
        net, _ = train_stl(train_ds, None, task, replace(config, seed=seed))
        return net

    return trainer
