"""Per-task softmax cross-entropy and the summed joint objective.

Each task's loss is the batch mean of -log softmax(logits)[label], computed
with the log-sum-exp shift so arbitrarily large logits cannot overflow.
The joint objective is the plain unweighted sum of the per-task values;
optional task weights are applied by the trainer before summation and
default to 1 everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TaskLoss:
    """Mean cross-entropy (nats) and its gradient w.r.t. the logits."""

    task: str
    value: float
    dlogits: np.ndarray


def softmax_cross_entropy(
    logits: np.ndarray, labels: np.ndarray, task: str = ""
) -> TaskLoss:
    """Stable cross-entropy over a logits batch with integer class labels.

    dlogits is (softmax - onehot) / batch_size, so each row sums to zero
    and the batch-mean reduction is already folded in.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise ValueError(f"logits must be a non-empty 2-D batch, got {logits.shape}")
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(
            f"label out of range for {c} classes: "
            f"[{labels.min()}, {labels.max()}]"
        )

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    value = float(-log_probs[np.arange(n), labels].mean())

    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return TaskLoss(task=task, value=value, dlogits=dlogits)


def joint_loss(task_losses: list[TaskLoss]) -> float:
    """Sum of per-task loss values, one term per task."""
    if not task_losses:
        raise ValueError("joint loss needs at least one task loss")
    return sum(t.value for t in task_losses)
