"""Shared-trunk multi-head network: parameters, forward, backward, predict.

The trunk is a stack of affine+ReLU layers shared by every task; each task
owns a single affine head producing logits.  During backprop the trunk
receives the sum of the gradients flowing back from all heads, which is how
the summed joint objective reaches the shared parameters, while each head
only ever sees its own task's gradient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import TaskSchema
from .errors import FormatError, ShapeError
from .numerics import Rng, gauss_sample, matmul

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ArchConfig:
    """Network shape: input width, trunk hidden widths, and task heads.

    Activation is fixed to ReLU.  An empty trunk is allowed and turns each
    head into a linear classifier on the raw embedding.
    """

    input_dim: int
    tasks: tuple[TaskSchema, ...]
    trunk_dims: tuple[int, ...] = (256,)

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(w < 1 for w in self.trunk_dims):
            raise ValueError(f"trunk widths must be >= 1, got {self.trunk_dims}")
        if not self.tasks:
            raise ValueError("need at least one task head")
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate task names: {names}")

    @property
    def trunk_output_dim(self) -> int:
        return self.trunk_dims[-1] if self.trunk_dims else self.input_dim

    def restrict(self, task: str) -> "ArchConfig":
        """Single-task architecture with identical trunk sizing."""
        for t in self.tasks:
            if t.name == task:
                return ArchConfig(self.input_dim, (t,), self.trunk_dims)
        raise KeyError(f"unknown task {task!r}")


@dataclass
class MTLNetwork:
    """Trunk parameters plus one (W, b) pair per task head.

    Weights are (fan_in, fan_out) matrices, biases 1 x fan_out rows.
    """

    arch: ArchConfig
    trunk: list[tuple[np.ndarray, np.ndarray]]
    heads: dict[str, tuple[np.ndarray, np.ndarray]]

    def parameters(self) -> list[np.ndarray]:
        """All parameter arrays, trunk first then heads in task order."""
        params = []
        for w, b in self.trunk:
            params.extend((w, b))
        for t in self.arch.tasks:
            w, b = self.heads[t.name]
            params.extend((w, b))
        return params


@dataclass
class ForwardCache:
    """Per-minibatch intermediates needed by backward."""

    x: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]

    @property
    def trunk_output(self) -> np.ndarray:
        return self.activations[-1] if self.activations else self.x


@dataclass
class Gradients:
    """Same layout as the network parameters."""

    trunk: list[tuple[np.ndarray, np.ndarray]]
    heads: dict[str, tuple[np.ndarray, np.ndarray]]


def init_network(arch: ArchConfig, rng: Rng) -> MTLNetwork:
    """He-scaled Gaussian weights (variance 2/fan_in), zero biases.

    Draw order is trunk layers bottom-up, then heads in task order, so a
    fixed seed fully determines every parameter.
    """
    trunk = []
    fan_in = arch.input_dim
    for width in arch.trunk_dims:
        w = gauss_sample(rng, fan_in, width, 0.0, np.sqrt(2.0 / fan_in))
        trunk.append((w, np.zeros((1, width))))
        fan_in = width
    heads = {}
    for t in arch.tasks:
        w = gauss_sample(rng, fan_in, len(t.classes), 0.0, np.sqrt(2.0 / fan_in))
        heads[t.name] = (w, np.zeros((1, len(t.classes))))
    return MTLNetwork(arch=arch, trunk=trunk, heads=heads)


def forward(
    net: MTLNetwork, x_batch: np.ndarray
) -> tuple[dict[str, np.ndarray], ForwardCache]:
    """Trunk affine+ReLU chain, then one affine head per task (no softmax)."""
    if x_batch.ndim != 2 or x_batch.shape[1] != net.arch.input_dim:
        raise ShapeError(
            f"input batch {x_batch.shape} does not match input_dim "
            f"{net.arch.input_dim}"
        )
    h = x_batch
    pre, act = [], []
    for w, b in net.trunk:
        z = matmul(h, w) + b
        h = np.maximum(z, 0.0)
        pre.append(z)
        act.append(h)
    logits = {
        t.name: matmul(h, net.heads[t.name][0]) + net.heads[t.name][1]
        for t in net.arch.tasks
    }
    return logits, ForwardCache(x=x_batch, pre_activations=pre, activations=act)


def backward(
    net: MTLNetwork, cache: ForwardCache, dlogits: dict[str, np.ndarray]
) -> Gradients:
    """Backprop the per-task logit gradients through heads and trunk.

    Head gradients stay isolated per task; the gradient entering the trunk
    is the elementwise sum of every head's contribution.
    """
    h = cache.trunk_output
    head_grads: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    dh = np.zeros_like(h)
    for t in net.arch.tasks:
        d = dlogits[t.name]
        w, _ = net.heads[t.name]
        if d.shape != (h.shape[0], w.shape[1]):
            raise ShapeError(
                f"dlogits for task {t.name} has shape {d.shape}, expected "
                f"{(h.shape[0], w.shape[1])}"
            )
        head_grads[t.name] = (matmul(h.T, d), d.sum(axis=0, keepdims=True))
        dh = dh + matmul(d, w.T)

    trunk_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.trunk)
    for layer in range(len(net.trunk) - 1, -1, -1):
        dz = dh * (cache.pre_activations[layer] > 0)
        below = cache.activations[layer - 1] if layer > 0 else cache.x
        trunk_grads[layer] = (matmul(below.T, dz), dz.sum(axis=0, keepdims=True))
        dh = matmul(dz, net.trunk[layer][0].T)
    return Gradients(trunk=trunk_grads, heads=head_grads)


def predict(net: MTLNetwork, x_batch: np.ndarray) -> dict[str, np.ndarray]:
    """Argmax class index per task; ties resolve to the lowest index."""
    logits, _ = forward(net, x_batch)
    return {t: np.argmax(l, axis=1) for t, l in logits.items()}


def _layer_to_json(w: np.ndarray, b: np.ndarray) -> dict:
    return {"w": w.tolist(), "b": b.reshape(-1).tolist()}


def _layer_from_json(obj, fan_in: int, fan_out: int, where: str):
    try:
        w = np.array(obj["w"], dtype=np.float64)
        b = np.array(obj["b"], dtype=np.float64).reshape(1, -1)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: malformed layer parameters") from exc
    if w.shape != (fan_in, fan_out) or b.shape != (1, fan_out):
        raise FormatError(
            f"{where}: parameter shapes {w.shape}/{b.shape} do not match "
            f"declared dims ({fan_in}, {fan_out})"
        )
    if not (np.isfinite(w).all() and np.isfinite(b).all()):
        raise FormatError(f"{where}: non-finite parameter values")
    return w, b


def save_network(net: MTLNetwork, path) -> None:
    """Write a single-file JSON checkpoint (format version 1)."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "arch": {
            "input_dim": net.arch.input_dim,
            "trunk_dims": list(net.arch.trunk_dims),
            "tasks": [
                {"name": t.name, "classes": list(t.classes)}
                for t in net.arch.tasks
            ],
        },
        "trunk": [_layer_to_json(w, b) for w, b in net.trunk],
        "heads": {
            t.name: _layer_to_json(*net.heads[t.name]) for t in net.arch.tasks
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_network(path) -> MTLNetwork:
    """Read a checkpoint, validating version, dims, and finiteness."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: not a valid checkpoint JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported checkpoint format version "
            f"{doc.get('format_version') if isinstance(doc, dict) else doc!r}"
        )
    try:
        arch = ArchConfig(
            input_dim=int(doc["arch"]["input_dim"]),
            trunk_dims=tuple(int(v) for v in doc["arch"]["trunk_dims"]),
            tasks=tuple(
                TaskSchema(t["name"], tuple(t["classes"]))
                for t in doc["arch"]["tasks"]
            ),
        )
        trunk_docs = doc["trunk"]
        head_docs = doc["heads"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed checkpoint structure") from exc

    if len(trunk_docs) != len(arch.trunk_dims):
        raise FormatError(
            f"{path}: {len(trunk_docs)} trunk layers for dims {arch.trunk_dims}"
        )
    trunk = []
    fan_in = arch.input_dim
    for i, (obj, width) in enumerate(zip(trunk_docs, arch.trunk_dims)):
        trunk.append(_layer_from_json(obj, fan_in, width, f"{path}: trunk[{i}]"))
        fan_in = width
    heads = {}
    for t in arch.tasks:
        if t.name not in head_docs:
            raise FormatError(f"{path}: missing head for task {t.name}")
        heads[t.name] = _layer_from_json(
            head_docs[t.name], fan_in, len(t.classes), f"{path}: head {t.name}"
        )
    return MTLNetwork(arch=arch, trunk=trunk, heads=heads)
