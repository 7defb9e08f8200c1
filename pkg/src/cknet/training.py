"""Loss, optimizer, and the training loop shared by all experiments."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .tensor import Parameter, Tensor

__all__ = [
    "TrainingError",
    "TrainConfig",
    "EpochMetrics",
    "softmax_cross_entropy",
    "Adam",
    "train",
    "evaluate",
    "metrics_to_csv",
]

# A loss beyond this is treated as divergence rather than a value to keep
# optimizing through.
LOSS_DIVERGENCE_LIMIT = 1e6


class TrainingError(RuntimeError):
    """Training cannot proceed (divergence, NaN gradients, bad inputs)."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float | None = None
    val_acc: float | None = None


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log softmax probability of the true labels.

    ``logits`` is [batch, classes]; ``labels`` an int array of length batch.
    Stabilized by row-max subtraction before exponentiation.
    """
    z = logits.data
    if z.ndim != 2:
        raise ValueError(f"logits must be [batch, classes], got shape {logits.shape}")
    labels = np.asarray(labels)
    if labels.shape != (z.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match batch {z.shape[0]}")
    if labels.min() < 0 or labels.max() >= z.shape[1]:
        raise ValueError(
            f"labels must lie in [0, {z.shape[1]}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    batch = z.shape[0]
    shifted = z - z.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    value = -log_probs[np.arange(batch), labels].mean()

    def pull(g):
        soft = np.exp(log_probs)
        soft[np.arange(batch), labels] -= 1.0
        return g * soft / batch

    return Tensor(value, _parents=((logits, pull),))


class Adam:
    """Adam with bias correction; one shared step counter for all parameters."""

    def __init__(self, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params: list[Parameter] = [p for p in params if p.trainable]
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {p.name!r}")
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1**self.t)
            v_hat = self.v[i] / (1.0 - b2**self.t)
            p.data = p.data - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def evaluate(network, inputs: np.ndarray, labels: np.ndarray, mode: str = "direct"):
    """Loss and accuracy of a frozen network on one batch."""
    logits = network.forward(inputs, mode=mode)
    loss = softmax_cross_entropy(logits, labels).item()
    predictions = logits.data.argmax(axis=1)
    return loss, float((predictions == labels).mean())


def train(network, dataset, config: TrainConfig, val=None, mode: str = "direct"):
    """Train in place; returns per-epoch metrics.

    Deterministic for a fixed (network seed, config seed, dataset): batch
    order, parameter updates, and metrics are all reproducible bitwise.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    rng = np.random.default_rng(config.seed)
    optimizer = Adam(network.parameters(), learning_rate=config.learning_rate)
    metrics: list[EpochMetrics] = []
    n = len(dataset)
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total_loss = 0.0
        total_correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch_x = dataset.inputs[idx]
            batch_y = dataset.labels[idx]
            logits = network.forward(batch_x, mode=mode)
            loss = softmax_cross_entropy(logits, batch_y)
            loss_value = loss.item()
            if not np.isfinite(loss_value) or loss_value > LOSS_DIVERGENCE_LIMIT:
                raise TrainingError(
                    f"loss diverged at epoch {epoch} (loss={loss_value!r})"
                )
            network.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += loss_value * len(idx)
            total_correct += int((logits.data.argmax(axis=1) == batch_y).sum())
        row = EpochMetrics(epoch, total_loss / n, total_correct / n)
        if val is not None:
            val_loss, val_acc = evaluate(network, val.inputs, val.labels, mode=mode)
            row = EpochMetrics(row.epoch, row.train_loss, row.train_acc, val_loss, val_acc)
        metrics.append(row)
    return metrics


def metrics_to_csv(metrics) -> str:
    """CSV rendering with columns epoch, train_loss, train_acc, val_loss, val_acc."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
    for m in metrics:
        writer.writerow(
            [
                m.epoch,
                repr(m.train_loss),
                repr(m.train_acc),
                "" if m.val_loss is None else repr(m.val_loss),
                "" if m.val_acc is None else repr(m.val_acc),
            ]
        )
    return buf.getvalue()
