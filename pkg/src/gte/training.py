"""Optimization loop: Adam, cross-entropy, early stopping, checkpoints."""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fusion import ImageFeature
from .models import CLASS_ORDER, ModelConfig, build_model
from .tensor import ComputationTape, Tensor, log_softmax, mul, mean, stack, tensor_sum

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"GTEC"
CHECKPOINT_VERSION = 1

_CLASS_INDEX = {label: i for i, label in enumerate(CLASS_ORDER)}


class OptimizationError(RuntimeError):
    """Raised when a training step cannot proceed (non-finite gradients)."""


class CheckpointError(RuntimeError):
    """Raised for unreadable, mismatched, or truncated checkpoint files."""


@dataclass
class TrainingExample:
    """One labeled pair, with an optional aligned image feature."""

    premise: list
    hypothesis: list
    label: str
    image: Optional[ImageFeature] = None
    pair_id: str = ""


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    train_accuracy: float
    dev_accuracy: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "loss": self.loss,
            "train_accuracy": self.train_accuracy,
            "dev_accuracy": self.dev_accuracy,
        }


@dataclass
class TrainingResult:
    history: list
    best_epoch: Optional[int]
    best_dev_accuracy: Optional[float]
    stopped_early: bool

    @property
    def epochs_run(self) -> int:
        return len(self.history)


class AdamOptimizer:
    """Bias-corrected Adam over a fixed list of named parameters.

    Optional global-norm gradient clipping is supported but disabled unless
    ``clip_norm`` is given.
    """

    def __init__(
        self,
        named_parameters,
        learning_rate: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        clip_norm: Optional[float] = None,
    ):
        self._named = list(named_parameters)
        if not self._named:
            raise ValueError("optimizer needs at least one parameter")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.clip_norm = clip_norm
        self.step_count = 0
        self._m = [np.zeros_like(t.data) for _, t in self._named]
        self._v = [np.zeros_like(t.data) for _, t in self._named]

    def zero_grad(self) -> None:
        for _, t in self._named:
            t.zero_grad()

    def _clip(self) -> None:
        total = 0.0
        for _, t in self._named:
            total += float(np.sum(t.grad * t.grad))
        norm = np.sqrt(total)
        if norm > self.clip_norm and norm > 0.0:
            scale = self.clip_norm / norm
            for _, t in self._named:
                t.grad *= scale

    def step(self) -> None:
        for name, t in self._named:
            if not np.all(np.isfinite(t.grad)):
                raise OptimizationError(f"non-finite gradient for parameter {name!r}")
        if self.clip_norm is not None:
            self._clip()
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for i, (_, t) in enumerate(self._named):
            g = t.grad
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self._m[i] / correction1
            v_hat = self._v[i] / correction2
            t.data -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


def cross_entropy(logits: Tensor, gold_index: int) -> Tensor:
    """Negative log-likelihood of the gold class under softmax(logits)."""
    pick = np.zeros(logits.shape[0])
    pick[gold_index] = -1.0
    return tensor_sum(mul(log_softmax(logits), Tensor(pick)))


def _validate_example(example: TrainingExample, config: ModelConfig) -> Optional[str]:
    if example.label not in _CLASS_INDEX:
        return f"unknown label {example.label!r}"
    if not example.hypothesis:
        return "empty hypothesis"
    if config.uses_premise and not example.premise:
        return "empty premise"
    if config.required_variant is not None:
        if example.image is None:
            return "missing image feature"
        if example.image.variant != config.required_variant:
            return (
                f"image variant {example.image.variant!r} does not match "
                f"required {config.required_variant!r}"
            )
    return None


def _usable(dataset, config: ModelConfig) -> list:
    kept = []
    for example in dataset:
        problem = _validate_example(example, config)
        if problem is None:
            kept.append(example)
        else:
            logger.warning("skipping record %s: %s", example.pair_id or "<unnamed>", problem)
    return kept


def train_epoch(model, dataset, optimizer, batch_size: int = 64, rng=None) -> EpochMetrics:
    """One seeded-shuffle pass; returns mean loss and training accuracy."""
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    examples = _usable(dataset, model.config)
    if not examples:
        raise OptimizationError("no valid training examples in dataset")
    order = rng.permutation(len(examples))
    total_loss = 0.0
    correct = 0
    for start in range(0, len(order), batch_size):
        batch = [examples[i] for i in order[start : start + batch_size]]
        losses = []
        with ComputationTape() as tape:
            for example in batch:
                logits = model.forward(
                    example.premise, example.hypothesis, example.image,
                    train=True, rng=rng,
                )
                gold = _CLASS_INDEX[example.label]
                losses.append(cross_entropy(logits, gold))
                total_loss += float(losses[-1].data)
                if int(np.argmax(logits.data)) == gold:
                    correct += 1
            optimizer.zero_grad()
            tape.backward(mean(stack(losses)))
        optimizer.step()
    n = len(examples)
    return EpochMetrics(epoch=0, loss=total_loss / n, train_accuracy=correct / n)


def evaluate_accuracy(model, dataset) -> float:
    """Dropout-free accuracy over every valid example."""
    examples = _usable(dataset, model.config)
    if not examples:
        raise OptimizationError("no valid examples to evaluate")
    correct = 0
    for example in examples:
        pred = model.predict(example.premise, example.hypothesis, example.image)
        if pred.label == example.label:
            correct += 1
    return correct / len(examples)


def snapshot_parameters(model) -> dict:
    return {name: t.data.copy() for name, t in model.named_parameters()}


def restore_parameters(model, snapshot: dict) -> None:
    for name, t in model.named_parameters():
        saved = snapshot[name]
        if saved.shape != t.data.shape:
            raise ValueError(f"snapshot shape mismatch for {name!r}")
        t.data[...] = saved


class EarlyStopMonitor:
    """Stops a run once dev accuracy sits strictly below the best for
    ``patience`` consecutive epochs; remembers the best parameters."""

    def __init__(self, patience: int = 3):
        if patience < 1:
            raise ValueError("patience must be positive")
        self.patience = patience
        self.best_accuracy: Optional[float] = None
        self.best_epoch: Optional[int] = None
        self.epochs_below = 0
        self._best_snapshot: Optional[dict] = None

    def update(self, dev_accuracy: float, model=None, epoch: Optional[int] = None) -> bool:
        """Record one epoch's dev accuracy; True means stop now."""
        if self.best_accuracy is None or dev_accuracy > self.best_accuracy:
            self.best_accuracy = dev_accuracy
            self.best_epoch = epoch
            self.epochs_below = 0
            if model is not None:
                self._best_snapshot = snapshot_parameters(model)
            return False
        if dev_accuracy < self.best_accuracy:
            self.epochs_below += 1
        else:
            # Matching the best exactly breaks the strictly-below streak.
            self.epochs_below = 0
        return self.epochs_below >= self.patience

    def restore_best(self, model) -> None:
        if self._best_snapshot is None:
            raise ValueError("no best snapshot recorded")
        restore_parameters(model, self._best_snapshot)


def train_model(
    model,
    train_set,
    dev_set=None,
    *,
    epochs: int,
    batch_size: int = 64,
    seed: int = 0,
    learning_rate: float = 0.001,
    clip_norm: Optional[float] = None,
    patience: int = 3,
    log_path=None,
) -> TrainingResult:
    """Full training loop with optional dev-set early stopping.

    With a dev set, training stops once accuracy has been strictly below the
    running best for ``patience`` consecutive epochs, and the best epoch's
    parameters are restored before returning.
    """
    if epochs < 1:
        raise ValueError("epochs must be positive")
    optimizer = AdamOptimizer(
        model.named_parameters(), learning_rate=learning_rate, clip_norm=clip_norm
    )
    monitor = EarlyStopMonitor(patience=patience) if dev_set is not None else None
    master = np.random.default_rng(seed)
    history = []
    stopped = False
    log_handle = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, epochs + 1):
            epoch_rng = np.random.default_rng(master.integers(0, 2**63))
            metrics = train_epoch(model, train_set, optimizer, batch_size, epoch_rng)
            metrics.epoch = epoch
            if dev_set is not None:
                metrics.dev_accuracy = evaluate_accuracy(model, dev_set)
            history.append(metrics)
            if log_handle:
                log_handle.write(json.dumps(metrics.to_dict()) + "\n")
                log_handle.flush()
            if monitor is not None and monitor.update(metrics.dev_accuracy, model, epoch):
                stopped = True
                break
    finally:
        if log_handle:
            log_handle.close()
    if monitor is not None and monitor._best_snapshot is not None:
        monitor.restore_best(model)
    return TrainingResult(
        history=history,
        best_epoch=monitor.best_epoch if monitor else None,
        best_dev_accuracy=monitor.best_accuracy if monitor else None,
        stopped_early=stopped,
    )


# ---------------------------------------------------------------------------
# Checkpoint format: magic, version, length-prefixed JSON metadata, then each
# parameter's payload as little-endian float64 in metadata-declared order.
# ---------------------------------------------------------------------------


def save_checkpoint(path, model, extra_metadata: Optional[dict] = None) -> None:
    named = model.named_parameters()
    metadata = {
        "config": model.config.to_dict(),
        "parameters": [{"name": n, "shape": list(t.shape)} for n, t in named],
    }
    if extra_metadata:
        metadata["extra"] = extra_metadata
    blob = json.dumps(metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, t in named:
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise CheckpointError(f"truncated checkpoint: could not read {what}")
    return data


def load_checkpoint(path, expected_architecture: Optional[str] = None):
    """Rebuild a model from a checkpoint; returns (model, metadata).

    All payloads are read and validated before any parameter is assigned, so
    a failed load never leaves a partially initialized model behind.
    """
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a model checkpoint")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        try:
            metadata = json.loads(_read_exact(fh, meta_len, "metadata").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint metadata: {exc}") from exc
        try:
            config = ModelConfig.from_dict(metadata["config"])
            declared = metadata["parameters"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"invalid checkpoint metadata: {exc}") from exc
        if expected_architecture is not None:
            expected = ModelConfig.canonical_architecture(expected_architecture)
            if config.architecture != expected:
                raise CheckpointError(
                    f"checkpoint holds a {config.architecture!r} model, "
                    f"expected {expected!r}"
                )
        model = build_model(config)
        named = model.named_parameters()
        if [d["name"] for d in declared] != [n for n, _ in named]:
            raise CheckpointError("checkpoint parameter names do not match the config")
        payloads = []
        for (name, t), d in zip(named, declared):
            shape = tuple(d["shape"])
            if shape != t.shape:
                raise CheckpointError(f"shape mismatch for parameter {name!r}")
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = _read_exact(fh, count * 8, f"payload of {name!r}")
            payloads.append(np.frombuffer(raw, dtype="<f8").reshape(shape))
        if fh.read(1):
            raise CheckpointError("trailing bytes after declared payloads")
    for (name, t), arr in zip(named, payloads):
        t.data[...] = arr
    return model, metadata
