"""RMSprop training loop, loss history, and the per-layer gradient probe.

The loop is sequential and fully deterministic for a fixed seed: batch order
comes from a generator seeded with (seed, epoch), dropout masks from the
network's own seeded streams, and every parameter receives exactly one
RMSprop update per batch.  Any non-finite loss or gradient aborts the run
with a diagnostic instead of entering the history.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .data import batch_iter
from .errors import ConfigError, NumericError, ShapeError
from .layers import Mode
from .tensor import log_softmax, softmax_cross_entropy


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 4000
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-7
    seed: int = 0
    gradient_clip: float | None = None  # global L2 norm across all grads
    record_grad_norms: bool = False

    def validate(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.rms_decay < 1.0:
            raise ConfigError(f"rms decay must be in [0,1), got {self.rms_decay}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float | None
    test_acc: float | None
    param_hash: str


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)
    grad_norms: list[tuple[int, int, str, float]] = field(default_factory=list)
    update_count: int = 0

    CSV_HEADER = "epoch,train_loss,train_acc,test_loss,test_acc"

    def to_csv(self) -> str:
        def cell(v):
            return "" if v is None else repr(float(v))

        lines = [self.CSV_HEADER]
        for e in self.epochs:
            lines.append(
                f"{e.epoch},{cell(e.train_loss)},{cell(e.train_acc)},"
                f"{cell(e.test_loss)},{cell(e.test_acc)}"
            )
        return "\n".join(lines) + "\n"

    def grad_norms_to_csv(self) -> str:
        lines = ["epoch,step,layer,grad_l2"]
        for epoch, step, layer, value in self.grad_norms:
            lines.append(f"{epoch},{step},{layer},{repr(float(value))}")
        return "\n".join(lines) + "\n"


def rmsprop_step(param, cfg: TrainConfig, name: str = "parameter"):
    """One RMSprop update; zeroes the gradient afterwards.

        acc   <- decay*acc + (1-decay)*grad^2
        value <- value - lr * grad / (sqrt(acc) + epsilon)
    """
    g = param.grad
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient in {name}")
    param.rms_acc *= cfg.rms_decay
    param.rms_acc += (1.0 - cfg.rms_decay) * g * g
    param.value -= cfg.learning_rate * g / (np.sqrt(param.rms_acc) + cfg.rms_epsilon)
    param.grad[...] = 0.0


def clip_gradients(named_params, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
    total = 0.0
    for _, p in named_params:
        total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm > 0.0:
        scale = max_norm / norm
        for _, p in named_params:
            p.grad *= scale
    return norm


def hash_parameters(net) -> str:
    """sha256 over all parameter bytes, in layer order (buffers excluded)."""
    h = hashlib.sha256()
    for name, p in net.parameters():
        h.update(name.encode())
        h.update(p.value.tobytes())
    return h.hexdigest()


def collect_gradient_norms(net) -> list[tuple[str, float]]:
    """Per-parameter-layer L2 norms of the current gradients, input->output."""
    out = []
    for lname, layer in net.parameter_layers():
        total = 0.0
        for _, p in layer.params():
            total += float((p.grad * p.grad).sum())
        out.append((lname, float(np.sqrt(total))))
    return out


def gradient_norm_probe(net, x, onehot) -> list[tuple[str, float]]:
    """Run one training-mode forward/backward on ``(x, onehot)`` and report
    each parameter layer's gradient L2 norm.  Parameters are not updated."""
    logits = net.forward_logits(x, Mode.TRAINING)
    _, dlogits = softmax_cross_entropy(logits, onehot)
    net.backward(dlogits)
    return collect_gradient_norms(net)


@dataclass
class EvalResult:
    loss: float
    accuracy: float
    pred_classes: np.ndarray
    probs: np.ndarray


def evaluate(net, features, onehot, batch_size: int = 4096) -> EvalResult:
    """Inference-mode pass in deterministic slice order."""
    n = features.shape[0]
    if n == 0:
        raise ConfigError("cannot evaluate an empty fold")
    loss_sum = 0.0
    correct = 0
    preds = np.empty(n, dtype=np.int64)
    probs = np.empty((n, onehot.shape[1]))
    for start in range(0, n, batch_size):
        sl = slice(start, min(start + batch_size, n))
        logits = net.forward_logits(features[sl], Mode.INFERENCE)
        logp = log_softmax(logits)
        loss_sum += -float((onehot[sl] * logp).sum())
        p = np.exp(logp)
        probs[sl] = p
        pred = logits.argmax(axis=1)
        preds[sl] = pred
        correct += int((pred == onehot[sl].argmax(axis=1)).sum())
    return EvalResult(loss_sum / n, correct / n, preds, probs)


def train(net, features, onehot, train_idx, test_idx=None,
          cfg: TrainConfig | None = None) -> TrainHistory:
    """Train ``net`` on the rows ``train_idx`` of an encoded dataset.

    Per epoch: seeded shuffle of the training rows, batches of
    ``cfg.batch_size`` (final short batch kept), training-mode forward,
    cross-entropy backward, one RMSprop step per parameter.  The recorded
    training loss/accuracy are the batch-size-weighted means over the epoch's
    training-mode passes; test metrics come from a separate inference pass
    over ``test_idx`` after each epoch.
    """
    cfg = cfg or TrainConfig()
    cfg.validate()
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise ConfigError("training fold is empty")
    if features.shape[1] != net.features:
        raise ShapeError(
            f"dataset width {features.shape[1]} does not match network "
            f"features {net.features}"
        )
    if test_idx is not None:
        test_idx = np.asarray(test_idx, dtype=np.int64)
        if test_idx.size == 0:
            test_idx = None

    named_params = net.parameters()
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        loss_sum = 0.0
        correct = 0
        for step, (xb, yb, _) in enumerate(
            batch_iter(features, onehot, train_idx, cfg.batch_size,
                       seed=[cfg.seed, epoch])
        ):
            logits = net.forward_logits(xb, Mode.TRAINING)
            loss, dlogits = softmax_cross_entropy(logits, yb)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch} step {step}"
                )
            net.backward(dlogits)
            if cfg.record_grad_norms:
                for lname, norm in collect_gradient_norms(net):
                    history.grad_norms.append((epoch, step, lname, norm))
            if cfg.gradient_clip is not None:
                clip_gradients(named_params, cfg.gradient_clip)
            for name, p in named_params:
                rmsprop_step(p, cfg, name)
                history.update_count += 1
            b = xb.shape[0]
            loss_sum += loss * b
            correct += int(
                (logits.argmax(axis=1) == yb.argmax(axis=1)).sum()
            )
        n_train = train_idx.size
        test_loss = test_acc = None
        if test_idx is not None:
            res = evaluate(net, features[test_idx], onehot[test_idx])
            test_loss, test_acc = res.loss, res.accuracy
        history.epochs.append(
            EpochStats(
                epoch=epoch,
                train_loss=loss_sum / n_train,
                train_acc=correct / n_train,
                test_loss=test_loss,
                test_acc=test_acc,
                param_hash=hash_parameters(net),
            )
        )
    return history
