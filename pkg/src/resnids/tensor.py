"""Dense float64 tensors and the numeric kernels every layer is built from.

A tensor here is a C-contiguous float64 numpy array; ``as_tensor`` is the one
entry point that enforces dtype, layout and positive dimension sizes.  All
kernels are deterministic: the same inputs produce bitwise-identical outputs.
"""
from __future__ import annotations

import numpy as np

from .errors import ShapeError

Tensor = np.ndarray


def as_tensor(data, shape=None) -> Tensor:
    """Coerce ``data`` to a C-contiguous float64 array, optionally reshaped."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if shape is not None:
        arr = arr.reshape(shape)
    if any(int(s) <= 0 for s in arr.shape):
        raise ShapeError(f"dimension sizes must be positive, got {arr.shape}")
    return arr


def zeros(shape) -> Tensor:
    return as_tensor(np.zeros(shape, dtype=np.float64))


class Parameter:
    """A trainable tensor bundled with its gradient and RMSprop accumulator.

    ``value``, ``grad`` and ``rms_acc`` always share one shape; ``rms_acc``
    holds the decayed squared-gradient average and stays non-negative.
    """

    __slots__ = ("value", "grad", "rms_acc")

    def __init__(self, value):
        self.value = as_tensor(value)
        self.grad = np.zeros_like(self.value)
        self.rms_acc = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a 2-D ``[m,k]`` by ``[k,n]``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes do not chain: {a.shape} x {b.shape}")
    return a @ b


def conv_same_padding(kernel_size: int) -> tuple[int, int]:
    """(left, right) zero padding that keeps the output length equal to the
    input length; even kernels pad one extra on the trailing side."""
    return (kernel_size - 1) // 2, kernel_size // 2


def conv1d_same(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """1-D cross-correlation with "same" zero padding.

    ``x`` is ``[T,Cin]`` or batched ``[B,T,Cin]``; ``kernels`` is
    ``[K,Cin,Cout]`` and ``bias`` ``[Cout]``.  No kernel flip is applied.
    """
    kernels = np.asarray(kernels, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    single = x.ndim == 2
    xb = x[None] if single else x
    if xb.ndim != 3 or kernels.ndim != 3:
        raise ShapeError(
            f"conv1d_same expects [B,T,Cin] x [K,Cin,Cout], got {x.shape} x {kernels.shape}"
        )
    k, cin, cout = kernels.shape
    if xb.shape[2] != cin:
        raise ShapeError(
            f"input channels {xb.shape[2]} do not match kernel channels {cin}"
        )
    pad_l, pad_r = conv_same_padding(k)
    xp = np.pad(xb, ((0, 0), (pad_l, pad_r), (0, 0)))
    t = xb.shape[1]
    out = np.zeros((xb.shape[0], t, cout))
    for tap in range(k):
        # a tap whose window never overlaps real rows contributes exactly 0
        if tap + t <= pad_l or tap >= pad_l + t:
            continue
        out += xp[:, tap : tap + t, :] @ kernels[tap]
    out += bias
    return out[0] if single else out


def conv1d_same_backward(dy: Tensor, x: Tensor, kernels: Tensor):
    """Gradients of conv1d_same: returns (dx, dkernels, dbias)."""
    single = x.ndim == 2
    xb = x[None] if single else x
    dyb = dy[None] if single else dy
    k, cin, cout = kernels.shape
    pad_l, pad_r = conv_same_padding(k)
    t = xb.shape[1]
    xp = np.pad(xb, ((0, 0), (pad_l, pad_r), (0, 0)))
    dxp = np.zeros_like(xp)
    dk = np.zeros_like(kernels)
    for tap in range(k):
        if tap + t <= pad_l or tap >= pad_l + t:
            continue  # all-zero window: dk[tap] stays 0, dx untouched
        dk[tap] = np.tensordot(xp[:, tap : tap + t, :], dyb, axes=([0, 1], [0, 1]))
        dxp[:, tap : tap + t, :] += dyb @ kernels[tap].T
    db = dyb.sum(axis=(0, 1))
    dx = dxp[:, pad_l : pad_l + t, :]
    return (dx[0], dk, db) if single else (dx, dk, db)


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


def relu_grad(x: Tensor) -> Tensor:
    # derivative taken as 0 at the kink x == 0
    return np.where(x > 0.0, 1.0, 0.0)


def tanh(x: Tensor) -> Tensor:
    return np.tanh(x)


def tanh_grad(x: Tensor) -> Tensor:
    t = np.tanh(x)
    return 1.0 - t * t


def hard_sigmoid(x: Tensor) -> Tensor:
    """Piecewise-linear sigmoid: clamp(0.2*x + 0.5, 0, 1)."""
    return np.clip(0.2 * np.asarray(x, dtype=np.float64) + 0.5, 0.0, 1.0)


def hard_sigmoid_grad(x: Tensor) -> Tensor:
    # derivative taken as 0 at the kinks x == +-2.5
    return np.where((x > -2.5) & (x < 2.5), 0.2, 0.0)


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax of ``[B,C]`` logits, computed with max subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits: Tensor) -> Tensor:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, onehot: Tensor):
    """Mean cross-entropy of softmaxed ``[B,C]`` logits against one-hot rows.

    Returns ``(loss, grad_logits)`` with ``grad_logits = (softmax - onehot)/B``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    onehot = np.asarray(onehot, dtype=np.float64)
    if logits.shape != onehot.shape:
        raise ShapeError(
            f"logits shape {logits.shape} does not match labels shape {onehot.shape}"
        )
    row_sums = onehot.sum(axis=1)
    if not (np.all(row_sums == 1.0) and np.all(onehot.max(axis=1) == 1.0)):
        raise ValueError("labels must be one-hot rows summing to 1")
    b = logits.shape[0]
    logp = log_softmax(logits)
    loss = -float((onehot * logp).sum()) / b
    grad = (softmax(logits) - onehot) / b
    return loss, grad


def residual_add(main: Tensor, shortcut: Tensor) -> Tensor:
    """Elementwise sum of a block's main path and its shortcut.

    The shape check here is the enforcement point for the filter-count ==
    feature-count constraint on residual networks.
    """
    if main.shape != shortcut.shape:
        raise ShapeError(
            f"residual add requires identical shapes, got {main.shape} vs {shortcut.shape}"
        )
    return main + shortcut
