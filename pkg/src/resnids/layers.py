"""Layers with explicit forward/backward passes over [B,T,C] activations.

Every layer keeps the intermediates its backward pass needs in ``_cache``;
the cache is written only by a training-mode forward and consumed exactly
once by ``backward``.  Inference-mode forwards are pure: no cache, no buffer
updates, bitwise-repeatable outputs.  ``backward`` overwrites parameter
gradients (one fill per step), it never accumulates across steps.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

from .errors import ShapeError
from .tensor import (
    Parameter,
    conv1d_same,
    conv1d_same_backward,
    hard_sigmoid,
    hard_sigmoid_grad,
    relu,
    relu_grad,
    tanh_grad,
)


class Mode(Enum):
    TRAINING = "training"
    INFERENCE = "inference"


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class: parameter-free, stateless layers override forward/backward."""

    def __init__(self):
        self._cache = None

    def params(self) -> list[tuple[str, Parameter]]:
        return []

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def forward(self, x, mode: Mode):
        raise NotImplementedError

    def backward(self, dy):
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise RuntimeError(
                f"{type(self).__name__}.backward called without a live "
                "training-mode forward"
            )
        cache, self._cache = self._cache, None
        return cache


class BatchNorm(Layer):
    """Per-channel batch normalization over the batch and time axes.

    Training normalizes with batch statistics (biased variance over the
    B*T samples) and updates the running buffers as
    ``running = momentum*running + (1-momentum)*batch``; inference uses the
    running buffers.  Defaults: momentum 0.99, epsilon 1e-5, running stats
    initialized to mean 0 / variance 1.
    """

    def __init__(self, channels: int, momentum: float = 0.99, eps: float = 1e-5):
        super().__init__()
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def params(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, mode: Mode):
        if x.ndim != 3 or x.shape[2] != self.channels:
            raise ShapeError(
                f"batchnorm expects [B,T,{self.channels}], got {x.shape}"
            )
        if mode is Mode.TRAINING:
            n = x.shape[0] * x.shape[1]
            if n < 2:
                raise ShapeError(
                    f"batchnorm needs B*T >= 2 in training mode, got B*T = {n}"
                )
            mean = x.mean(axis=(0, 1))
            var = x.var(axis=(0, 1))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mean) * inv_std
            self.running_mean *= self.momentum
            self.running_mean += (1.0 - self.momentum) * mean
            self.running_var *= self.momentum
            self.running_var += (1.0 - self.momentum) * var
            self._cache = (xhat, inv_std, n)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean) * inv_std
        return self.gamma.value * xhat + self.beta.value

    def backward(self, dy):
        xhat, inv_std, n = self._take_cache()
        self.gamma.grad = (dy * xhat).sum(axis=(0, 1))
        self.beta.grad = dy.sum(axis=(0, 1))
        dxhat = dy * self.gamma.value
        dx = (inv_std / n) * (
            n * dxhat
            - dxhat.sum(axis=(0, 1))
            - xhat * (dxhat * xhat).sum(axis=(0, 1))
        )
        return dx


class Conv1d(Layer):
    """1-D cross-correlation with "same" padding so T is preserved."""

    def __init__(self, channels_in: int, channels_out: int, kernel_size: int,
                 rng: np.random.Generator):
        super().__init__()
        if kernel_size < 1:
            raise ShapeError(f"kernel size must be >= 1, got {kernel_size}")
        self.kernel_size = kernel_size
        self.kernel = Parameter(
            glorot_uniform(
                rng,
                (kernel_size, channels_in, channels_out),
                fan_in=kernel_size * channels_in,
                fan_out=kernel_size * channels_out,
            )
        )
        self.bias = Parameter(np.zeros(channels_out))

    def params(self):
        return [("kernel", self.kernel), ("bias", self.bias)]

    def forward(self, x, mode: Mode):
        y = conv1d_same(x, self.kernel.value, self.bias.value)
        if mode is Mode.TRAINING:
            self._cache = x
        return y

    def backward(self, dy):
        x = self._take_cache()
        dx, dk, db = conv1d_same_backward(dy, x, self.kernel.value)
        self.kernel.grad = dk
        self.bias.grad = db
        return dx


class ReLU(Layer):
    def forward(self, x, mode: Mode):
        if mode is Mode.TRAINING:
            self._cache = x
        return relu(x)

    def backward(self, dy):
        return dy * relu_grad(self._take_cache())


class MaxPool1d(Layer):
    """Windowed maximum over time.

    With the defaults (pool=2, stride=1, same padding) the output length
    equals the input length, and at T=1 the layer is the identity.  Padding
    uses -inf so padded positions never win; backward routes the gradient to
    the first argmax of each window.
    """

    def __init__(self, pool: int = 2, stride: int = 1, same_pad: bool = True):
        super().__init__()
        if pool < 1:
            raise ShapeError(f"pool size must be >= 1, got {pool}")
        self.pool = pool
        self.stride = stride
        self.same_pad = same_pad

    def _geometry(self, t: int) -> tuple[int, int, int]:
        """(out_len, pad_left, pad_right) for input length ``t``."""
        if self.same_pad:
            out = -(-t // self.stride)  # ceil
            pad_total = max((out - 1) * self.stride + self.pool - t, 0)
            pad_l = pad_total // 2
            return out, pad_l, pad_total - pad_l
        if t < self.pool:
            raise ShapeError(
                f"pool window {self.pool} exceeds unpadded length {t}"
            )
        return (t - self.pool) // self.stride + 1, 0, 0

    def forward(self, x, mode: Mode):
        b, t, c = x.shape
        out_len, pad_l, pad_r = self._geometry(t)
        xp = np.pad(x, ((0, 0), (pad_l, pad_r), (0, 0)), constant_values=-np.inf)
        windows = np.lib.stride_tricks.sliding_window_view(xp, self.pool, axis=1)
        windows = windows[:, :: self.stride][:, :out_len]  # [B, out, C, pool]
        arg = windows.argmax(axis=3)  # first occurrence on ties
        y = np.take_along_axis(windows, arg[..., None], axis=3)[..., 0]
        if mode is Mode.TRAINING:
            self._cache = (arg, t, pad_l, pad_r)
        return np.ascontiguousarray(y)

    def backward(self, dy):
        arg, t, pad_l, pad_r = self._take_cache()
        b, out_len, c = dy.shape
        dxp = np.zeros((b, t + pad_l + pad_r, c))
        bi, oi, ci = np.indices((b, out_len, c), sparse=False)
        np.add.at(dxp, (bi, oi * self.stride + arg, ci), dy)
        return dxp[:, pad_l : pad_l + t, :]


class GRU(Layer):
    """Gated recurrent unit over [B,T,Cin] -> [B,T,H], h0 = 0.

    Per timestep, with hard-sigmoid gates and tanh candidate:

        z = hs(x Wz + h Uz + bz)
        r = hs(x Wr + h Ur + br)
        c = tanh(x Wh + (r*h) Uh + bh)
        h' = (1 - z)*h + z*c

    Backward runs full BPTT over all T steps.
    """

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size

        def w(shape):
            return Parameter(glorot_uniform(rng, shape, shape[0], shape[1]))

        self.wz = w((input_size, hidden_size))
        self.wr = w((input_size, hidden_size))
        self.wh = w((input_size, hidden_size))
        self.uz = w((hidden_size, hidden_size))
        self.ur = w((hidden_size, hidden_size))
        self.uh = w((hidden_size, hidden_size))
        self.bz = Parameter(np.zeros(hidden_size))
        self.br = Parameter(np.zeros(hidden_size))
        self.bh = Parameter(np.zeros(hidden_size))

    def params(self):
        return [
            ("wz", self.wz), ("wr", self.wr), ("wh", self.wh),
            ("uz", self.uz), ("ur", self.ur), ("uh", self.uh),
            ("bz", self.bz), ("br", self.br), ("bh", self.bh),
        ]

    def forward(self, x, mode: Mode):
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise ShapeError(
                f"gru expects [B,T,{self.input_size}], got {x.shape}"
            )
        b, t, _ = x.shape
        h = np.zeros((b, self.hidden_size))
        out = np.empty((b, t, self.hidden_size))
        steps = []
        for i in range(t):
            xt = x[:, i, :]
            az = xt @ self.wz.value + h @ self.uz.value + self.bz.value
            ar = xt @ self.wr.value + h @ self.ur.value + self.br.value
            z = hard_sigmoid(az)
            r = hard_sigmoid(ar)
            ah = xt @ self.wh.value + (r * h) @ self.uh.value + self.bh.value
            c = np.tanh(ah)
            h_new = (1.0 - z) * h + z * c
            if mode is Mode.TRAINING:
                steps.append((xt, h, az, ar, ah, z, r, c))
            out[:, i, :] = h_new
            h = h_new
        if mode is Mode.TRAINING:
            self._cache = (steps, x.shape)
        return out

    def backward(self, dy):
        steps, x_shape = self._take_cache()
        b, t, _ = x_shape
        dx = np.zeros(x_shape)
        grads = {name: np.zeros_like(p.value) for name, p in self.params()}
        dh_next = np.zeros((b, self.hidden_size))
        for i in reversed(range(t)):
            xt, h_prev, az, ar, ah, z, r, c = steps[i]
            dh = dy[:, i, :] + dh_next
            dz = dh * (c - h_prev)
            dc = dh * z
            dh_prev = dh * (1.0 - z)

            dah = dc * tanh_grad(ah)
            grads["wh"] += xt.T @ dah
            grads["uh"] += (r * h_prev).T @ dah
            grads["bh"] += dah.sum(axis=0)
            drh = dah @ self.uh.value.T
            dxt = dah @ self.wh.value.T
            dr = drh * h_prev
            dh_prev += drh * r

            daz = dz * hard_sigmoid_grad(az)
            grads["wz"] += xt.T @ daz
            grads["uz"] += h_prev.T @ daz
            grads["bz"] += daz.sum(axis=0)
            dxt += daz @ self.wz.value.T
            dh_prev += daz @ self.uz.value.T

            dar = dr * hard_sigmoid_grad(ar)
            grads["wr"] += xt.T @ dar
            grads["ur"] += h_prev.T @ dar
            grads["br"] += dar.sum(axis=0)
            dxt += dar @ self.wr.value.T
            dh_prev += dar @ self.ur.value.T

            dx[:, i, :] = dxt
            dh_next = dh_prev
        for name, p in self.params():
            p.grad = grads[name]
        return dx


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-rate) during training
    so the inference pass is the identity."""

    def __init__(self, rate: float, rng: np.random.Generator):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng

    def forward(self, x, mode: Mode):
        if mode is Mode.INFERENCE:
            return x
        keep = self.rng.random(x.shape) >= self.rate
        scale = 1.0 / (1.0 - self.rate)
        self._cache = (keep, scale)
        return x * keep * scale

    def backward(self, dy):
        keep, scale = self._take_cache()
        return dy * keep * scale


class Reshape(Layer):
    """Pure per-sample view change; the batch axis is untouched."""

    def __init__(self, target_shape: tuple[int, ...]):
        super().__init__()
        self.target_shape = tuple(target_shape)

    def forward(self, x, mode: Mode):
        sample_size = int(np.prod(x.shape[1:]))
        if sample_size != int(np.prod(self.target_shape)):
            raise ShapeError(
                f"cannot reshape sample of {x.shape[1:]} to {self.target_shape}"
            )
        if mode is Mode.TRAINING:
            self._cache = x.shape
        return x.reshape((x.shape[0],) + self.target_shape)

    def backward(self, dy):
        return dy.reshape(self._take_cache())


class GlobalAvgPool(Layer):
    """Mean over the time axis: [B,T,C] -> [B,C]."""

    def forward(self, x, mode: Mode):
        if mode is Mode.TRAINING:
            self._cache = x.shape
        return x.mean(axis=1)

    def backward(self, dy):
        shape = self._take_cache()
        return np.broadcast_to(dy[:, None, :] / shape[1], shape).copy()


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Parameter(
            glorot_uniform(rng, (in_features, out_features), in_features, out_features)
        )
        self.bias = Parameter(np.zeros(out_features))

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x, mode: Mode):
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise ShapeError(
                f"dense expects [B,{self.weight.shape[0]}], got {x.shape}"
            )
        if mode is Mode.TRAINING:
            self._cache = x
        return x @ self.weight.value + self.bias.value

    def backward(self, dy):
        x = self._take_cache()
        self.weight.grad = x.T @ dy
        self.bias.grad = dy.sum(axis=0)
        return dy @ self.weight.value.T
