"""Compose plain and residual CNN+GRU blocks into trainable networks.

A block is the parameter-layer quartet BN -> Conv1d(+ReLU) -> MaxPool ->
BN -> Reshape -> GRU, closed by Dropout.  Residual blocks add a shortcut
from the first BN's output onto the GRU output (before Dropout by default).
A network of ``b`` blocks plus the global-average-pool/dense head therefore
counts 4*b + 1 parameter layers: 5 blocks -> 21, 10 blocks -> 41.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigError, ShapeError
from .layers import (
    BatchNorm,
    Conv1d,
    Dense,
    Dropout,
    GRU,
    GlobalAvgPool,
    MaxPool1d,
    Mode,
    ReLU,
    Reshape,
)
from .tensor import residual_add, softmax

PLAIN = "plain"
RESIDUAL = "residual"

# CLI / compare tokens for the four reference depths
NAMED_ARCHS = {
    "plain21": (PLAIN, 5),
    "res21": (RESIDUAL, 5),
    "plain41": (PLAIN, 10),
    "res41": (RESIDUAL, 10),
}


@dataclass(frozen=True)
class BlockSpec:
    """One block's geometry.  ``filters`` and ``recurrent_units`` must both
    equal the block's input channel count or the shortcut add cannot close."""

    kind: str
    filters: int
    kernel: int
    recurrent_units: int
    dropout_rate: float
    add_before_dropout: bool = True
    shortcut_source: str = "bn1"  # "bn1" | "bn2"

    def validate(self, input_channels: int):
        if self.kind not in (PLAIN, RESIDUAL):
            raise ConfigError(f"unknown block kind {self.kind!r}")
        if self.shortcut_source not in ("bn1", "bn2"):
            raise ConfigError(f"unknown shortcut source {self.shortcut_source!r}")
        if not (self.filters == self.recurrent_units == input_channels):
            raise ConfigError(
                "filters and recurrent units must equal the input channel "
                f"count: filters={self.filters}, recurrent_units="
                f"{self.recurrent_units}, input_channels={input_channels}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0,1), got {self.dropout_rate}")


@dataclass(frozen=True)
class NetworkConfig:
    """Declarative description of a stacked network.

    ``features`` is the encoded input width; the per-step layout is
    ``(input_time, features/input_time)`` with the default T=1 keeping all
    features as channels of a single timestep.
    """

    blocks: int
    kind: str
    features: int
    classes: int
    kernel: int = 10
    dropout_rate: float = 0.6
    input_time: int = 1
    seed: int = 0
    filters: int | None = None          # defaults to the channel count
    recurrent_units: int | None = None  # defaults to the channel count
    add_before_dropout: bool = True
    shortcut_source: str = "bn1"

    @property
    def channels(self) -> int:
        return self.features // self.input_time

    def validate(self):
        if self.blocks < 1:
            raise ConfigError(f"blocks must be >= 1, got {self.blocks}")
        if self.classes < 2:
            raise ConfigError(f"classes must be >= 2, got {self.classes}")
        if self.input_time < 1 or self.features % self.input_time:
            raise ConfigError(
                f"input_time {self.input_time} must divide features {self.features}"
            )
        self.block_spec().validate(self.channels)

    def block_spec(self) -> BlockSpec:
        c = self.channels
        return BlockSpec(
            kind=self.kind,
            filters=self.filters if self.filters is not None else c,
            kernel=self.kernel,
            recurrent_units=(
                self.recurrent_units if self.recurrent_units is not None else c
            ),
            dropout_rate=self.dropout_rate,
            add_before_dropout=self.add_before_dropout,
            shortcut_source=self.shortcut_source,
        )

    def to_dict(self) -> dict:
        return asdict(self)


class Block:
    """BN1 -> Conv -> ReLU -> MaxPool -> BN2 -> Reshape -> GRU (-> +shortcut)
    -> Dropout."""

    def __init__(self, spec: BlockSpec, time_steps: int, rng: np.random.Generator,
                 dropout_rng: np.random.Generator):
        self.spec = spec
        f = spec.filters
        self.bn1 = BatchNorm(f)
        self.conv = Conv1d(f, f, spec.kernel, rng)
        self.relu = ReLU()
        self.pool = MaxPool1d(pool=2, stride=1, same_pad=True)
        self.bn2 = BatchNorm(f)
        self.reshape = Reshape((time_steps, f))
        self.gru = GRU(f, spec.recurrent_units, rng)
        self.dropout = Dropout(spec.dropout_rate, dropout_rng)
        self.residual = spec.kind == RESIDUAL

    def parameter_layers(self) -> list[tuple[str, object]]:
        return [("bn1", self.bn1), ("conv", self.conv), ("bn2", self.bn2),
                ("gru", self.gru)]

    def forward(self, x, mode: Mode):
        a1 = self.bn1.forward(x, mode)
        h = self.conv.forward(a1, mode)
        h = self.relu.forward(h, mode)
        h = self.pool.forward(h, mode)
        a2 = self.bn2.forward(h, mode)
        h = self.reshape.forward(a2, mode)
        h = self.gru.forward(h, mode)
        shortcut = a1 if self.spec.shortcut_source == "bn1" else a2
        if self.residual and self.spec.add_before_dropout:
            h = residual_add(h, shortcut)
        h = self.dropout.forward(h, mode)
        if self.residual and not self.spec.add_before_dropout:
            h = residual_add(h, shortcut)
        return h

    def backward(self, dy):
        d_short = None
        if self.residual and not self.spec.add_before_dropout:
            d_short = dy  # add backward: pass-through to both branches
        dy = self.dropout.backward(dy)
        if self.residual and self.spec.add_before_dropout:
            d_short = dy
        d = self.gru.backward(dy)
        d = self.reshape.backward(d)
        if d_short is not None and self.spec.shortcut_source == "bn2":
            d = d + d_short
            d_short = None
        d = self.bn2.backward(d)
        d = self.pool.backward(d)
        d = self.relu.backward(d)
        d = self.conv.backward(d)
        if d_short is not None:
            d = d + d_short
        return self.bn1.backward(d)


class Network:
    """Instantiated block stack with a global-average-pool + dense head."""

    def __init__(self, config: NetworkConfig):
        config.validate()
        self.config = config
        spec = config.block_spec()
        init_rng = np.random.default_rng([config.seed, 0x1217])
        self.blocks = [
            Block(spec, config.input_time, init_rng,
                  np.random.default_rng([config.seed, 0xD0, i]))
            for i in range(config.blocks)
        ]
        self.gap = GlobalAvgPool()
        self.dense = Dense(config.channels, config.classes, init_rng)
        self._forward_mode = None

    @property
    def features(self) -> int:
        return self.config.features

    @property
    def classes(self) -> int:
        return self.config.classes

    @property
    def name(self) -> str:
        return f"{self.config.kind}-{self.parameter_layer_count}"

    def parameter_layers(self) -> list[tuple[str, object]]:
        out = []
        for i, block in enumerate(self.blocks):
            for lname, layer in block.parameter_layers():
                out.append((f"block{i + 1}/{lname}", layer))
        out.append(("head/dense", self.dense))
        return out

    @property
    def parameter_layer_count(self) -> int:
        return len(self.parameter_layers())

    def parameters(self) -> list[tuple[str, object]]:
        out = []
        for lname, layer in self.parameter_layers():
            for pname, p in layer.params():
                out.append((f"{lname}/{pname}", p))
        return out

    def named_buffers(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for lname, layer in self.parameter_layers():
            for bname, buf in layer.buffers().items():
                out.append((f"{lname}/{bname}", buf))
        return out

    def num_scalar_parameters(self) -> int:
        return sum(p.value.size for _, p in self.parameters())

    def _shape_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        cfg = self.config
        if x.ndim == 2:
            if x.shape[1] != cfg.features:
                raise ShapeError(
                    f"batch has {x.shape[1]} features, network expects {cfg.features}"
                )
            return x.reshape(x.shape[0], cfg.input_time, cfg.channels)
        if x.ndim == 3:
            if x.shape[1:] != (cfg.input_time, cfg.channels):
                raise ShapeError(
                    f"batch layout {x.shape[1:]} does not match "
                    f"({cfg.input_time}, {cfg.channels})"
                )
            return x
        raise ShapeError(f"expected a 2-D or 3-D batch, got shape {x.shape}")

    def forward_logits(self, x, mode: Mode):
        h = self._shape_input(x)
        for block in self.blocks:
            h = block.forward(h, mode)
        h = self.gap.forward(h, mode)
        logits = self.dense.forward(h, mode)
        self._forward_mode = mode
        return logits

    def forward(self, x, mode: Mode = Mode.INFERENCE):
        """Class probabilities [B, classes]; rows sum to 1."""
        return softmax(self.forward_logits(x, mode))

    def backward(self, dlogits):
        if self._forward_mode is not Mode.TRAINING:
            raise RuntimeError(
                "backward requires a preceding training-mode forward"
            )
        self._forward_mode = None
        d = self.dense.backward(dlogits)
        d = self.gap.backward(d)
        for block in reversed(self.blocks):
            d = block.backward(d)
        return d.reshape(d.shape[0], self.config.features)


def build_block(spec: BlockSpec, time_steps: int = 1, seed: int = 0) -> Block:
    spec.validate(spec.filters)
    return Block(
        spec,
        time_steps,
        np.random.default_rng([seed, 0x1217]),
        np.random.default_rng([seed, 0xD0, 0]),
    )


def build_network(config: NetworkConfig) -> Network:
    return Network(config)


def build_named(arch: str, features: int, classes: int, seed: int = 0,
                **overrides) -> Network:
    """Build one of the four reference networks by token (plain21, res21,
    plain41, res41)."""
    if arch not in NAMED_ARCHS:
        raise ConfigError(
            f"unknown architecture {arch!r}; expected one of {sorted(NAMED_ARCHS)}"
        )
    kind, blocks = NAMED_ARCHS[arch]
    cfg = NetworkConfig(blocks=blocks, kind=kind, features=features,
                        classes=classes, seed=seed, **overrides)
    return build_network(cfg)
