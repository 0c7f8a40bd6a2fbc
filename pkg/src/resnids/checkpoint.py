"""Versioned .npz checkpoints: network config echo, every parameter tensor,
BN running buffers, and the build seed.  Loading is bit-exact."""
from __future__ import annotations

import json

import numpy as np

from .errors import DataError
from .network import Network, NetworkConfig, build_network

CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(path, net: Network, extra_meta: dict | None = None):
    meta = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "network_config": net.config.to_dict(),
        "seed": net.config.seed,
    }
    if extra_meta:
        meta["extra"] = extra_meta
    arrays = {"__meta__": np.asarray(json.dumps(meta, sort_keys=True))}
    for name, p in net.parameters():
        arrays[f"param/{name}"] = p.value
    for name, buf in net.named_buffers():
        arrays[f"buffer/{name}"] = buf
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[Network, dict]:
    with np.load(path, allow_pickle=False) as payload:
        if "__meta__" not in payload:
            raise DataError(f"{path}: not a checkpoint file (missing metadata)")
        meta = json.loads(str(payload["__meta__"]))
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise DataError(
                f"{path}: unsupported checkpoint format "
                f"{meta.get('format_version')!r}"
            )
        cfg = NetworkConfig(**meta["network_config"])
        net = build_network(cfg)
        for name, p in net.parameters():
            key = f"param/{name}"
            if key not in payload:
                raise DataError(f"{path}: missing parameter {name!r}")
            np.copyto(p.value, payload[key])
        for name, buf in net.named_buffers():
            key = f"buffer/{name}"
            if key not in payload:
                raise DataError(f"{path}: missing buffer {name!r}")
            np.copyto(buf, payload[key])
    return net, meta
