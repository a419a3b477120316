"""Versioned binary checkpoints.

Layout: an 8-byte magic string, a uint32 format version, a uint64 header
length, a UTF-8 JSON header (experiment config, parameter names and shapes,
optimizer metadata), then the raw little-endian float64 parameter arrays in
registry order. When optimizer state is present, the Adam first and second
moments follow, again in registry order, so training can resume exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TTPNCKPT"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, config, net, opt=None) -> None:
    from .train import ExperimentConfig

    assert isinstance(config, ExperimentConfig)
    header = {
        "config": config.to_dict(),
        "params": [{"name": n, "shape": list(a.shape)} for n, a in net.store.items()],
        "adam": None
        if opt is None
        else {"t": opt.t, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps,
              "schedule": {"lr0": opt.schedule.lr0, "decay": opt.schedule.decay,
                           "period": opt.schedule.period}},
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(blob)))
        fh.write(blob)
        for _, arr in net.store.items():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        if opt is not None:
            for _, m, v in opt.state_arrays():
                fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())
            for _, m, v in opt.state_arrays():
                fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (config, net, opt-or-None) with parameters restored in place."""
    from .network import init
    from .optim import Adam, LrSchedule
    from .train import ExperimentConfig, resolve_spec

    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, header_len = struct.unpack("<IQ", raw[8:20])
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    try:
        header = json.loads(raw[20 : 20 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from exc
    config = ExperimentConfig.from_dict(header["config"])
    spec, _ = resolve_spec(config.model)
    net = init(spec, config.training.seed)
    names = net.store.names()
    if [p["name"] for p in header["params"]] != names:
        raise CheckpointError(f"{path}: parameter registry mismatch")

    offset = 20 + header_len

    def take(shape):
        nonlocal offset
        n = int(np.prod(shape)) if shape else 1
        end = offset + 8 * n
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated payload")
        arr = np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape)
        offset = end
        return arr

    for meta in header["params"]:
        arr = net.store[meta["name"]]
        if list(arr.shape) != meta["shape"]:
            raise CheckpointError(
                f"{path}: shape mismatch for {meta['name']}: "
                f"{meta['shape']} vs {list(arr.shape)}"
            )
        arr[...] = take(arr.shape)

    opt = None
    if header["adam"] is not None:
        meta = header["adam"]
        sched = LrSchedule(**meta["schedule"])
        opt = Adam(net.store, sched, meta["beta1"], meta["beta2"], meta["eps"])
        opt.t = int(meta["t"])
        for name in names:
            opt.m[name][...] = take(net.store[name].shape)
        for name in names:
            opt.v[name][...] = take(net.store[name].shape)
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return config, net, opt
