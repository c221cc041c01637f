"""Versioned binary checkpoints.

Layout (little endian)::

    magic        8 bytes   b"HSKCKPT\\0"
    format       u32       CHECKPOINT_VERSION
    spec hash    32 bytes  sha256 of the MlpSpec plus observation layout
    global step  u64
    version      u64       parameter version counter
    n params     u64
    params       n * f64
    meta len     u32, then UTF-8 JSON (sorted keys)
    opt arrays   u32 count, then per array: u32 name len, name, u64 len, f64 data
    opt step     u64       optimizer step counter
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict

import numpy as np

from .mlp import MlpSpec, PolicyParams

MAGIC = b"HSKCKPT\0"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


def spec_hash(spec: MlpSpec, obs_layout: str = "") -> bytes:
    doc = json.dumps({"spec": asdict(spec), "obs_layout": obs_layout}, sort_keys=True)
    return hashlib.sha256(doc.encode()).digest()


def save_checkpoint(path, params: PolicyParams, global_step: int, meta: dict | None = None,
                    obs_layout: str = "") -> None:
    meta = dict(meta or {})
    meta.setdefault("spec", asdict(params.spec))
    meta.setdefault("obs_layout", obs_layout)
    blob = json.dumps(meta, sort_keys=True).encode()
    parts = [
        MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        spec_hash(params.spec, obs_layout),
        struct.pack("<QQQ", int(global_step), int(params.version), params.flat.size),
        params.flat.astype("<f8").tobytes(),
        struct.pack("<I", len(blob)),
        blob,
    ]
    arrays = sorted((k, v) for k, v in params.opt_state.items() if isinstance(v, np.ndarray))
    parts.append(struct.pack("<I", len(arrays)))
    for name, arr in arrays:
        nb = name.encode()
        parts += [struct.pack("<I", len(nb)), nb, struct.pack("<Q", arr.size), arr.astype("<f8").tobytes()]
    parts.append(struct.pack("<Q", int(params.opt_state.get("t", 0))))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.off = data, 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path, expected_hash: bytes | None = None):
    """Returns ``(params, global_step, meta, spec_hash)``."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(8) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    (fmt,) = r.unpack("<I")
    if fmt != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format {fmt}")
    digest = r.take(32)
    if expected_hash is not None and digest != expected_hash:
        raise CheckpointError(f"{path}: spec hash mismatch")
    step, version, n = r.unpack("<QQQ")
    flat = np.frombuffer(r.take(8 * n), dtype="<f8").astype(np.float64)
    (mlen,) = r.unpack("<I")
    meta = json.loads(r.take(mlen).decode())
    spec = MlpSpec(**meta["spec"])
    if spec_hash(spec, meta.get("obs_layout", "")) != digest:
        raise CheckpointError(f"{path}: header hash does not match stored spec")
    opt = {}
    (count,) = r.unpack("<I")
    for _ in range(count):
        (ln,) = r.unpack("<I")
        name = r.take(ln).decode()
        (size,) = r.unpack("<Q")
        opt[name] = np.frombuffer(r.take(8 * size), dtype="<f8").astype(np.float64)
    (t,) = r.unpack("<Q")
    if opt:
        opt["t"] = int(t)
    return PolicyParams(spec, flat, int(version), opt), int(step), meta, digest
