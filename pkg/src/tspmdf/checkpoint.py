"""Self-describing checkpoint container.

Layout::

    8 bytes   magic b"TSPMDFCK"
    8 bytes   header length, unsigned little-endian
    N bytes   UTF-8 JSON header: format_version, H, L, M, k, head, tensor
              manifest [{name, shape}], optimizer hyper-parameters (or null)
    rest      little-endian float64 data: every manifest tensor in order,
              then (with an optimizer) all first moments, then all second moments
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .agnn import ModelParams, OptimizerState, param_shapes

MAGIC = b"TSPMDFCK"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


class CorruptCheckpoint(CheckpointError):
    pass


class IncompatibleCheckpoint(CheckpointError):
    pass


def dumps(params: ModelParams, opt_state: OptimizerState | None = None, k: int = 50, extra=None) -> bytes:
    names = list(params.tensors)
    header = {
        "format_version": FORMAT_VERSION,
        "H": params.H,
        "L": params.L,
        "M": params.M,
        "k": int(k),
        "head": params.head,
        "tensors": [{"name": n, "shape": list(params.tensors[n].shape)} for n in names],
        "optimizer": None,
        "extra": extra or {},
    }
    blobs = [params.tensors[n] for n in names]
    if opt_state is not None:
        header["optimizer"] = {
            "step": opt_state.step,
            "lr": opt_state.lr,
            "weight_decay": opt_state.weight_decay,
            "beta1": opt_state.beta1,
            "beta2": opt_state.beta2,
            "eps": opt_state.eps,
        }
        blobs += [opt_state.m[n] for n in names] + [opt_state.v[n] for n in names]
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blobs)
    return MAGIC + struct.pack("<Q", len(head)) + head + body


def loads(data: bytes, expect: dict | None = None):
    """Return ``(params, opt_state_or_None, header)``.

    ``expect`` may pin any of ``H``, ``L``, ``M``, ``k``, ``head``; a mismatch
    raises :class:`IncompatibleCheckpoint`.
    """
    if len(data) < 16 or data[:8] != MAGIC:
        raise CorruptCheckpoint("not a checkpoint (bad magic or truncated header)")
    (hlen,) = struct.unpack("<Q", data[8:16])
    if 16 + hlen > len(data):
        raise CorruptCheckpoint("truncated header")
    try:
        header = json.loads(data[16 : 16 + hlen].decode("utf-8"))
        version = header["format_version"]
        H, L, M, head = int(header["H"]), int(header["L"]), int(header["M"]), header["head"]
        manifest = [(t["name"], tuple(t["shape"])) for t in header["tensors"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpoint(f"unreadable header: {exc}") from None
    if version != FORMAT_VERSION:
        raise IncompatibleCheckpoint(f"unknown format version {version}")
    for key, want in (expect or {}).items():
        if want is not None and header.get(key) != want:
            raise IncompatibleCheckpoint(f"checkpoint has {key}={header.get(key)!r}, pipeline needs {want!r}")
    try:
        expected = param_shapes(H, L, M, head)
    except ValueError as exc:
        raise CorruptCheckpoint(str(exc)) from None
    if dict(manifest) != expected or len(manifest) != len(expected):
        raise IncompatibleCheckpoint("tensor manifest does not match the declared H, L, M and head")

    sizes = [int(np.prod(s)) for _, s in manifest]
    total = sum(sizes) * (3 if header["optimizer"] else 1)
    body = data[16 + hlen :]
    if len(body) != 8 * total:
        raise CorruptCheckpoint(f"expected {8 * total} data bytes, found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(flat)):
        raise CorruptCheckpoint("non-finite values in checkpoint data")

    def take(offset):
        out = {}
        for (name, shape), size in zip(manifest, sizes):
            out[name] = flat[offset : offset + size].reshape(shape).copy()
            offset += size
        return out, offset

    tensors, off = take(0)
    params = ModelParams(H, L, M, head, tensors)
    opt = None
    if header["optimizer"]:
        m, off = take(off)
        v, off = take(off)
        o = header["optimizer"]
        opt = OptimizerState(m, v, int(o["step"]), o["lr"], o["weight_decay"], o["beta1"], o["beta2"], o["eps"])
    return params, opt, header


def save_checkpoint(path, params: ModelParams, opt_state: OptimizerState | None = None, k: int = 50, extra=None):
    Path(path).write_bytes(dumps(params, opt_state, k, extra))


def load_checkpoint(path, expect: dict | None = None):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return loads(data, expect)
