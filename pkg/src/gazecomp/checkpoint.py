"""Versioned model checkpoints.

Layout: ``b"GZCK"``, u16 version, u32 header length, JSON header (model
config, parameter names/shapes/dtype, free-form extras), the parameter
blobs in declared order (little-endian), then a 32-byte SHA-256 of
everything before it.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from . import __version__
from .errors import ChecksumError, ConfigMismatchError, FormatError, TruncationError, VersionMismatchError
from .model import CompletionModel, ModelConfig
from .sessionio import atomic_write_bytes

MAGIC = b"GZCK"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


def encode_checkpoint(model, extra=None):
    arrays = model.state_arrays()
    dtype = np.dtype(model.config.dtype).newbyteorder("<")
    header = {
        "tool_version": __version__,
        "config": model.config.to_dict(),
        "params": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "dtype": dtype.str,
        "extra": extra or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = [_PREFIX.pack(MAGIC, VERSION, len(head)), head]
    body += [np.ascontiguousarray(a, dtype=dtype).tobytes() for _, a in arrays]
    payload = b"".join(body)
    return payload + hashlib.sha256(payload).digest()


def save_checkpoint(path, model, extra=None):
    atomic_write_bytes(path, encode_checkpoint(model, extra))


def config_diff(a: ModelConfig, b: ModelConfig):
    da, db = a.to_dict(), b.to_dict()
    return {k: (da[k], db.get(k)) for k in da if da[k] != db.get(k)}


def decode_checkpoint(buf, expected_config=None, source="<bytes>"):
    """Returns (model, header).  ``expected_config`` mismatches raise."""
    if len(buf) < _PREFIX.size + 32:
        raise TruncationError(f"{source}: checkpoint truncated at byte {len(buf)}", len(buf))
    payload, digest = buf[:-32], buf[-32:]
    magic, version, head_len = _PREFIX.unpack_from(payload, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise VersionMismatchError(f"{source}: checkpoint version {version}, expected {VERSION}")
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(f"{source}: checksum mismatch")
    pos = _PREFIX.size
    header = json.loads(payload[pos:pos + head_len].decode("utf-8"))
    pos += head_len
    config = ModelConfig.from_dict(header["config"])
    if expected_config is not None:
        diff = config_diff(config, expected_config)
        if diff:
            detail = ", ".join(f"{k}: checkpoint={v[0]!r} runtime={v[1]!r}" for k, v in sorted(diff.items()))
            raise ConfigMismatchError(f"{source}: checkpoint config differs from runtime config ({detail})")
    dtype = np.dtype(header["dtype"])
    arrays = []
    for spec in header["params"]:
        n = int(np.prod(spec["shape"]))
        nbytes = n * dtype.itemsize
        if pos + nbytes > len(payload):
            raise TruncationError(f"{source}: parameter blob {spec['name']} truncated at byte {pos}", pos)
        arrays.append(np.frombuffer(payload, dtype=dtype, count=n, offset=pos).reshape(spec["shape"]))
        pos += nbytes
    if pos != len(payload):
        raise FormatError(f"{source}: {len(payload) - pos} unexpected trailing bytes")
    model = CompletionModel(config, seed=0)
    names = [n for n, _ in model.named_parameters()]
    if names != [p["name"] for p in header["params"]]:
        raise FormatError(f"{source}: parameter layout does not match this model version")
    model.load_state_arrays(arrays)
    return model, header


def read_header(path):
    """Header JSON of a checkpoint without loading (or verifying) the weights."""
    with open(path, "rb") as fh:
        prefix = fh.read(_PREFIX.size)
        if len(prefix) < _PREFIX.size:
            raise TruncationError(f"{path}: checkpoint truncated at byte {len(prefix)}", len(prefix))
        magic, version, head_len = _PREFIX.unpack(prefix)
        if magic != MAGIC:
            raise FormatError(f"{path}: not a checkpoint (magic {magic!r})")
        if version != VERSION:
            raise VersionMismatchError(f"{path}: checkpoint version {version}, expected {VERSION}")
        return json.loads(fh.read(head_len).decode("utf-8"))


def load_checkpoint(path, expected_config=None):
    with open(path, "rb") as fh:
        buf = fh.read()
    return decode_checkpoint(buf, expected_config, str(path))
