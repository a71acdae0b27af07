"""Binary session files, benchmark directories and atomic writes.

Session file layout (all little-endian)::

    magic   b"GZSS"
    u16     format version
    u32     header length N
    N bytes header, UTF-8 JSON (sorted keys): session_id, H, W, C,
            frame_count, metadata, payload ("inline" | "shared")
    [shared payload only] C*H*W float32 feature grid used by every frame
    frame_count records:
        f64 gaze x, f64 gaze y, u8 valid, u8 label
        [inline payload only] C*H*W float32 feature grid

A file ending inside a record is truncated; a file whose record count
disagrees with the header is inconsistent.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import InconsistencyError, TruncationError, VersionMismatchError, FormatError
from .heatmap import GazeTrajectory
from .synthetic import SessionRecord

MAGIC = b"GZSS"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")
_GAZE = np.dtype([("x", "<f8"), ("y", "<f8"), ("valid", "u1"), ("label", "u1")])


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def encode_session(session):
    frames = np.ascontiguousarray(session.frames, dtype="<f4")
    L, C, H, W = frames.shape
    shared = L > 0 and bool(np.all(frames == frames[:1]))
    header = {
        "session_id": session.session_id,
        "H": H,
        "W": W,
        "C": C,
        "frame_count": L,
        "metadata": session.metadata,
        "payload": "shared" if shared else "inline",
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [_PREFIX.pack(MAGIC, VERSION, len(head)), head]
    gaze = np.zeros(L, dtype=_GAZE)
    gaze["x"] = np.where(session.gaze.valid, session.gaze.xy[:, 0], 0.0)
    gaze["y"] = np.where(session.gaze.valid, session.gaze.xy[:, 1], 0.0)
    gaze["valid"] = session.gaze.valid
    gaze["label"] = session.labels
    if shared:
        parts.append(frames[0].tobytes())
        parts.append(gaze.tobytes())
    else:
        rec = np.dtype(_GAZE.descr + [("grid", "<f4", (C, H, W))])
        arr = np.zeros(L, dtype=rec)
        for name in ("x", "y", "valid", "label"):
            arr[name] = gaze[name]
        arr["grid"] = frames
        parts.append(arr.tobytes())
    return b"".join(parts)


def write_session(session, path):
    atomic_write_bytes(path, encode_session(session))


def decode_session(buf, source="<bytes>"):
    if len(buf) < _PREFIX.size:
        raise TruncationError(f"{source}: truncated before the header at byte {len(buf)}", len(buf))
    magic, version, head_len = _PREFIX.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{source}: not a session file (magic {magic!r})")
    if version != VERSION:
        raise VersionMismatchError(f"{source}: format version {version}, this reader supports {VERSION}")
    pos = _PREFIX.size
    if len(buf) < pos + head_len:
        raise TruncationError(f"{source}: truncated inside the header at byte {len(buf)}", len(buf))
    header = json.loads(buf[pos:pos + head_len].decode("utf-8"))
    pos += head_len
    H, W, C, L = header["H"], header["W"], header["C"], header["frame_count"]
    grid_bytes = 4 * C * H * W
    shared = header["payload"] == "shared"
    if shared:
        if len(buf) < pos + grid_bytes:
            raise TruncationError(f"{source}: truncated inside the shared grid at byte {len(buf)}", len(buf))
        grid = np.frombuffer(buf, dtype="<f4", count=C * H * W, offset=pos).reshape(C, H, W)
        pos += grid_bytes
        rec = _GAZE
    else:
        rec = np.dtype(_GAZE.descr + [("grid", "<f4", (C, H, W))])
    body = len(buf) - pos
    n_rec, rem = divmod(body, rec.itemsize)
    if rem:
        offset = pos + n_rec * rec.itemsize
        raise TruncationError(
            f"{source}: truncated record {n_rec} starting at byte {offset} (file ends at byte {len(buf)})", offset
        )
    if n_rec != L:
        raise InconsistencyError(f"{source}: header declares {L} frames but {n_rec} records are present")
    arr = np.frombuffer(buf, dtype=rec, count=L, offset=pos)
    if shared:
        frames = np.broadcast_to(grid, (L, C, H, W)).astype(np.float32)
    else:
        frames = arr["grid"].astype(np.float32)
    valid = arr["valid"].astype(bool)
    xy = np.stack([arr["x"], arr["y"]], axis=1).astype(np.float64)
    return SessionRecord(header["session_id"], frames, GazeTrajectory(xy, valid),
                         arr["label"].astype(np.int8), header["metadata"])


def read_session(path):
    path = Path(path)
    return decode_session(path.read_bytes(), str(path))


def export_text(session, path):
    """Line-oriented debug export (header JSON, then one line per frame)."""
    lines = [json.dumps({"session_id": session.session_id, "frames": len(session),
                         "grid": list(session.frames.shape[1:]), "metadata": session.metadata},
                        sort_keys=True)]
    lines.append("t\tx\ty\tvalid\tlabel")
    for i, ((x, y), v, l) in enumerate(zip(session.gaze.xy, session.gaze.valid, session.labels), start=1):
        lines.append(f"{i}\t{x:.6f}\t{y:.6f}\t{int(v)}\t{int(l)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


SPLITS = ("train", "val", "test")


def write_benchmark(benchmark, directory, extra_manifest=None):
    directory = Path(directory)
    for split in SPLITS:
        for s in benchmark.split(split):
            write_session(s, directory / split / f"{s.session_id}.gzs")
    manifest = dict(benchmark.manifest)
    if extra_manifest:
        manifest.update(extra_manifest)
    atomic_write_text(directory / "manifest.json", dumps_json(manifest))


def read_split(directory, split):
    d = Path(directory) / split
    if not d.is_dir():
        raise FileNotFoundError(f"no {split} split under {directory}")
    return [read_session(p) for p in sorted(d.glob("*.gzs"))]


def read_manifest(directory):
    return json.loads((Path(directory) / "manifest.json").read_text())
