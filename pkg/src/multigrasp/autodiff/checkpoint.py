"""Binary parameter checkpoints.

Layout (all integers little-endian)::

    b"MGCK"  magic
    u16      format version (1)
    u32      metadata length, then that many bytes of UTF-8 JSON
    u32      parameter count
    per parameter:
        u16 name length, UTF-8 name
        u8  ndim, then ndim x u32 dims
        prod(dims) x float32 (little-endian, C order)
"""
import json
import struct

import numpy as np

from ..errors import IncompatibleCheckpoint

MAGIC = b"MGCK"
VERSION = 1


def dumps(params, meta=None):
    """Serialize an ordered mapping name -> array."""
    meta_b = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<HI", VERSION, len(meta_b)), meta_b, struct.pack("<I", len(params))]
    for name, arr in params.items():
        nb = name.encode("utf-8")
        a = np.asarray(arr)
        parts.append(struct.pack("<H", len(nb)) + nb)
        parts.append(struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(np.ascontiguousarray(a, dtype="<f4").tobytes())
    return b"".join(parts)


def loads(buf, source=None):
    """Inverse of :func:`dumps`; returns ``(params, meta)``."""
    mv = memoryview(bytes(buf))
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(mv):
            raise IncompatibleCheckpoint("truncated checkpoint", source)
        out = mv[pos:pos + n]
        pos += n
        return out

    if bytes(take(4)) != MAGIC:
        raise IncompatibleCheckpoint("not a checkpoint (bad magic)", source)
    version, mlen = struct.unpack("<HI", take(6))
    if version != VERSION:
        raise IncompatibleCheckpoint(f"unsupported checkpoint version {version}", source)
    try:
        meta = json.loads(bytes(take(mlen)).decode("utf-8"))
    except (UnicodeDecodeError, ValueError):
        raise IncompatibleCheckpoint("corrupt metadata", source) from None
    (count,) = struct.unpack("<I", take(4))
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = bytes(take(nlen)).decode("utf-8", errors="replace")
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(take(4 * n), dtype="<f4").reshape(shape).astype(np.float32)
    if pos != len(mv):
        raise IncompatibleCheckpoint("trailing bytes after parameters", source)
    return params, meta


def save(path, params, meta=None):
    with open(path, "wb") as fh:
        fh.write(dumps(params, meta))


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read(), source=str(path))
