"""Float32 tensor container I/O.

Byte layout, shared with the conversion engine's loader: magic "SRAV",
u32 version, u32 entry count, then per entry u16 name length + UTF-8 name,
u8 rank, u32 dims, float32 little-endian payload.
"""

import struct

import numpy as np

from .errors import InputError

MAGIC = b"SRAV"
VERSION = 1


def save_container(entries, path) -> None:
    items = list(entries.items()) if isinstance(entries, dict) else list(entries)
    names = [n for n, _ in items]
    if len(set(names)) != len(names):
        raise InputError("duplicate name in container entries")
    blob = bytearray(MAGIC)
    blob += struct.pack("<II", VERSION, len(items))
    for name, arr in items:
        arr = np.asarray(arr, dtype="<f4")
        if not arr.flags.c_contiguous:
            arr = arr.copy()  # preserve rank-0 shapes
        enc = name.encode("utf-8")
        blob += struct.pack("<H", len(enc)) + enc
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.tobytes()
    with open(path, "wb") as f:
        f.write(blob)


def load_container(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12:
        raise InputError(f"truncated container: {path}")
    if data[:4] != MAGIC:
        raise InputError(f"bad magic {data[:4]!r}: {path}")
    version, count = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise InputError(f"version mismatch: file has {version}, expected {VERSION}")
    out: dict[str, np.ndarray] = {}
    pos = 12
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos : pos + nlen].decode("utf-8")
            pos += nlen
            (rank,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{rank}I", data, pos)
            pos += 4 * rank
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            payload = data[pos : pos + 4 * size]
            if len(payload) < 4 * size:
                raise InputError(f"truncated payload for entry {name!r}: {path}")
            pos += 4 * size
            if name in out:
                raise InputError(f"duplicate name {name!r}: {path}")
            out[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    except struct.error as exc:
        raise InputError(f"truncated container: {path}") from exc
    return out
