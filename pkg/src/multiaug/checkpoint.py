"""Checkpoint container: named float32 tensors in a fixed little-endian layout.

Layout (all little-endian):
    magic        4 bytes  b"MASS"
    version      u32      currently 1
    tensor count u32
    per tensor:
        name length  u16
        name         ASCII bytes
        dtype tag    u8   (0 = float32)
        rank         u8
        dims         rank x u64
        data         raw float32, row-major

Round trips are bit-exact; that property underpins resume-equivalence.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MASS"
VERSION = 1
_DTYPE_F32 = 0

__all__ = ["BadMagic", "VersionMismatch", "Truncated", "save_checkpoint", "load_checkpoint"]


class BadMagic(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


class Truncated(ValueError):
    pass


def save_checkpoint(tensors: dict[str, np.ndarray], path: str | Path) -> None:
    """Write named tensors. Names must be unique ASCII; data stored as float32."""
    names = list(tensors)
    for name in names:
        if not name.isascii():
            raise ValueError(f"tensor name must be ASCII: {name!r}")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<II", VERSION, len(names))
    for name in names:
        arr = np.ascontiguousarray(tensors[name], dtype=np.float32)
        enc = name.encode("ascii")
        out += struct.pack("<H", len(enc))
        out += enc
        out += struct.pack("<BB", _DTYPE_F32, arr.ndim)
        out += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        out += arr.tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise Truncated(f"need {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Read a checkpoint back into name -> float32 array, bit-exactly."""
    r = _Reader(Path(path).read_bytes())
    if r.take(4) != MAGIC:
        raise BadMagic(f"bad magic in {path}")
    version, count = struct.unpack("<II", r.take(8))
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {VERSION}")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", r.take(2))
        name = r.take(name_len).decode("ascii")
        dtype_tag, rank = struct.unpack("<BB", r.take(2))
        if dtype_tag != _DTYPE_F32:
            raise ValueError(f"unknown dtype tag {dtype_tag} for tensor {name!r}")
        shape = struct.unpack(f"<{rank}Q", r.take(8 * rank))
        size = 1
        for d in shape:
            size *= d
        raw = r.take(4 * size)
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return tensors
