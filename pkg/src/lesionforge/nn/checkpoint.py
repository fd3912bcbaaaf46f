"""Binary parameter checkpoints.

Layout (all integers little-endian):

    header, 16 bytes:  magic b"LSNFRG01" (8) | format version u32 | record count u32
    per parameter:     name length u32 | name bytes (utf-8) | rank u32 |
                       extents u32 * rank | raw little-endian float32 values

Records appear in the network's parameter order and are written/read
verbatim, so a save/load round trip is byte-stable.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint", "MAGIC", "FORMAT_VERSION"]

MAGIC = b"LSNFRG01"
FORMAT_VERSION = 1


def save_checkpoint(params: dict[str, np.ndarray], path: str | Path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(params)))
        for name, arr in params.items():
            data = np.ascontiguousarray(arr, dtype="<f4")
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<I", data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(data.tobytes())


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        version, count = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", fh.read(4))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            n = int(np.prod(shape)) if rank else 1
            raw = fh.read(4 * n)
            if len(raw) != 4 * n:
                raise ValueError(f"{path}: truncated record for parameter {name!r}")
            out[name] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
        return out
