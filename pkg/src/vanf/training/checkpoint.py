"""Binary training-state container.

Layout: magic ``VANF``, version u32, then records until end of file. Each
record is name length (u32), name bytes (utf-8), dtype tag (u8), rank (u8),
extents (rank x u64), raw little-endian payload. Everything is written in
sorted name order so identical state produces identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError

CHECKPOINT_MAGIC = b"VANF"
CHECKPOINT_VERSION = 1

_TAG_TO_DTYPE = {0: np.dtype("<f8"), 1: np.dtype("<i8"), 2: np.dtype("u1")}
_DTYPE_TO_TAG = {np.dtype(np.float64): 0, np.dtype(np.int64): 1, np.dtype(np.uint8): 2}


def save_checkpoint(path, arrays: dict[str, np.ndarray], version: int = CHECKPOINT_VERSION) -> None:
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", version)]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])  # tobytes() below handles any layout
        tag = _DTYPE_TO_TAG.get(arr.dtype)
        if tag is None:
            raise CheckpointError(f"unsupported dtype {arr.dtype}", record=name)
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<BB", tag, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise CheckpointError("file too short for header")
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {blob[:4]!r}")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported version {version}")

    out: dict[str, np.ndarray] = {}
    pos = 8
    total = len(blob)

    def take(n: int, what: str, record: str | None) -> bytes:
        nonlocal pos
        if pos + n > total:
            raise CheckpointError(f"truncated while reading {what}", record=record)
        piece = blob[pos : pos + n]
        pos += n
        return piece

    while pos < total:
        (name_len,) = struct.unpack("<I", take(4, "record name length", None))
        name = take(name_len, "record name", None).decode("utf-8")
        tag, rank = struct.unpack("<BB", take(2, "dtype/rank", name))
        dtype = _TAG_TO_DTYPE.get(tag)
        if dtype is None:
            raise CheckpointError(f"unknown dtype tag {tag}", record=name)
        shape = struct.unpack(f"<{rank}Q", take(8 * rank, "extents", name))
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = take(count * dtype.itemsize, "payload", name)
        out[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
    return out
