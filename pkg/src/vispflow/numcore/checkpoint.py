"""VPW1 parameter checkpoints.

Layout (little-endian): ``b"VPW1"`` then, per parameter,
``u16 path_len | path utf-8 | u8 ndim | u32 * ndim shape | f64 * count data``.
"""
from __future__ import annotations

import struct

import numpy as np

from .params import ParamSet

MAGIC = b"VPW1"


class CheckpointError(ValueError):
    pass


def dumps(params: ParamSet) -> bytes:
    chunks = [MAGIC]
    for path, value in params.items():
        name = path.encode("utf-8")
        chunks.append(struct.pack("<H", len(name)))
        chunks.append(name)
        chunks.append(struct.pack("<B", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    return b"".join(chunks)


def loads(blob: bytes, trainable=None) -> ParamSet:
    """Parse a checkpoint. ``trainable`` maps path -> flag; unknown paths default to trainable."""
    if blob[:4] != MAGIC:
        raise CheckpointError("bad magic at byte 0")
    params = ParamSet()
    pos = 4
    while pos < len(blob):
        start = pos
        try:
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            nbytes = 8 * count
            if pos + nbytes > len(blob):
                raise CheckpointError(f"truncated record at byte {start}")
            data = np.frombuffer(blob, dtype="<f8", count=count, offset=pos).astype(np.float64)
            pos += nbytes
        except struct.error as exc:
            raise CheckpointError(f"truncated record at byte {start}") from exc
        flag = True if trainable is None else trainable.get(name, True)
        params.add(name, data.reshape(shape), flag)
    return params


def save(params: ParamSet, path):
    with open(path, "wb") as fh:
        fh.write(dumps(params))


def load(path, trainable=None) -> ParamSet:
    with open(path, "rb") as fh:
        return loads(fh.read(), trainable)
