"""VPK1 shard files: a magic header, then length-prefixed records.

Record layout (all integers little-endian u32)::

    [meta-len][JSON meta][input-len][input PPM][target-len][target PPM]
"""
from __future__ import annotations

import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor

from ..render import CanvasError, from_ppm
from .records import PairRecord, RecordError

MAGIC = b"VPK1"
_U32 = struct.Struct("<I")


class ShardFormatError(ValueError):
    def __init__(self, message, offset, record_index=None, path=None):
        where = f"byte {offset}" + (f", record {record_index}" if record_index is not None else "")
        if path is not None:
            where = f"{path}: {where}"
        super().__init__(f"{where}: {message}")
        self.offset = offset
        self.record_index = record_index
        self.path = path


def encode_record(rec: PairRecord) -> bytes:
    parts = []
    for blob in (rec.meta_bytes(), rec.input.to_ppm(), rec.target.to_ppm()):
        parts.append(_U32.pack(len(blob)))
        parts.append(blob)
    return b"".join(parts)


def write_shard(records, path) -> int:
    records = list(records)
    if not records:
        raise ValueError("refusing to write an empty shard")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        for rec in records:
            fh.write(encode_record(rec))
    os.replace(tmp, path)
    return len(records)


def iter_shard_bytes(blob: bytes, path=None):
    """Yield ``PairRecord`` objects from an in-memory shard."""
    if blob[:4] != MAGIC:
        raise ShardFormatError(f"bad magic {blob[:4]!r}", 0, path=path)
    pos, index, n = 4, 0, len(blob)
    while pos < n:
        start = pos
        chunks = []
        for what in ("metadata", "input image", "target image"):
            if pos + 4 > n:
                raise ShardFormatError(f"truncated {what} length", pos, index, path)
            (length,) = _U32.unpack_from(blob, pos)
            pos += 4
            if pos + length > n:
                raise ShardFormatError(f"truncated {what}: need {length} bytes, have {n - pos}", pos, index, path)
            chunks.append(blob[pos:pos + length])
            pos += length
        try:
            meta = json.loads(chunks[0].decode("utf-8"))
            rec = PairRecord.from_meta(meta, from_ppm(chunks[1]), from_ppm(chunks[2]))
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, CanvasError, RecordError) as exc:
            raise ShardFormatError(f"bad record payload: {exc}", start, index, path) from exc
        yield rec
        index += 1


def read_shard(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    return iter_shard_bytes(blob, path=str(path))


def load_records(sources, workers: int = 1) -> list:
    """Flatten records from shard paths and/or record lists, in source order.

    Shards may be read by several threads; results are joined in input order so
    the output is the same as a sequential read.
    """
    if isinstance(sources, (str, os.PathLike)):
        sources = [sources]
    sources = list(sources)
    if sources and isinstance(sources[0], PairRecord):
        return sources

    def load(src):
        if isinstance(src, PairRecord):
            return [src]
        if isinstance(src, (str, os.PathLike)):
            return list(read_shard(src))
        return list(src)

    if workers > 1 and len(sources) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            loaded = list(pool.map(load, sources))
    else:
        loaded = [load(s) for s in sources]
    return [r for chunk in loaded for r in chunk]
