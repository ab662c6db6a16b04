"""The interchange file formats, implemented against their documented
byte/line layouts (no import of the consuming package).

Box CSV: one `x,y,w,h[,score]` line per landmark, integer geometry,
optional single `#` header line.

Descriptor block (little-endian): magic `LMDB1\\0`, u16 version = 1,
u32 count, u32 dim, u32 width, u32 height, then per landmark
`[x, y, w, h]` as u32 followed by dim float32 values.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

BLOCK_MAGIC = b"LMDB1\x00"
BLOCK_VERSION = 1
_HEADER = struct.Struct("<H4I")
_RECORD_GEOM = struct.Struct("<4I")

BOX_SUFFIX = ".boxes.csv"
BLOCK_SUFFIX = ".lmdb1"


class FormatError(ValueError):
    pass


def read_boxes(path) -> list[tuple[int, int, int, int]]:
    """Parse a box CSV, preserving line order exactly."""
    path = Path(path)
    boxes = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if lineno == 1:
                    continue
                raise FormatError(f"{path}: line {lineno}: stray comment line")
            fields = line.split(",")
            if len(fields) not in (4, 5):
                raise FormatError(
                    f"{path}: line {lineno}: expected x,y,w,h[,score], got {len(fields)} fields"
                )
            try:
                x, y, w, h = (int(f.strip()) for f in fields[:4])
            except ValueError as exc:
                raise FormatError(f"{path}: line {lineno}: {exc}") from exc
            if w <= 0 or h <= 0 or x < 0 or y < 0:
                raise FormatError(f"{path}: line {lineno}: bad geometry {x},{y},{w},{h}")
            boxes.append((x, y, w, h))
    return boxes


def write_block(path, boxes, vectors: np.ndarray, width: int, height: int) -> None:
    """Write a descriptor block atomically (tmp file + rename)."""
    path = Path(path)
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] != len(boxes):
        raise FormatError(
            f"{vectors.shape[0] if vectors.ndim == 2 else '?'} vector rows for {len(boxes)} boxes"
        )
    n, dim = vectors.shape
    parts = [BLOCK_MAGIC, _HEADER.pack(BLOCK_VERSION, n, dim, width, height)]
    for (x, y, w, h), row in zip(boxes, vectors):
        parts.append(_RECORD_GEOM.pack(x, y, w, h))
        parts.append(row.tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(parts))
    os.replace(tmp, path)


def read_block(path):
    """Parse a block back: (boxes, vectors, width, height). Test helper and
    sanity check; the pipeline has its own reader."""
    raw = Path(path).read_bytes()
    if raw[: len(BLOCK_MAGIC)] != BLOCK_MAGIC:
        raise FormatError(f"{path}: bad magic")
    off = len(BLOCK_MAGIC)
    version, n, dim, width, height = _HEADER.unpack_from(raw, off)
    if version != BLOCK_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    off += _HEADER.size
    boxes = []
    vectors = np.empty((n, dim), dtype=np.float32)
    for i in range(n):
        boxes.append(_RECORD_GEOM.unpack_from(raw, off))
        off += _RECORD_GEOM.size
        vectors[i] = np.frombuffer(raw, dtype="<f4", count=dim, offset=off)
        off += 4 * dim
    if off != len(raw):
        raise FormatError(f"{path}: trailing bytes")
    return boxes, vectors, width, height
