"""Landmark feature vectors: the built-in patch descriptor, Gaussian random
projection, cosine distance, and the binary descriptor-block file format.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    BlockDimError,
    BlockMagicError,
    BlockTruncatedError,
    BlockVersionError,
    ConfigError,
    DataError,
    GeometryError,
)
from .geometry import BoundingBox, ImageDims, Landmark, LandmarkSet, area_ratio, scale_index

DESCRIPTOR_DIM = kernels.DESCRIPTOR_DIM

BLOCK_MAGIC = b"LMDB1\x00"
BLOCK_VERSION = 1
_HEADER = struct.Struct("<H4I")
_RECORD_GEOM = struct.Struct("<4I")
BLOCK_SUFFIX = ".lmdb1"


@dataclass(frozen=True)
class ProjectionConfig:
    target_dim: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.target_dim < 1:
            raise ConfigError(f"projection target_dim must be positive, got {self.target_dim}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("projection seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class DescriptorBlock:
    """Per-image landmark descriptors: row i describes landmark i.

    Vectors are float32, matching the on-disk format bit for bit.
    """

    image_id: str
    landmarks: LandmarkSet
    vectors: np.ndarray

    def __post_init__(self):
        vec = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if vec.ndim != 2:
            raise DataError(f"descriptor block needs a 2-D matrix, got ndim={vec.ndim}")
        if vec.shape[0] != len(self.landmarks):
            raise DataError(
                f"{vec.shape[0]} descriptor rows for {len(self.landmarks)} landmarks"
            )
        if vec.size and not np.all(np.isfinite(vec)):
            raise DataError("descriptor block contains non-finite values")
        object.__setattr__(self, "vectors", vec)

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def describe_patch(image: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Deterministic 144-d descriptor of one image patch.

    Crops the box, area-averages it to a 32x32 grid, and concatenates an
    8-orientation gradient histogram over 4x4 cells with a 16-bin intensity
    histogram; the result is L2-normalized. A constant patch yields an
    all-zero gradient part (the intensity part stays informative).
    """
    image = _as_gray(image)
    dims = ImageDims(image.shape[1], image.shape[0])
    if not box.is_inside(dims):
        raise GeometryError(f"box {box.as_tuple()} not inside {dims.width}x{dims.height} image")
    boxes = np.array([box.as_tuple()], dtype=np.int64)
    return kernels.patch_descriptors(image, boxes)[0]


def describe_landmarks(image: np.ndarray, landmarks: LandmarkSet) -> DescriptorBlock:
    """Built-in descriptors for every landmark of one image."""
    image = _as_gray(image)
    if image.shape[0] != landmarks.dims.height or image.shape[1] != landmarks.dims.width:
        raise DataError(
            f"image is {image.shape[1]}x{image.shape[0]} but landmark set says "
            f"{landmarks.dims.width}x{landmarks.dims.height}"
        )
    vecs = kernels.patch_descriptors(image, landmarks.boxes_array())
    return DescriptorBlock(landmarks.image_id, landmarks, vecs.astype(np.float32))


def _as_gray(image: np.ndarray) -> np.ndarray:
    """Normalize to a float64 grayscale grid in [0, 1]."""
    arr = np.asarray(image)
    if arr.ndim == 3:
        arr = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
    elif arr.ndim != 2:
        raise DataError(f"expected a 2-D or 3-D pixel grid, got ndim={arr.ndim}")
    arr = arr.astype(np.float64, copy=False)
    if np.issubdtype(np.asarray(image).dtype, np.integer):
        arr = arr / 255.0
    return arr


def gaussian_rows(seed: int, row_start: int, n_rows: int, dim: int) -> np.ndarray:
    """Rows [row_start, row_start + n_rows) of the projection matrix G.

    Row r is an independent stream: PCG64 seeded with
    SeedSequence(entropy=seed, spawn_key=(r,)), uniform draws mapped through
    the Box-Muller transform (z0 = sqrt(-2 ln u1) cos(2 pi u2), z1 = the sin
    twin, with u1 = 1 - raw so the log argument stays in (0, 1]). G is
    regenerated on demand and never persisted.
    """
    out = np.empty((n_rows, dim), dtype=np.float64)
    half = (dim + 1) // 2
    for i in range(n_rows):
        gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(row_start + i,)))
        )
        u1 = 1.0 - gen.random(half)
        u2 = gen.random(half)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        pairs = np.empty(2 * half, dtype=np.float64)
        pairs[0::2] = radius * np.cos(angle)
        pairs[1::2] = radius * np.sin(angle)
        out[i] = pairs[:dim]
    return out


def random_projection(x: np.ndarray, cfg: ProjectionConfig) -> np.ndarray:
    """Project vectors to cfg.target_dim: y = G x / sqrt(target_dim).

    G has i.i.d. standard-normal entries derived deterministically from
    cfg.seed (see `gaussian_rows`); the same seed and dims always give the
    same G. Accepts a single vector or a (n, dim) matrix.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DataError(f"expected a vector or a matrix, got ndim={arr.ndim}")
    dim = arr.shape[1]
    if cfg.target_dim > dim:
        raise ConfigError(
            f"projection target_dim {cfg.target_dim} exceeds source dim {dim}"
        )
    out = np.empty((arr.shape[0], cfg.target_dim), dtype=np.float64)
    chunk = max(1, min(cfg.target_dim, 512))
    for r0 in range(0, cfg.target_dim, chunk):
        r1 = min(r0 + chunk, cfg.target_dim)
        out[:, r0:r1] = arr @ gaussian_rows(cfg.seed, r0, r1 - r0, dim).T
    out /= np.sqrt(cfg.target_dim)
    return out[0] if single else out


def project_block(block: DescriptorBlock, cfg: ProjectionConfig) -> DescriptorBlock:
    projected = random_projection(block.vectors.astype(np.float64), cfg)
    return DescriptorBlock(block.image_id, block.landmarks, projected.astype(np.float32))


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), in [0, 2]. Equal dims required.

    A zero vector on either side is defined as distance 1 (maximally
    uninformative); a warning flags the degenerate case.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DataError(f"descriptor dims differ: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        warnings.warn("cosine distance of a zero vector defined as 1", stacklevel=2)
        return 1.0
    return float(np.clip(1.0 - (a @ b) / (na * nb), 0.0, 2.0))


def write_block(block: DescriptorBlock, path) -> None:
    """Serialize a block to the little-endian binary format (see read_block)."""
    path = Path(path)
    n = len(block)
    d = block.dim
    dims = block.landmarks.dims
    parts = [BLOCK_MAGIC, _HEADER.pack(BLOCK_VERSION, n, d, dims.width, dims.height)]
    boxes = block.landmarks.boxes_array()
    for i in range(n):
        parts.append(_RECORD_GEOM.pack(*(int(v) for v in boxes[i])))
        parts.append(block.vectors[i].astype("<f4", copy=False).tobytes())
    path.write_bytes(b"".join(parts))


def read_block(path, image_id: str | None = None, expected_dim: int | None = None) -> DescriptorBlock:
    """Parse a descriptor block file.

    Layout: magic 'LMDB1\\0', u16 version, u32 count, u32 dim, u32 width,
    u32 height, then count records of [x, y, w, h as u32, dim float32].
    All integers little-endian.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"descriptor block not found: {path}")
    raw = path.read_bytes()
    if len(raw) < len(BLOCK_MAGIC) or raw[: len(BLOCK_MAGIC)] != BLOCK_MAGIC:
        raise BlockMagicError("bad magic, not a descriptor block file", path=path)
    off = len(BLOCK_MAGIC)
    if len(raw) < off + _HEADER.size:
        raise BlockTruncatedError("header truncated", path=path)
    version, n, d, width, height = _HEADER.unpack_from(raw, off)
    if version != BLOCK_VERSION:
        raise BlockVersionError(f"unsupported version {version}", path=path)
    if expected_dim is not None and d != expected_dim:
        raise BlockDimError(f"dim {d} where {expected_dim} was expected", path=path)
    off += _HEADER.size
    record = _RECORD_GEOM.size + 4 * d
    if len(raw) != off + n * record:
        raise BlockTruncatedError(
            f"payload is {len(raw) - off} bytes, header promises {n * record}", path=path
        )
    if image_id is None:
        image_id = path.name.removesuffix(BLOCK_SUFFIX)
    dims = ImageDims(width, height)
    landmarks = []
    vectors = np.empty((n, d), dtype=np.float32)
    for i in range(n):
        x, y, w, h = _RECORD_GEOM.unpack_from(raw, off)
        off += _RECORD_GEOM.size
        try:
            box = BoundingBox(x, y, w, h)
            ratio = area_ratio(box, dims)
        except GeometryError as exc:
            raise DataError(f"{path}: record {i}: {exc}") from exc
        landmarks.append(Landmark(box, ratio, scale_index(ratio)))
        vectors[i] = np.frombuffer(raw, dtype="<f4", count=d, offset=off)
        off += 4 * d
    lset = LandmarkSet(image_id=image_id, dims=dims, landmarks=tuple(landmarks))
    return DescriptorBlock(image_id, lset, vectors)
