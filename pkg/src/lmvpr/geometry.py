"""Bounding-box arithmetic, the nine-bin scale taxonomy, and the dense
multi-scale landmark sampler.

All types are immutable and all operations are pure functions.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GeometryError

# Upper edges of the nine normalized-scale bins. Bin k is [edge[k-1], edge[k])
# except the last, which is closed at 1.
SCALE_BIN_EDGES = (0.02, 0.05, 0.09, 0.14, 0.23, 0.34, 0.5, 0.72, 1.0)
NUM_SCALE_BINS = 9


@dataclass(frozen=True)
class ImageDims:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"image dims must be at least 1x1, got {self.width}x{self.height}")

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel rectangle: left edge x, top edge y, extent w x h."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise GeometryError(f"box extent must be positive, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise GeometryError(f"box origin must be non-negative, got ({self.x}, {self.y})")

    @property
    def area(self) -> int:
        return self.w * self.h

    def is_inside(self, dims: ImageDims) -> bool:
        return self.x + self.w <= dims.width and self.y + self.h <= dims.height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class Landmark:
    box: BoundingBox
    normalized_scale: float
    scale_index: int


@dataclass(frozen=True)
class LandmarkSet:
    """Ordered landmarks of one image. Order is significant (proposal rank or
    deterministic sampling order) and the count is the n_a / n_b normalizer of
    the image-similarity formula even when some landmarks never match.

    `underfull` marks a selection that ran out of candidates before reaching
    its configured size.
    """

    image_id: str
    dims: ImageDims
    landmarks: tuple[Landmark, ...]
    underfull: bool = False

    def __len__(self) -> int:
        return len(self.landmarks)

    def boxes_array(self) -> np.ndarray:
        """Landmark boxes as an (n, 4) int64 array of x, y, w, h rows."""
        if not self.landmarks:
            return np.empty((0, 4), dtype=np.int64)
        return np.array([lm.box.as_tuple() for lm in self.landmarks], dtype=np.int64)

    def scale_indices(self) -> np.ndarray:
        return np.array([lm.scale_index for lm in self.landmarks], dtype=np.int64)


@dataclass(frozen=True)
class ScaleSpec:
    """Dense-sampling levels: (normalized_scale, landmarks_per_level) pairs.

    Counts must be perfect squares (the sampler lays a g x g grid per level)
    and scales must be strictly increasing; both are rejected here rather
    than silently reshaped downstream.
    """

    levels: tuple[tuple[float, int], ...]

    def __post_init__(self):
        if not self.levels:
            raise ConfigError("scale spec needs at least one level")
        prev = 0.0
        for ratio, count in self.levels:
            if not 0.0 < ratio <= 1.0:
                raise ConfigError(f"normalized scale must be in (0, 1], got {ratio}")
            if ratio <= prev:
                raise ConfigError("normalized scales must be strictly increasing")
            prev = ratio
            if count < 1:
                raise ConfigError(f"per-level count must be positive, got {count}")
            g = math.isqrt(count)
            if g * g != count:
                raise ConfigError(
                    f"per-level count {count} is not a perfect square; the sampler uses a square grid"
                )

    @property
    def total(self) -> int:
        return sum(count for _, count in self.levels)


DEFAULT_SCALE_SPEC = ScaleSpec(((0.16, 25), (0.25, 25), (0.36, 25), (0.49, 25)))


def area_ratio(box: BoundingBox, dims: ImageDims) -> float:
    """Landmark area over full image area, the normalized scale in (0, 1]."""
    if not box.is_inside(dims):
        raise GeometryError(
            f"box {box.as_tuple()} does not fit in a {dims.width}x{dims.height} image"
        )
    return box.area / dims.area


def scale_index(ratio: float) -> int:
    """Bin a normalized scale into scale indices 1..9.

    Bins are half-open [lo, hi); the final bin [0.72, 1] is closed.
    """
    if not 0.0 < ratio <= 1.0:
        raise GeometryError(f"normalized scale must be in (0, 1], got {ratio}")
    return min(bisect_right(SCALE_BIN_EDGES, ratio) + 1, NUM_SCALE_BINS)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _grid_offsets(extent: int, window: int, g: int) -> list[int]:
    # Endpoint-inclusive uniform grid: first offset 0, last flush with the far
    # edge. Integer floor division keeps intermediate offsets exact.
    if g == 1:
        return [0]
    span = extent - window
    return [min((i * span) // (g - 1), span) for i in range(g)]


def dense_sample(dims: ImageDims, spec: ScaleSpec = DEFAULT_SCALE_SPEC, image_id: str = "") -> LandmarkSet:
    """Sample landmarks on a per-level g x g grid covering the whole image.

    Each level's window keeps the image aspect ratio: w = round(sqrt(r) * W),
    h = round(sqrt(r) * H), half-up. Output order is level-major, then
    row-major inside each level's grid. Pure function: identical inputs give
    identical ordered output.
    """
    width, height = dims.width, dims.height
    landmarks: list[Landmark] = []
    for ratio, count in spec.levels:
        g = math.isqrt(count)
        side = math.sqrt(ratio)
        w = _round_half_up(side * width)
        h = _round_half_up(side * height)
        if w > width or h > height:
            raise ConfigError(
                f"level {ratio} window {w}x{h} exceeds the {width}x{height} image"
            )
        if w < 1 or h < 1:
            raise ConfigError(
                f"level {ratio} window rounds to {w}x{h} in a {width}x{height} image"
            )
        xs = _grid_offsets(width, w, g)
        ys = _grid_offsets(height, h, g)
        ns = (w * h) / dims.area
        idx = scale_index(ns)
        for y in ys:
            for x in xs:
                landmarks.append(Landmark(BoundingBox(x, y, w, h), ns, idx))
    return LandmarkSet(image_id=image_id, dims=dims, landmarks=tuple(landmarks))
