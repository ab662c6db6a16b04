"""Ranked proposal-box ingestion and the landmark selection schemes.

Boxes come from files (one CSV per image, `x,y,w,h[,score]` per line);
selection consults only rank order and geometry, never the scores.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, GeometryError, ParseError
from .geometry import (
    BoundingBox,
    ImageDims,
    Landmark,
    LandmarkSet,
    area_ratio,
    scale_index,
)

BOX_SUFFIX = ".boxes.csv"
_HEADER_DIMS = re.compile(r"\bdims=(\d+)x(\d+)\b")
_HEADER_ID = re.compile(r"\bimage_id=(\S+)")


@dataclass(frozen=True)
class ProposalList:
    """Ranked candidate boxes for one image, best first."""

    image_id: str
    dims: ImageDims
    boxes: tuple[BoundingBox, ...]
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.scores is not None and len(self.scores) != len(self.boxes):
            raise DataError(
                f"{len(self.scores)} scores for {len(self.boxes)} boxes"
            )

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class SelectionConfig:
    limit: int = 100
    min_scale_index: int = 4
    scale_priority: tuple[int, ...] = (5, 6, 7, 8, 9, 4)
    iou_threshold: float = 0.4

    def __post_init__(self):
        if self.limit < 1:
            raise ConfigError(f"selection limit must be positive, got {self.limit}")
        if not 1 <= self.min_scale_index <= 9:
            raise ConfigError(f"min_scale_index must be in 1..9, got {self.min_scale_index}")
        if len(set(self.scale_priority)) != len(self.scale_priority):
            raise ConfigError("scale_priority must not repeat entries")
        for p in self.scale_priority:
            if not 1 <= p <= 9:
                raise ConfigError(f"scale_priority entries must be in 1..9, got {p}")
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ConfigError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")


def load_proposals(path, dims: ImageDims | None = None, image_id: str | None = None) -> ProposalList:
    """Parse a box CSV in rank order.

    `dims` may be omitted when the optional `#` header carries a
    `dims=WxH` token (files written by this package do). Every box is
    validated against the image bounds.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"box file not found: {path}")
    boxes: list[BoundingBox] = []
    scores: list[float] = []
    saw_score = False
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if lineno == 1:
                    if dims is None:
                        m = _HEADER_DIMS.search(line)
                        if m:
                            dims = ImageDims(int(m.group(1)), int(m.group(2)))
                    if image_id is None:
                        m = _HEADER_ID.search(line)
                        if m:
                            image_id = m.group(1)
                    continue
                raise ParseError("only the first line may be a '#' header", path=path, line=lineno)
            fields = line.split(",")
            if len(fields) not in (4, 5):
                raise ParseError(
                    f"expected 'x,y,w,h[,score]', got {len(fields)} fields", path=path, line=lineno
                )
            try:
                x, y, w, h = (int(f.strip()) for f in fields[:4])
            except ValueError as exc:
                raise ParseError(f"non-integer geometry: {exc}", path=path, line=lineno) from exc
            try:
                box = BoundingBox(x, y, w, h)
            except GeometryError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from exc
            if len(fields) == 5:
                try:
                    scores.append(float(fields[4]))
                except ValueError as exc:
                    raise ParseError(f"non-numeric score: {exc}", path=path, line=lineno) from exc
                saw_score = True
            boxes.append(box)
    if saw_score and len(scores) != len(boxes):
        raise ParseError("some lines carry a score and some do not", path=path)
    if dims is None:
        raise DataError(f"{path}: image dims unknown; pass dims= or use a 'dims=WxH' header")
    if image_id is None:
        image_id = path.name.removesuffix(BOX_SUFFIX).removesuffix(".csv")
    for i, box in enumerate(boxes):
        if not box.is_inside(dims):
            raise DataError(
                f"{path}: box {i} {box.as_tuple()} outside the {dims.width}x{dims.height} image"
            )
    return ProposalList(
        image_id=image_id,
        dims=dims,
        boxes=tuple(boxes),
        scores=tuple(scores) if saw_score else None,
    )


def write_boxes_csv(path, boxes: Iterable[BoundingBox], dims: ImageDims, image_id: str,
                    scores: Sequence[float] | None = None, meta: str = "") -> None:
    """Write boxes in the CSV interchange format, with a `#` header carrying
    image id, dims, and any run metadata."""
    path = Path(path)
    header = f"# lmvpr boxes image_id={image_id} dims={dims.width}x{dims.height}"
    if meta:
        header += f" {meta}"
    lines = [header]
    for i, box in enumerate(boxes):
        line = f"{box.x},{box.y},{box.w},{box.h}"
        if scores is not None:
            line += f",{scores[i]!r}"
        lines.append(line)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _as_landmark(box: BoundingBox, dims: ImageDims) -> Landmark:
    ratio = area_ratio(box, dims)
    return Landmark(box, ratio, scale_index(ratio))


def _result(p: ProposalList, chosen: Sequence[Landmark], limit: int) -> LandmarkSet:
    return LandmarkSet(
        image_id=p.image_id,
        dims=p.dims,
        landmarks=tuple(chosen),
        underfull=len(chosen) < limit,
    )


def select_scheme1(p: ProposalList, cfg: SelectionConfig = SelectionConfig()) -> LandmarkSet:
    """Rank-order pass keeping the first `limit` boxes whose scale index is
    at least cfg.min_scale_index (default: larger than Scale 3)."""
    if not p.boxes:
        raise DataError(f"{p.image_id}: no proposals to select from")
    chosen = []
    for box in p.boxes:
        lm = _as_landmark(box, p.dims)
        if lm.scale_index >= cfg.min_scale_index:
            chosen.append(lm)
            if len(chosen) == cfg.limit:
                break
    return _result(p, chosen, cfg.limit)


def select_scheme2(p: ProposalList, cfg: SelectionConfig = SelectionConfig()) -> LandmarkSet:
    """Scale-priority selection: one full pass over the ranked list per
    priority entry, keeping boxes of exactly that scale, until `limit`."""
    landmarks = [_as_landmark(box, p.dims) for box in p.boxes]
    chosen = []
    for wanted in cfg.scale_priority:
        for lm in landmarks:
            if lm.scale_index == wanted:
                chosen.append(lm)
                if len(chosen) == cfg.limit:
                    return _result(p, chosen, cfg.limit)
    return _result(p, chosen, cfg.limit)


def select_overlap(p: ProposalList, cfg: SelectionConfig = SelectionConfig()) -> LandmarkSet:
    """Greedy rank-order scan accepting a box iff its IoU with every accepted
    box stays at or below cfg.iou_threshold; the first box is always kept."""
    if not p.boxes:
        return _result(p, [], cfg.limit)
    arr = np.array([box.as_tuple() for box in p.boxes], dtype=np.float64)
    idx = kernels.greedy_overlap_select(arr, cfg.iou_threshold, cfg.limit)
    chosen = [_as_landmark(p.boxes[i], p.dims) for i in idx]
    return _result(p, chosen, cfg.limit)
