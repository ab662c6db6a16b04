"""Reciprocal nearest-neighbor landmark matching, shape-weighted match
scores, image-similarity aggregation, and soft-NMS match rescoring.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import ConfigError, DataError
from .geometry import BoundingBox, LandmarkSet

NEGATIVE = "negative"
POSITIVE = "positive"


@dataclass(frozen=True)
class MatchPair:
    """One reciprocal landmark correspondence.

    `score` is 1 - d * s at construction; soft-NMS may lower it afterwards.
    """

    query_idx: int
    ref_idx: int
    d: float
    s: float
    score: float


@dataclass(frozen=True)
class SoftNmsConfig:
    iou_threshold: float
    sigma: float = 0.5
    side: str = "query"

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ConfigError(f"soft-NMS IoU threshold must be in (0, 1], got {self.iou_threshold}")
        if self.sigma <= 0.0:
            raise ConfigError(f"soft-NMS sigma must be positive, got {self.sigma}")
        if self.side not in ("query", "reference"):
            raise ConfigError(f"soft-NMS side must be 'query' or 'reference', got {self.side!r}")


@dataclass(frozen=True)
class MatchConfig:
    # The printed shape-similarity formula has a positive exponent, which
    # rewards mismatched shapes; the decaying (negative) form is the default
    # and the printed form stays selectable.
    shape_exponent_sign: str = NEGATIVE
    soft_nms: SoftNmsConfig | None = None

    def __post_init__(self):
        if self.shape_exponent_sign not in (NEGATIVE, POSITIVE):
            raise ConfigError(
                f"shape_exponent_sign must be '{NEGATIVE}' or '{POSITIVE}', got {self.shape_exponent_sign!r}"
            )

    @property
    def sign(self) -> float:
        return -1.0 if self.shape_exponent_sign == NEGATIVE else 1.0


def reciprocal_matches(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int, float]]:
    """Mutual nearest neighbors under cosine distance.

    Pair (i, j) is kept iff j is i's nearest row of b and i is j's nearest
    row of a. Ties break to the lowest index in both directions, so each
    landmark appears in at most one pair. Returns (i, j, d) sorted by i.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise DataError("descriptor matrices must be 2-D")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise DataError("reciprocal matching needs nonempty blocks on both sides")
    if a.shape[1] != b.shape[1]:
        raise DataError(f"descriptor dims differ: {a.shape[1]} vs {b.shape[1]}")
    dist = kernels.pairwise_cosine(a, b)
    nn_ab = dist.argmin(axis=1)
    nn_ba = dist.argmin(axis=0)
    out = []
    for i, j in enumerate(nn_ab):
        if nn_ba[j] == i:
            out.append((i, int(j), float(dist[i, j])))
    return out


def shape_similarity(bi: BoundingBox, bj: BoundingBox, sign: float = -1.0) -> float:
    """Exponential weight on the width/height discrepancy of two boxes.

    s = exp(sign * 0.5 * (|wi-wj|/max(wi,wj) + |hi-hj|/max(hi,hj))); identical
    boxes give 1 under either sign.
    """
    dw = abs(bi.w - bj.w) / max(bi.w, bj.w)
    dh = abs(bi.h - bj.h) / max(bi.h, bj.h)
    return math.exp(sign * 0.5 * (dw + dh))


def match_blocks(query, reference, cfg: MatchConfig = MatchConfig()) -> list[MatchPair]:
    """Reciprocal matches between two descriptor blocks, scored 1 - d * s,
    with soft-NMS rescoring when configured."""
    pairs = reciprocal_matches(query.vectors, reference.vectors)
    q_marks = query.landmarks.landmarks
    r_marks = reference.landmarks.landmarks
    matches = []
    for i, j, d in pairs:
        s = shape_similarity(q_marks[i].box, r_marks[j].box, cfg.sign)
        matches.append(MatchPair(i, j, d, s, 1.0 - d * s))
    if cfg.soft_nms is not None:
        side = query.landmarks if cfg.soft_nms.side == "query" else reference.landmarks
        matches = soft_nms_rescore(matches, side, cfg.soft_nms)
    return matches


def image_similarity(matches: list[MatchPair], n_a: int, n_b: int) -> float:
    """Overall similarity: sum of match scores over sqrt(n_a * n_b).

    The counts include non-matched landmarks. Negative contributions are
    kept as-is; the formula places no clamp.
    """
    if n_a < 1 or n_b < 1:
        raise DataError(f"landmark counts must be positive, got n_a={n_a}, n_b={n_b}")
    for m in matches:
        if not (0 <= m.query_idx < n_a and 0 <= m.ref_idx < n_b):
            raise DataError(f"match ({m.query_idx}, {m.ref_idx}) outside {n_a}x{n_b} landmark sets")
    return sum(m.score for m in matches) / math.sqrt(n_a * n_b)


def soft_nms_rescore(matches: list[MatchPair], boxes: LandmarkSet, cfg: SoftNmsConfig) -> list[MatchPair]:
    """Gaussian soft suppression of overlapping matches.

    Iteratively takes the unprocessed match with the highest score and decays
    every remaining match whose box overlaps it with IoU > threshold by
    exp(-IoU^2 / sigma). Membership and order are unchanged; only scores
    drop. Boxes come from the match side named by cfg.side (query by
    default), indexed by that side's landmark index.
    """
    if not matches:
        return []
    marks = boxes.landmarks
    idx_of = (lambda m: m.query_idx) if cfg.side == "query" else (lambda m: m.ref_idx)
    arr = np.array([marks[idx_of(m)].box.as_tuple() for m in matches], dtype=np.float64)
    overlaps = kernels.iou_matrix(arr, arr)
    scores = np.array([m.score for m in matches], dtype=np.float64)
    rescored = kernels.soft_nms_rescore(scores, overlaps, cfg.iou_threshold, cfg.sigma)
    return [replace(m, score=float(v)) for m, v in zip(matches, rescored)]
