"""Similarity-matrix evaluation: ratio-test precision-recall curves,
per-scale study statistics, and coverage heatmaps.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .geometry import NUM_SCALE_BINS, LandmarkSet

GT_CHANNEL = 0
IRRELEVANT_CHANNEL = 1
DEFAULT_THRESHOLD_COUNT = 101

_MANIFEST_KEYS = {"queries", "references", "ground_truth", "frame_tolerance"}


@dataclass(frozen=True)
class DatasetManifest:
    """Query/reference image lists with ground-truth association.

    Each query has at most one ground-truth reference index; a retrieved
    reference within `frame_tolerance` frames of it counts as correct.
    """

    queries: tuple[tuple[str, Path], ...]
    references: tuple[tuple[str, Path], ...]
    ground_truth: dict[int, int]
    frame_tolerance: int = 1

    def __post_init__(self):
        if self.frame_tolerance < 0:
            raise ConfigError(f"frame_tolerance must be non-negative, got {self.frame_tolerance}")
        for q, r in self.ground_truth.items():
            if not 0 <= q < len(self.queries):
                raise DataError(f"ground-truth query index {q} out of range")
            if not 0 <= r < len(self.references):
                raise DataError(f"ground-truth reference index {r} out of range")

    @classmethod
    def from_json(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", path=path) from exc
        if not isinstance(raw, dict):
            raise ParseError("manifest must be a JSON object", path=path)
        unknown = set(raw) - _MANIFEST_KEYS
        if unknown:
            raise ParseError(f"unknown manifest keys: {sorted(unknown)}", path=path)
        base = path.parent

        def entries(key):
            out = []
            for i, item in enumerate(raw.get(key, [])):
                if isinstance(item, dict):
                    extra = set(item) - {"id", "path"}
                    if extra or "id" not in item or "path" not in item:
                        raise ParseError(f"{key}[{i}] needs exactly 'id' and 'path'", path=path)
                    out.append((str(item["id"]), base / item["path"]))
                elif isinstance(item, (list, tuple)) and len(item) == 2:
                    out.append((str(item[0]), base / item[1]))
                else:
                    raise ParseError(f"{key}[{i}] must be an id/path pair", path=path)
            return tuple(out)

        gt_raw = raw.get("ground_truth", {})
        if isinstance(gt_raw, dict):
            gt = {int(k): int(v) for k, v in gt_raw.items()}
        else:
            gt = {int(k): int(v) for k, v in gt_raw}
        return cls(
            queries=entries("queries"),
            references=entries("references"),
            ground_truth=gt,
            frame_tolerance=int(raw.get("frame_tolerance", 1)),
        )

    def gt_pairs(self) -> set[tuple[str, str]]:
        """(query_id, reference_id) pairs that count as ground truth, with
        the frame tolerance applied."""
        pairs = set()
        for q, r in self.ground_truth.items():
            for k in range(r - self.frame_tolerance, r + self.frame_tolerance + 1):
                if 0 <= k < len(self.references):
                    pairs.add((self.queries[q][0], self.references[k][0]))
        return pairs


@dataclass(frozen=True)
class SimilarityMatrix:
    """All-pairs image similarities, queries as rows."""

    values: np.ndarray
    invalid_rows: tuple[int, ...] = ()
    invalid_cols: tuple[int, ...] = ()

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DataError("similarity matrix must be 2-D")
        if not np.all(np.isfinite(vals)):
            raise DataError("similarity matrix contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class PRCurve:
    """Precision-recall points over a strictly increasing threshold grid.

    Thresholds where nothing is accepted record precision 1 by convention
    and are flagged.
    """

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    undefined_precision: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        if t.size and np.any(np.diff(t) <= 0):
            raise DataError("thresholds must be strictly increasing")

    def points(self):
        return list(zip(self.thresholds.tolist(), self.precision.tolist(), self.recall.tolist()))


def default_thresholds(count: int = DEFAULT_THRESHOLD_COUNT) -> np.ndarray:
    return np.linspace(0.0, 1.0, count)


def pr_curve(m: SimilarityMatrix, manifest: DatasetManifest, thresholds=None) -> PRCurve:
    """Ratio-test PR curve.

    Per query, the best reference is accepted at threshold t iff the
    second-best/best similarity ratio is <= t (non-positive best similarity
    never accepts below t = 1). An accepted query is a true positive iff its
    best reference lies within frame_tolerance of the ground truth; queries
    flagged invalid are never accepted but still count toward recall's
    denominator when they have ground truth.
    """
    if thresholds is None:
        thresholds = default_thresholds()
    thresholds = np.asarray(thresholds, dtype=np.float64)
    vals = m.values
    n_q, n_r = vals.shape
    if n_q != len(manifest.queries) or n_r != len(manifest.references):
        raise DataError(
            f"matrix is {n_q}x{n_r} but manifest has {len(manifest.queries)} queries "
            f"and {len(manifest.references)} references"
        )
    valid_cols = np.array([c for c in range(n_r) if c not in set(m.invalid_cols)])
    if valid_cols.size < 2:
        raise DataError("ratio test needs at least two valid reference columns")
    invalid_rows = set(m.invalid_rows)

    ratios = np.full(n_q, np.inf)  # inf: never accepted (invalid rows)
    correct = np.zeros(n_q, dtype=bool)
    for q in range(n_q):
        if q in invalid_rows:
            continue
        row = vals[q, valid_cols]
        order = np.argsort(-row, kind="stable")
        s1 = row[order[0]]
        s2 = row[order[1]]
        best_ref = int(valid_cols[order[0]])
        if s1 <= 0.0:
            ratios[q] = 1.0
        else:
            ratios[q] = min(max(s2 / s1, 0.0), 1.0)
        gt = manifest.ground_truth.get(q)
        correct[q] = gt is not None and abs(best_ref - gt) <= manifest.frame_tolerance

    n_gt = len(manifest.ground_truth)
    precision = np.empty_like(thresholds)
    recall = np.empty_like(thresholds)
    undefined = np.zeros(thresholds.shape, dtype=bool)
    for k, theta in enumerate(thresholds):
        accepted = ratios <= theta
        tp = int(np.count_nonzero(accepted & correct))
        fp = int(np.count_nonzero(accepted & ~correct))
        if tp + fp == 0:
            precision[k] = 1.0
            undefined[k] = True
        else:
            precision[k] = tp / (tp + fp)
        recall[k] = tp / n_gt if n_gt else 0.0
    return PRCurve(thresholds, precision, recall, undefined)


@dataclass(frozen=True)
class MatchRecord:
    """One matched landmark pair from a per-pair match dump."""

    query_id: str
    ref_id: str
    query_idx: int
    ref_idx: int
    d: float
    s: float
    score: float
    query_scale: int
    ref_scale: int


@dataclass
class StudyRecord:
    """Per-scale accumulators, split into ground-truth-pair and
    irrelevant-pair channels. Empty bins report None, never 0."""

    match_count: np.ndarray = field(default_factory=lambda: np.zeros((2, NUM_SCALE_BINS), dtype=np.int64))
    score_sum: np.ndarray = field(default_factory=lambda: np.zeros((2, NUM_SCALE_BINS)))
    true_count: np.ndarray = field(default_factory=lambda: np.zeros(NUM_SCALE_BINS, dtype=np.int64))
    has_labels: bool = False

    def cmr(self) -> list[float | None]:
        """Correct-match rate per scale over ground-truth pairs."""
        if not self.has_labels:
            raise DataError("CMR requires true/false match labels")
        out = []
        for k in range(NUM_SCALE_BINS):
            n = int(self.match_count[GT_CHANNEL, k])
            out.append(None if n == 0 else int(self.true_count[k]) / n)
        return out

    def cls(self) -> tuple[list[float | None], list[float | None]]:
        """Per-scale share of the summed contribution scores, per channel."""
        result = []
        for ch in (GT_CHANNEL, IRRELEVANT_CHANNEL):
            total = float(self.score_sum[ch].sum())
            col: list[float | None] = []
            for k in range(NUM_SCALE_BINS):
                if self.match_count[ch, k] == 0 or total == 0.0:
                    col.append(None)
                else:
                    col.append(float(self.score_sum[ch, k]) / total)
            result.append(col)
        return result[0], result[1]

    def asl(self) -> tuple[list[float | None], list[float | None]]:
        """Mean per-match score per scale, per channel."""
        result = []
        for ch in (GT_CHANNEL, IRRELEVANT_CHANNEL):
            col: list[float | None] = []
            for k in range(NUM_SCALE_BINS):
                n = int(self.match_count[ch, k])
                col.append(None if n == 0 else float(self.score_sum[ch, k]) / n)
            result.append(col)
        return result[0], result[1]


def study_stats(records, gt_pairs: set[tuple[str, str]],
                labels: dict[tuple[str, str, int, int], bool] | None = None) -> StudyRecord:
    """Aggregate match records into per-scale study statistics.

    Matches are binned by the query-side landmark's scale index. A record
    joins the ground-truth channel iff its (query_id, ref_id) pair is in
    gt_pairs. When labels are given, every ground-truth-channel record must
    be labeled.
    """
    rec = StudyRecord(has_labels=labels is not None)
    for r in records:
        if not 1 <= r.query_scale <= NUM_SCALE_BINS:
            raise DataError(f"scale index {r.query_scale} outside 1..{NUM_SCALE_BINS}")
        ch = GT_CHANNEL if (r.query_id, r.ref_id) in gt_pairs else IRRELEVANT_CHANNEL
        k = r.query_scale - 1
        rec.match_count[ch, k] += 1
        rec.score_sum[ch, k] += r.score
        if labels is not None and ch == GT_CHANNEL:
            key = (r.query_id, r.ref_id, r.query_idx, r.ref_idx)
            if key not in labels:
                raise DataError(f"unlabeled ground-truth match {key}")
            if labels[key]:
                rec.true_count[k] += 1
    return rec


def coverage_heatmap(lset: LandmarkSet) -> np.ndarray:
    """Per-pixel landmark cover counts, as an (H, W) int32 grid."""
    grid = np.zeros((lset.dims.height, lset.dims.width), dtype=np.int32)
    for lm in lset.landmarks:
        b = lm.box
        grid[b.y:b.y + b.h, b.x:b.x + b.w] += 1
    return grid
