"""Staged pipeline: images -> landmarks -> descriptor blocks -> all-pairs
similarity matrix, with per-stage wall-clock instrumentation.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imageio
from .config import RunConfig
from .descriptors import (
    BLOCK_SUFFIX,
    DescriptorBlock,
    describe_landmarks,
    project_block,
    read_block,
)
from .errors import ConfigError, LmvprError
from .evaluation import DatasetManifest, MatchRecord, SimilarityMatrix
from .geometry import ImageDims, LandmarkSet, dense_sample
from .matching import image_similarity, match_blocks
from .proposals import BOX_SUFFIX, load_proposals, select_overlap, select_scheme1, select_scheme2

_SCHEMES = {
    "scheme1": select_scheme1,
    "scheme2": select_scheme2,
    "overlap": select_overlap,
}


@dataclass
class StageTimings:
    """Accumulated seconds per pipeline stage, mirroring the three cost
    columns of the method-comparison table: landmark extraction, feature
    computation, and the remaining (matching + scoring) steps."""

    landmark_time: float = 0.0
    descriptor_time: float = 0.0
    matching_time: float = 0.0
    images: int = 0
    pairs: int = 0

    def merge(self, other: "StageTimings") -> None:
        self.landmark_time += other.landmark_time
        self.descriptor_time += other.descriptor_time
        self.matching_time += other.matching_time
        self.images += other.images
        self.pairs += other.pairs

    def per_image(self) -> dict[str, float]:
        n = max(self.images, 1)
        return {
            "extract_landmarks": self.landmark_time / n,
            "compute_features": self.descriptor_time / n,
            "remaining_steps": self.matching_time / max(self.pairs, 1),
        }

    def totals(self) -> dict[str, float]:
        return {
            "extract_landmarks": self.landmark_time,
            "compute_features": self.descriptor_time,
            "remaining_steps": self.matching_time,
        }


def timing_table(t: StageTimings, method: str) -> str:
    """Three-column cost table: per-image/per-pair means plus totals."""
    mean = t.per_image()
    total = t.totals()
    cols = ["extract_landmarks", "compute_features", "remaining_steps"]
    head = f"{'':24s}" + "".join(f"{c:>20s}" for c in cols)
    mean_row = f"{method + ' (mean s)':24s}" + "".join(f"{mean[c]:>20.6f}" for c in cols)
    tot_row = f"{method + ' (total s)':24s}" + "".join(f"{total[c]:>20.6f}" for c in cols)
    note = f"images={t.images} pairs={t.pairs}"
    return "\n".join([head, mean_row, tot_row, note])


def landmarks_for_image(image_id: str, path, config: RunConfig,
                        dims: ImageDims | None = None) -> LandmarkSet:
    """Run the configured landmark source for one image."""
    if dims is None:
        dims = imageio.image_dims(path)
    if config.landmarks.kind == "dense":
        return dense_sample(dims, config.landmarks.spec, image_id=image_id)
    box_path = Path(config.landmarks.dir) / f"{image_id}{BOX_SUFFIX}"
    plist = load_proposals(box_path, dims=dims, image_id=image_id)
    return _SCHEMES[config.landmarks.scheme](plist, config.landmarks.selection)


def block_for_image(image_id: str, path, config: RunConfig,
                    timings: StageTimings | None = None) -> DescriptorBlock:
    """Produce the descriptor block for one image per the run config.

    Stage timings cover compute only: image decode is common to every
    method and is excluded from the cost columns.
    """
    if config.descriptors.kind == "files":
        t0 = time.perf_counter()
        block = read_block(Path(config.descriptors.dir) / f"{image_id}{BLOCK_SUFFIX}",
                           image_id=image_id)
        t1 = time.perf_counter()
        if timings is not None:
            timings.descriptor_time += t1 - t0
            timings.images += 1
    else:
        image = imageio.load_image(path)
        dims = ImageDims(image.shape[1], image.shape[0])
        t0 = time.perf_counter()
        lset = landmarks_for_image(image_id, path, config, dims=dims)
        t1 = time.perf_counter()
        block = describe_landmarks(image, lset)
        t2 = time.perf_counter()
        if timings is not None:
            timings.landmark_time += t1 - t0
            timings.descriptor_time += t2 - t1
            timings.images += 1
    if config.projection is not None:
        if config.projection.target_dim > block.dim:
            raise ConfigError(
                f"projection target_dim {config.projection.target_dim} exceeds "
                f"descriptor dim {block.dim}"
            )
        if config.projection.target_dim < block.dim:
            block = project_block(block, config.projection)
    return block


@dataclass
class MatrixResult:
    matrix: SimilarityMatrix
    timings: StageTimings
    errors: list[tuple[str, str]] = field(default_factory=list)
    match_records: list[MatchRecord] | None = None


def _compute_blocks(entries, config: RunConfig, threads: int, errors, timings: StageTimings):
    """Blocks for an ordered (image_id, path) list; failures become None."""

    def one(entry):
        image_id, path = entry
        local = StageTimings()
        try:
            block = block_for_image(image_id, path, config, local)
            if len(block) == 0:
                raise LmvprError("image produced no landmarks")
            return block, local, None
        except LmvprError as exc:
            return None, local, str(exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, entries))
    else:
        results = [one(e) for e in entries]
    blocks = []
    for (image_id, _), (block, local, err) in zip(entries, results):
        timings.merge(local)
        if err is not None:
            errors.append((image_id, err))
        blocks.append(block)
    return blocks


def build_similarity_matrix(manifest: DatasetManifest, config: RunConfig,
                            threads: int = 1, collect_matches: bool = False) -> MatrixResult:
    """All-pairs image similarities for the manifest's query x reference grid.

    Per-image failures are collected, the affected rows/columns flagged
    invalid (values 0), and the run continues. Deterministic given config
    and seed regardless of thread count: cells are merged by index.
    """
    timings = StageTimings()
    errors: list[tuple[str, str]] = []
    q_blocks = _compute_blocks(manifest.queries, config, threads, errors, timings)
    r_blocks = _compute_blocks(manifest.references, config, threads, errors, timings)

    n_q, n_r = len(q_blocks), len(r_blocks)
    values = np.zeros((n_q, n_r), dtype=np.float64)
    records: list[MatchRecord] | None = [] if collect_matches else None

    tasks = [(qi, ri) for qi in range(n_q) for ri in range(n_r)
             if q_blocks[qi] is not None and r_blocks[ri] is not None]

    def one_pair(task):
        qi, ri = task
        qb, rb = q_blocks[qi], r_blocks[ri]
        t0 = time.perf_counter()
        matches = match_blocks(qb, rb, config.match)
        s = image_similarity(matches, len(qb), len(rb))
        dt = time.perf_counter() - t0
        return s, matches, dt

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pair_results = list(pool.map(one_pair, tasks))
    else:
        pair_results = [one_pair(t) for t in tasks]

    for (qi, ri), (s, matches, dt) in zip(tasks, pair_results):
        values[qi, ri] = s
        timings.matching_time += dt
        timings.pairs += 1
        if records is not None:
            qb, rb = q_blocks[qi], r_blocks[ri]
            q_marks = qb.landmarks.landmarks
            r_marks = rb.landmarks.landmarks
            for m in matches:
                records.append(MatchRecord(
                    query_id=qb.image_id, ref_id=rb.image_id,
                    query_idx=m.query_idx, ref_idx=m.ref_idx,
                    d=m.d, s=m.s, score=m.score,
                    query_scale=q_marks[m.query_idx].scale_index,
                    ref_scale=r_marks[m.ref_idx].scale_index,
                ))

    matrix = SimilarityMatrix(
        values,
        invalid_rows=tuple(i for i, b in enumerate(q_blocks) if b is None),
        invalid_cols=tuple(i for i, b in enumerate(r_blocks) if b is None),
    )
    return MatrixResult(matrix=matrix, timings=timings, errors=errors, match_records=records)
