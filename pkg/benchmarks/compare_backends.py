#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs every hot kernel on a representative workload under both backends and
prints per-kernel timings plus the speedup. Results are checked against each
other before timing; a disagreement aborts the run.

Usage:
    python benchmarks/compare_backends.py [--repeats 20]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from lmvpr.kernels import numpy_backend
try:
    from lmvpr.kernels import numba_backend
except ImportError:
    numba_backend = None


def _boxes(rng, n, span=600):
    w = rng.integers(20, 300, size=n)
    h = rng.integers(20, 300, size=n)
    x = rng.integers(0, span, size=n)
    y = rng.integers(0, span, size=n)
    return np.stack([x, y, w, h], axis=1).astype(np.float64)


def workloads(rng):
    """(name, call args factory, tolerance) per kernel, sized like one
    100-landmark image pair from the pipeline."""
    image = rng.random((480, 640))
    sample_boxes = _boxes(rng, 100, span=300).astype(np.int64)
    sample_boxes[:, 0] = np.minimum(sample_boxes[:, 0], 640 - sample_boxes[:, 2])
    sample_boxes[:, 1] = np.minimum(sample_boxes[:, 1], 480 - sample_boxes[:, 3])
    descs_a = rng.standard_normal((100, 144))
    descs_b = rng.standard_normal((100, 144))
    ranked = _boxes(rng, 1000)
    nms_boxes = _boxes(rng, 100, span=200)
    overlaps = numpy_backend.iou_matrix(nms_boxes, nms_boxes)
    scores = rng.uniform(0.0, 1.0, size=100)
    return [
        ("iou_matrix (1000x1000)", "iou_matrix", (ranked, ranked)),
        ("pairwise_cosine (100x100, d=144)", "pairwise_cosine", (descs_a, descs_b)),
        ("greedy_overlap_select (1000 -> 100)", "greedy_overlap_select", (ranked, 0.5, 100)),
        ("soft_nms_rescore (100 matches)", "soft_nms_rescore", (scores, overlaps, 0.3, 0.5)),
        ("patch_descriptors (100 boxes, 640x480)", "patch_descriptors", (image, sample_boxes)),
    ]


def bench(fn, args, repeats):
    fn(*args)  # warm up (JIT compile / cache fill)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if numba_backend is None:
        print("numba is not importable; nothing to compare")
        return 1

    rng = np.random.default_rng(args.seed)
    rows = []
    for label, name, call_args in workloads(rng):
        np_fn = getattr(numpy_backend, name)
        nb_fn = getattr(numba_backend, name)
        got_np = np_fn(*call_args)
        got_nb = nb_fn(*call_args)
        if not np.allclose(got_np, got_nb, atol=1e-9):
            print(f"MISMATCH in {name}; refusing to time disagreeing kernels")
            return 2
        t_np = bench(np_fn, call_args, args.repeats)
        t_nb = bench(nb_fn, call_args, args.repeats)
        rows.append((label, t_np, t_nb))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'numpy':>12}  {'numba':>12}  {'speedup':>8}")
    for label, t_np, t_nb in rows:
        print(f"{label:<{width}}  {t_np * 1e3:>10.3f}ms  {t_nb * 1e3:>10.3f}ms  "
              f"{t_np / t_nb:>7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
