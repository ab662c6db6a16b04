"""Pure-numpy implementations of the hot kernels.

Same contracts as `numba_backend`; selected via the LMVPR_BACKEND env flag.
"""
from __future__ import annotations

import numpy as np

NAME = "numpy"

PATCH_SIDE = 32
GRID_CELLS = 4
ORIENT_BINS = 8
INTENSITY_BINS = 16
DESCRIPTOR_DIM = GRID_CELLS * GRID_CELLS * ORIENT_BINS + INTENSITY_BINS


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (n, 4) and (m, 4) x,y,w,h boxes -> (n, m) float64."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ax0, ay0 = a[:, 0:1], a[:, 1:2]
    ax1, ay1 = ax0 + a[:, 2:3], ay0 + a[:, 3:4]
    bx0, by0 = b[None, :, 0], b[None, :, 1]
    bx1, by1 = bx0 + b[None, :, 2], by0 + b[None, :, 3]
    iw = np.minimum(ax1, bx1) - np.maximum(ax0, bx0)
    ih = np.minimum(ay1, by1) - np.maximum(ay0, by0)
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    union = a[:, 2:3] * a[:, 3:4] + (b[None, :, 2] * b[None, :, 3]) - inter
    return inter / union


def pairwise_cosine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosine distances between all rows of a (na, d) and b (nb, d).

    Zero-norm rows get distance 1 to everything (uninformative by definition).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    an = np.linalg.norm(a, axis=1, keepdims=True)
    bn = np.linalg.norm(b, axis=1, keepdims=True)
    au = np.divide(a, an, out=np.zeros_like(a), where=an > 0)
    bu = np.divide(b, bn, out=np.zeros_like(b), where=bn > 0)
    d = 1.0 - au @ bu.T
    return np.clip(d, 0.0, 2.0)


def greedy_overlap_select(boxes: np.ndarray, threshold: float, limit: int) -> np.ndarray:
    """Greedy rank-order scan: keep a box iff its IoU with every kept box is
    <= threshold; stop after `limit` boxes. Returns kept indices, int64.
    """
    boxes = np.asarray(boxes, dtype=np.float64)
    n = boxes.shape[0]
    selected: list[int] = []
    if n == 0 or limit < 1:
        return np.empty(0, dtype=np.int64)
    x0, y0 = boxes[:, 0], boxes[:, 1]
    x1, y1 = x0 + boxes[:, 2], y0 + boxes[:, 3]
    areas = boxes[:, 2] * boxes[:, 3]
    for i in range(n):
        if selected:
            s = np.array(selected)
            iw = np.minimum(x1[i], x1[s]) - np.maximum(x0[i], x0[s])
            ih = np.minimum(y1[i], y1[s]) - np.maximum(y0[i], y0[s])
            inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
            overlap = inter / (areas[i] + areas[s] - inter)
            if np.any(overlap > threshold):
                continue
        selected.append(i)
        if len(selected) == limit:
            break
    return np.array(selected, dtype=np.int64)


def soft_nms_rescore(scores: np.ndarray, overlaps: np.ndarray, threshold: float, sigma: float) -> np.ndarray:
    """Gaussian soft suppression over a precomputed (n, n) overlap matrix.

    Repeatedly takes the highest-scoring unprocessed entry m and multiplies
    every remaining score i with overlaps[i, m] > threshold by
    exp(-overlaps[i, m]^2 / sigma). Ties break to the lowest index.
    """
    out = np.asarray(scores, dtype=np.float64).copy()
    n = out.shape[0]
    remaining = np.ones(n, dtype=bool)
    for _ in range(n):
        masked = np.where(remaining, out, -np.inf)
        m = int(np.argmax(masked))
        remaining[m] = False
        ov = overlaps[:, m]
        hit = remaining & (ov > threshold)
        out[hit] *= np.exp(-(ov[hit] ** 2) / sigma)
    return out


def _axis_weights(src: int, dst: int) -> np.ndarray:
    """(dst, src) area-overlap weights; each output cell averages the source
    interval [j*src/dst, (j+1)*src/dst). Rows sum to 1."""
    w = np.zeros((dst, src), dtype=np.float64)
    scale = src / dst
    for j in range(dst):
        lo = j * scale
        hi = lo + scale
        k0 = int(np.floor(lo))
        k1 = min(int(np.ceil(hi)), src)
        for k in range(k0, k1):
            ov = min(hi, k + 1.0) - max(lo, float(k))
            if ov > 0:
                w[j, k] = ov / scale
    return w


def resize_area(patch: np.ndarray, side: int = PATCH_SIDE) -> np.ndarray:
    """Exact area-average resample of a 2-D patch to side x side."""
    patch = np.asarray(patch, dtype=np.float64)
    wr = _axis_weights(patch.shape[0], side)
    wc = _axis_weights(patch.shape[1], side)
    return wr @ patch @ wc.T


def _descriptor_from_grid(grid: np.ndarray) -> np.ndarray:
    cell = PATCH_SIDE // GRID_CELLS
    gx = np.empty_like(grid)
    gy = np.empty_like(grid)
    gx[:, 1:-1] = (grid[:, 2:] - grid[:, :-2]) * 0.5
    gx[:, 0] = grid[:, 1] - grid[:, 0]
    gx[:, -1] = grid[:, -1] - grid[:, -2]
    gy[1:-1, :] = (grid[2:, :] - grid[:-2, :]) * 0.5
    gy[0, :] = grid[1, :] - grid[0, :]
    gy[-1, :] = grid[-1, :] - grid[-2, :]

    mag = np.hypot(gx, gy)
    theta = np.arctan2(gy, gx)
    ob = np.minimum((theta + np.pi) * (ORIENT_BINS / (2.0 * np.pi)), ORIENT_BINS - 1).astype(np.int64)
    rows = np.arange(PATCH_SIDE) // cell
    cell_idx = rows[:, None] * GRID_CELLS + rows[None, :]
    flat_bins = cell_idx * ORIENT_BINS + ob
    grad_hist = np.bincount(flat_bins.ravel(), weights=mag.ravel(),
                            minlength=GRID_CELLS * GRID_CELLS * ORIENT_BINS)

    ib = np.minimum((np.clip(grid, 0.0, 1.0) * INTENSITY_BINS).astype(np.int64), INTENSITY_BINS - 1)
    int_hist = np.bincount(ib.ravel(), minlength=INTENSITY_BINS).astype(np.float64)
    int_hist /= PATCH_SIDE * PATCH_SIDE

    desc = np.concatenate([grad_hist, int_hist])
    norm = np.sqrt(np.sum(desc * desc))
    if norm > 0:
        desc /= norm
    return desc


def patch_descriptors(image: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """144-d gradient+intensity descriptors for every x,y,w,h box.

    The box is cropped, area-averaged to 32x32, described by an 8-orientation
    gradient histogram on a 4x4 cell grid plus a 16-bin intensity histogram,
    and L2-normalized.
    """
    image = np.asarray(image, dtype=np.float64)
    boxes = np.asarray(boxes, dtype=np.int64)
    out = np.empty((boxes.shape[0], DESCRIPTOR_DIM), dtype=np.float64)
    for i in range(boxes.shape[0]):
        x, y, w, h = boxes[i]
        grid = resize_area(image[y:y + h, x:x + w])
        out[i] = _descriptor_from_grid(grid)
    return out
