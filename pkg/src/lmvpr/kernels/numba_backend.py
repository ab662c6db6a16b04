"""Numba-compiled implementations of the hot kernels.

Same contracts as `numpy_backend`; selected via the LMVPR_BACKEND env flag.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

NAME = "numba"

PATCH_SIDE = 32
GRID_CELLS = 4
ORIENT_BINS = 8
INTENSITY_BINS = 16
DESCRIPTOR_DIM = GRID_CELLS * GRID_CELLS * ORIENT_BINS + INTENSITY_BINS


@njit(cache=True)
def _iou_matrix(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        ax0, ay0, aw, ah = a[i, 0], a[i, 1], a[i, 2], a[i, 3]
        ax1 = ax0 + aw
        ay1 = ay0 + ah
        for j in range(m):
            bx0, by0, bw, bh = b[j, 0], b[j, 1], b[j, 2], b[j, 3]
            iw = min(ax1, bx0 + bw) - max(ax0, bx0)
            ih = min(ay1, by0 + bh) - max(ay0, by0)
            inter = max(iw, 0.0) * max(ih, 0.0)
            out[i, j] = inter / (aw * ah + bw * bh - inter)
    return out


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _iou_matrix(np.ascontiguousarray(a, dtype=np.float64),
                       np.ascontiguousarray(b, dtype=np.float64))


@njit(cache=True)
def _pairwise_cosine(a, b):
    na = a.shape[0]
    nb = b.shape[0]
    d = a.shape[1]
    an = np.empty(na, dtype=np.float64)
    bn = np.empty(nb, dtype=np.float64)
    for i in range(na):
        s = 0.0
        for k in range(d):
            s += a[i, k] * a[i, k]
        an[i] = math.sqrt(s)
    for j in range(nb):
        s = 0.0
        for k in range(d):
            s += b[j, k] * b[j, k]
        bn[j] = math.sqrt(s)
    out = np.empty((na, nb), dtype=np.float64)
    for i in range(na):
        for j in range(nb):
            if an[i] > 0.0 and bn[j] > 0.0:
                dot = 0.0
                for k in range(d):
                    dot += a[i, k] * b[j, k]
                v = 1.0 - dot / (an[i] * bn[j])
                if v < 0.0:
                    v = 0.0
                elif v > 2.0:
                    v = 2.0
                out[i, j] = v
            else:
                out[i, j] = 1.0
    return out


def pairwise_cosine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _pairwise_cosine(np.ascontiguousarray(a, dtype=np.float64),
                            np.ascontiguousarray(b, dtype=np.float64))


@njit(cache=True)
def _greedy_overlap_select(boxes, threshold, limit):
    n = boxes.shape[0]
    selected = np.empty(min(n, limit), dtype=np.int64)
    count = 0
    for i in range(n):
        keep = True
        x0 = boxes[i, 0]
        y0 = boxes[i, 1]
        x1 = x0 + boxes[i, 2]
        y1 = y0 + boxes[i, 3]
        area = boxes[i, 2] * boxes[i, 3]
        for si in range(count):
            j = selected[si]
            iw = min(x1, boxes[j, 0] + boxes[j, 2]) - max(x0, boxes[j, 0])
            ih = min(y1, boxes[j, 1] + boxes[j, 3]) - max(y0, boxes[j, 1])
            inter = max(iw, 0.0) * max(ih, 0.0)
            ov = inter / (area + boxes[j, 2] * boxes[j, 3] - inter)
            if ov > threshold:
                keep = False
                break
        if keep:
            selected[count] = i
            count += 1
            if count == limit:
                break
    return selected[:count].copy()


def greedy_overlap_select(boxes: np.ndarray, threshold: float, limit: int) -> np.ndarray:
    boxes = np.ascontiguousarray(boxes, dtype=np.float64)
    if boxes.shape[0] == 0 or limit < 1:
        return np.empty(0, dtype=np.int64)
    return _greedy_overlap_select(boxes, float(threshold), int(limit))


@njit(cache=True)
def _soft_nms_rescore(scores, overlaps, threshold, sigma):
    n = scores.shape[0]
    out = scores.copy()
    remaining = np.ones(n, dtype=np.bool_)
    for _ in range(n):
        m = -1
        best = -np.inf
        for i in range(n):
            if remaining[i] and out[i] > best:
                best = out[i]
                m = i
        remaining[m] = False
        for i in range(n):
            if remaining[i] and overlaps[i, m] > threshold:
                out[i] *= math.exp(-(overlaps[i, m] * overlaps[i, m]) / sigma)
    return out


def soft_nms_rescore(scores: np.ndarray, overlaps: np.ndarray, threshold: float, sigma: float) -> np.ndarray:
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    if scores.shape[0] == 0:
        return scores.copy()
    return _soft_nms_rescore(scores, np.ascontiguousarray(overlaps, dtype=np.float64),
                             float(threshold), float(sigma))


@njit(cache=True)
def _axis_weights(src, dst):
    w = np.zeros((dst, src), dtype=np.float64)
    scale = src / dst
    for j in range(dst):
        lo = j * scale
        hi = lo + scale
        k0 = int(math.floor(lo))
        k1 = min(int(math.ceil(hi)), src)
        for k in range(k0, k1):
            ov = min(hi, k + 1.0) - max(lo, float(k))
            if ov > 0:
                w[j, k] = ov / scale
    return w


@njit(cache=True)
def _resize_area(patch, side):
    h, w = patch.shape
    wr = _axis_weights(h, side)
    wc = _axis_weights(w, side)
    tmp = np.zeros((side, w), dtype=np.float64)
    for j in range(side):
        for k in range(h):
            wk = wr[j, k]
            if wk != 0.0:
                for c in range(w):
                    tmp[j, c] += wk * patch[k, c]
    out = np.zeros((side, side), dtype=np.float64)
    for j in range(side):
        for i in range(side):
            s = 0.0
            for c in range(w):
                s += tmp[j, c] * wc[i, c]
            out[j, i] = s
    return out


def resize_area(patch: np.ndarray, side: int = PATCH_SIDE) -> np.ndarray:
    return _resize_area(np.ascontiguousarray(patch, dtype=np.float64), side)


@njit(cache=True)
def _patch_descriptors(image, boxes):
    n = boxes.shape[0]
    cell = PATCH_SIDE // GRID_CELLS
    orient_scale = ORIENT_BINS / (2.0 * math.pi)
    out = np.empty((n, DESCRIPTOR_DIM), dtype=np.float64)
    for bi in range(n):
        x, y, w, h = boxes[bi, 0], boxes[bi, 1], boxes[bi, 2], boxes[bi, 3]
        grid = _resize_area(image[y:y + h, x:x + w], PATCH_SIDE)
        desc = np.zeros(DESCRIPTOR_DIM, dtype=np.float64)
        for i in range(PATCH_SIDE):
            for j in range(PATCH_SIDE):
                if 0 < j < PATCH_SIDE - 1:
                    gx = (grid[i, j + 1] - grid[i, j - 1]) * 0.5
                elif j == 0:
                    gx = grid[i, 1] - grid[i, 0]
                else:
                    gx = grid[i, PATCH_SIDE - 1] - grid[i, PATCH_SIDE - 2]
                if 0 < i < PATCH_SIDE - 1:
                    gy = (grid[i + 1, j] - grid[i - 1, j]) * 0.5
                elif i == 0:
                    gy = grid[1, j] - grid[0, j]
                else:
                    gy = grid[PATCH_SIDE - 1, j] - grid[PATCH_SIDE - 2, j]
                mag = math.hypot(gx, gy)
                ob = int((math.atan2(gy, gx) + math.pi) * orient_scale)
                if ob > ORIENT_BINS - 1:
                    ob = ORIENT_BINS - 1
                ci = (i // cell) * GRID_CELLS + (j // cell)
                desc[ci * ORIENT_BINS + ob] += mag

                v = grid[i, j]
                if v < 0.0:
                    v = 0.0
                elif v > 1.0:
                    v = 1.0
                ib = int(v * INTENSITY_BINS)
                if ib > INTENSITY_BINS - 1:
                    ib = INTENSITY_BINS - 1
                desc[GRID_CELLS * GRID_CELLS * ORIENT_BINS + ib] += 1.0
        for k in range(INTENSITY_BINS):
            desc[GRID_CELLS * GRID_CELLS * ORIENT_BINS + k] /= PATCH_SIDE * PATCH_SIDE
        norm = 0.0
        for k in range(DESCRIPTOR_DIM):
            norm += desc[k] * desc[k]
        norm = math.sqrt(norm)
        if norm > 0.0:
            for k in range(DESCRIPTOR_DIM):
                desc[k] /= norm
        out[bi] = desc
    return out


def patch_descriptors(image: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    image = np.ascontiguousarray(image, dtype=np.float64)
    boxes = np.ascontiguousarray(boxes, dtype=np.int64)
    if boxes.shape[0] == 0:
        return np.empty((0, DESCRIPTOR_DIM), dtype=np.float64)
    return _patch_descriptors(image, boxes)
