"""Shared synthetic-data helpers for the test suite."""
from __future__ import annotations

import numpy as np


def smooth(a: np.ndarray, k: int) -> np.ndarray:
    """Separable box blur applied three times; close enough to Gaussian."""
    ker = np.ones(k) / k
    for _ in range(3):
        a = np.apply_along_axis(lambda r: np.convolve(r, ker, mode="same"), 1, a)
        a = np.apply_along_axis(lambda c: np.convolve(c, ker, mode="same"), 0, a)
    return a


def rank_equalize(a: np.ndarray) -> np.ndarray:
    """Rank-transform pixels to a uniform [0, 1] histogram.

    Every image gets the identical intensity distribution, so global
    statistics stop discriminating places and only spatial layout is left."""
    flat = a.ravel()
    order = np.argsort(flat, kind="stable")
    out = np.empty_like(flat)
    out[order] = np.linspace(0.0, 1.0, flat.size)
    return out.reshape(a.shape)


def textured_image(rng: np.random.Generator, height: int, width: int, k: int = 9) -> np.ndarray:
    return rank_equalize(smooth(rng.random((height, width)), k))


def translated_place_dataset(n_places: int = 20, width: int = 160, height: int = 120,
                             seed: int = 7) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """References plus queries that are 10-20% horizontal shifts of them.

    All images share the same (equalized) intensity histogram: a global
    descriptor aliases places while local landmarks still separate them.
    Returns (queries, references); query i depicts reference i's place.
    """
    rng = np.random.default_rng(seed)
    refs, queries = [], []
    for _ in range(n_places):
        shift = int(rng.integers(int(0.10 * width), int(0.20 * width) + 1))
        canvas = textured_image(rng, height, width + shift)
        refs.append(canvas[:, :width].copy())
        queries.append(canvas[:, shift:shift + width].copy())
    return queries, refs
