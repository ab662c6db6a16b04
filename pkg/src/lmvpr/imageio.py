"""Image loading for the batch pipeline: common raster formats via Pillow,
plus .npy arrays for synthetic data."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError
from .geometry import ImageDims


def _load_npy(path: Path, mmap: bool = False) -> np.ndarray:
    try:
        return np.load(path, mmap_mode="r" if mmap else None)
    except (ValueError, OSError, EOFError) as exc:
        raise DataError(f"unreadable array file {path}: {exc}") from exc


def load_image(path) -> np.ndarray:
    """Grayscale float64 grid in [0, 1], shape (H, W)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"image not found: {path}")
    if path.suffix == ".npy":
        raw = _load_npy(path)
        arr = np.asarray(raw)
        if arr.ndim == 3:
            arr = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
        if arr.ndim != 2:
            raise DataError(f"{path}: expected a 2-D or 3-D array, got ndim={arr.ndim}")
        arr = arr.astype(np.float64, copy=False)
        if np.issubdtype(raw.dtype, np.integer):
            arr = arr / 255.0
        return arr
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            gray = im.convert("L")
            return np.asarray(gray, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"unreadable image {path}: {exc}") from exc


def image_dims(path) -> ImageDims:
    """Width/height without decoding pixel data where the format allows."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"image not found: {path}")
    if path.suffix == ".npy":
        arr = _load_npy(path, mmap=True)
        if arr.ndim not in (2, 3):
            raise DataError(f"{path}: expected a 2-D or 3-D array, got ndim={arr.ndim}")
        return ImageDims(int(arr.shape[1]), int(arr.shape[0]))
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            return ImageDims(im.width, im.height)
    except (UnidentifiedImageError, OSError) as exc:
        raise DataError(f"unreadable image {path}: {exc}") from exc
