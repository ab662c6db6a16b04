"""Batch export: image + box CSV directories -> descriptor block files."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .formats import BLOCK_SUFFIX, BOX_SUFFIX, read_boxes, write_block
from .model import FeatureExtractor

log = logging.getLogger("lmexport")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".ppm", ".tif", ".tiff", ".npy")


@dataclass
class ExportConfig:
    images_dir: Path
    boxes_dir: Path
    out_dir: Path
    model: str = "alexnet"
    layer: str = "conv3"
    pretrained: bool = False
    batch_size: int = 16
    device: str = "cpu"


@dataclass
class ExportResult:
    exported: list[str] = field(default_factory=list)
    errors: list[tuple[str, str]] = field(default_factory=list)


def _find_image(images_dir: Path, image_id: str) -> Path:
    for suffix in IMAGE_SUFFIXES:
        candidate = images_dir / f"{image_id}{suffix}"
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no image for id {image_id!r} under {images_dir}")


def _load_rgb(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        arr = np.load(path)
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        if np.issubdtype(arr.dtype, np.floating):
            arr = np.clip(arr, 0.0, 1.0) * 255.0
        return arr.astype(np.uint8)
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def export_image(image_path: Path, boxes_path: Path, out_path: Path,
                 extractor: FeatureExtractor, batch_size: int = 16) -> int:
    """One image: crop every CSV box in file order, run the network, write
    the block. Returns the landmark count."""
    image = _load_rgb(Path(image_path))
    height, width = image.shape[:2]
    boxes = read_boxes(boxes_path)
    crops = []
    for i, (x, y, w, h) in enumerate(boxes):
        if x + w > width or y + h > height:
            raise ValueError(
                f"{boxes_path}: box {i} ({x},{y},{w},{h}) outside the {width}x{height} image"
            )
        crops.append(image[y:y + h, x:x + w])
    if crops:
        vectors = extractor.features(crops, batch_size=batch_size)
    else:
        vectors = np.empty((0, extractor.dim), dtype=np.float32)
    write_block(out_path, boxes, vectors, width, height)
    return len(boxes)


def run_export(cfg: ExportConfig) -> ExportResult:
    """Export every `<id>.boxes.csv` under cfg.boxes_dir."""
    result = ExportResult()
    box_files = sorted(Path(cfg.boxes_dir).glob(f"*{BOX_SUFFIX}"))
    if not box_files:
        result.errors.append(("", f"no {BOX_SUFFIX} files under {cfg.boxes_dir}"))
        return result
    extractor = FeatureExtractor(model=cfg.model, layer=cfg.layer,
                                 pretrained=cfg.pretrained, device=cfg.device)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for boxes_path in box_files:
        image_id = boxes_path.name.removesuffix(BOX_SUFFIX)
        try:
            image_path = _find_image(Path(cfg.images_dir), image_id)
            count = export_image(image_path, boxes_path, out_dir / f"{image_id}{BLOCK_SUFFIX}",
                                 extractor, batch_size=cfg.batch_size)
            log.info("%s: %d landmarks, dim %d", image_id, count, extractor.dim)
            result.exported.append(image_id)
        except Exception as exc:  # per-image isolation; the run continues
            result.errors.append((image_id, str(exc)))
    meta = extractor.metadata()
    meta["exported"] = result.exported
    meta["errors"] = [{"image_id": i, "error": e} for i, e in result.errors]
    (out_dir / "export_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                              encoding="utf-8")
    return result
