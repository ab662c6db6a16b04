"""Pretrained-network feature extraction for landmark crops."""
from __future__ import annotations

import logging

import numpy as np
import torch
import torchvision
from torchvision.models.feature_extraction import create_feature_extractor

log = logging.getLogger("lmexport")

# conv-layer aliases map to the matching post-ReLU node (the layer's
# activation blob, caffe-style).
LAYER_ALIASES = {
    "alexnet": {
        "conv1": "features.1",
        "conv2": "features.4",
        "conv3": "features.7",
        "conv4": "features.9",
        "conv5": "features.11",
    },
}

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
INPUT_SIDE = 224
RANDOM_INIT_SEED = 0


class FeatureExtractor:
    """Flattened activations of one intermediate layer, batched over crops.

    Weights: `pretrained=True` loads the torchvision IMAGENET1K weights
    (needs network or a local cache); the default is a deterministic random
    initialization (fixed seed), which keeps output dimensions and the file
    contract intact for offline runs.
    """

    def __init__(self, model: str = "alexnet", layer: str = "conv3",
                 pretrained: bool = False, device: str = "cpu"):
        self.model_name = model
        self.layer = LAYER_ALIASES.get(model, {}).get(layer, layer)
        self.layer_alias = layer
        self.pretrained = pretrained
        self.device = torch.device(device)

        factory = getattr(torchvision.models, model, None)
        if factory is None:
            raise ValueError(f"unknown torchvision model {model!r}")
        if pretrained:
            net = factory(weights="IMAGENET1K_V1")
        else:
            log.warning("using deterministic random-initialized %s weights (seed %d); "
                        "pass --pretrained for ImageNet weights", model, RANDOM_INIT_SEED)
            torch.manual_seed(RANDOM_INIT_SEED)
            net = factory(weights=None)
        net.eval()
        try:
            self._extractor = create_feature_extractor(net, return_nodes={self.layer: "out"})
        except ValueError as exc:
            raise ValueError(f"model {model!r} has no node {self.layer!r}: {exc}") from exc
        self._extractor.to(self.device)
        self.dim = self._probe_dim()

    def _probe_dim(self) -> int:
        with torch.no_grad():
            out = self._extractor(torch.zeros(1, 3, INPUT_SIDE, INPUT_SIDE, device=self.device))
        return int(out["out"][0].numel())

    def preprocess(self, crop: np.ndarray) -> torch.Tensor:
        """HWC uint8 RGB crop -> normalized CHW tensor at the network input size."""
        t = torch.from_numpy(np.ascontiguousarray(crop)).permute(2, 0, 1).float() / 255.0
        t = torch.nn.functional.interpolate(
            t.unsqueeze(0), size=(INPUT_SIDE, INPUT_SIDE), mode="bilinear",
            align_corners=False, antialias=True,
        ).squeeze(0)
        mean = torch.tensor(IMAGENET_MEAN).view(3, 1, 1)
        std = torch.tensor(IMAGENET_STD).view(3, 1, 1)
        return (t - mean) / std

    def features(self, crops: list[np.ndarray], batch_size: int = 16) -> np.ndarray:
        """Flattened float32 feature rows, one per crop, in input order."""
        rows = np.empty((len(crops), self.dim), dtype=np.float32)
        for start in range(0, len(crops), batch_size):
            batch = torch.stack([self.preprocess(c) for c in crops[start:start + batch_size]])
            with torch.no_grad():
                out = self._extractor(batch.to(self.device))["out"]
            rows[start:start + batch.shape[0]] = (
                out.reshape(out.shape[0], -1).cpu().numpy().astype(np.float32)
            )
        return rows

    def metadata(self) -> dict:
        return {
            "model": self.model_name,
            "layer": self.layer_alias,
            "node": self.layer,
            "dim": self.dim,
            "pretrained": self.pretrained,
            "input_side": INPUT_SIDE,
            "normalization_mean": list(IMAGENET_MEAN),
            "normalization_std": list(IMAGENET_STD),
            "random_init_seed": None if self.pretrained else RANDOM_INIT_SEED,
            "torch": torch.__version__,
            "torchvision": torchvision.__version__,
        }
