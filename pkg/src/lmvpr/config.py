"""Run configuration: strict JSON parsing (unknown keys rejected) and a
stable config hash recorded in every output artifact."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .descriptors import ProjectionConfig
from .errors import ConfigError, ParseError
from .geometry import DEFAULT_SCALE_SPEC, ScaleSpec
from .matching import MatchConfig, SoftNmsConfig
from .proposals import SelectionConfig


@dataclass(frozen=True)
class LandmarkSource:
    kind: str  # "dense" | "proposals"
    spec: ScaleSpec = DEFAULT_SCALE_SPEC
    dir: Path | None = None
    scheme: str = "scheme1"
    selection: SelectionConfig = SelectionConfig()


@dataclass(frozen=True)
class DescriptorSource:
    kind: str  # "builtin" | "files"
    dir: Path | None = None


@dataclass(frozen=True)
class EvaluationConfig:
    thresholds: int = 101
    labels: Path | None = None

    def __post_init__(self):
        if self.thresholds < 2:
            raise ConfigError(f"threshold grid needs at least 2 points, got {self.thresholds}")


@dataclass(frozen=True)
class RunConfig:
    landmarks: LandmarkSource = LandmarkSource(kind="dense")
    descriptors: DescriptorSource = DescriptorSource(kind="builtin")
    projection: ProjectionConfig | None = None
    match: MatchConfig = MatchConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    seed: int = 0
    threads: int = 0  # 0: use available parallelism

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.threads < 0:
            raise ConfigError(f"threads must be non-negative, got {self.threads}")

    def effective_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def to_dict(self) -> dict:
        """Canonical dict form; the basis for the config hash."""
        lm: dict = {}
        if self.landmarks.kind == "dense":
            lm["dense"] = {"levels": [[r, c] for r, c in self.landmarks.spec.levels]}
        else:
            sel = self.landmarks.selection
            lm["proposals"] = {
                "dir": str(self.landmarks.dir),
                "scheme": self.landmarks.scheme,
                "limit": sel.limit,
                "min_scale_index": sel.min_scale_index,
                "scale_priority": list(sel.scale_priority),
                "iou_threshold": sel.iou_threshold,
            }
        desc: dict = {"builtin": {}} if self.descriptors.kind == "builtin" else {
            "files": {"dir": str(self.descriptors.dir)}
        }
        out = {
            "landmarks": lm,
            "descriptors": desc,
            "match": {
                "shape_exponent_sign": self.match.shape_exponent_sign,
                "soft_nms": None if self.match.soft_nms is None else {
                    "iou_threshold": self.match.soft_nms.iou_threshold,
                    "sigma": self.match.soft_nms.sigma,
                    "side": self.match.soft_nms.side,
                },
            },
            "evaluation": {
                "thresholds": self.evaluation.thresholds,
                "labels": None if self.evaluation.labels is None else str(self.evaluation.labels),
            },
            "seed": self.seed,
            "threads": self.threads,
        }
        if self.projection is not None:
            out["projection"] = {"target_dim": self.projection.target_dim,
                                 "seed": self.projection.seed}
        return out

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def _require_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _landmarks_from_dict(d: dict, base: Path) -> LandmarkSource:
    _require_keys(d, {"dense", "proposals"}, "landmarks")
    if len(d) != 1:
        raise ConfigError("config needs exactly one landmark source ('dense' or 'proposals')")
    if "dense" in d:
        inner = d["dense"]
        _require_keys(inner, {"levels"}, "landmarks.dense")
        levels = inner.get("levels")
        if levels is None:
            spec = DEFAULT_SCALE_SPEC
        else:
            try:
                spec = ScaleSpec(tuple((float(r), int(c)) for r, c in levels))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"landmarks.dense.levels must be [scale, count] pairs: {exc}")
        return LandmarkSource(kind="dense", spec=spec)
    inner = d["proposals"]
    _require_keys(inner, {"dir", "scheme", "limit", "min_scale_index",
                          "scale_priority", "iou_threshold"}, "landmarks.proposals")
    if "dir" not in inner:
        raise ConfigError("landmarks.proposals needs a 'dir'")
    scheme = inner.get("scheme", "scheme1")
    if scheme not in ("scheme1", "scheme2", "overlap"):
        raise ConfigError(f"unknown selection scheme {scheme!r}")
    defaults = SelectionConfig()
    selection = SelectionConfig(
        limit=int(inner.get("limit", defaults.limit)),
        min_scale_index=int(inner.get("min_scale_index", defaults.min_scale_index)),
        scale_priority=tuple(inner.get("scale_priority", defaults.scale_priority)),
        iou_threshold=float(inner.get("iou_threshold", defaults.iou_threshold)),
    )
    return LandmarkSource(kind="proposals", dir=base / inner["dir"], scheme=scheme,
                          selection=selection)


def _descriptors_from_dict(d: dict, base: Path) -> DescriptorSource:
    _require_keys(d, {"builtin", "files"}, "descriptors")
    if len(d) != 1:
        raise ConfigError("config needs exactly one descriptor source ('builtin' or 'files')")
    if "builtin" in d:
        _require_keys(d["builtin"], set(), "descriptors.builtin")
        return DescriptorSource(kind="builtin")
    inner = d["files"]
    _require_keys(inner, {"dir"}, "descriptors.files")
    if "dir" not in inner:
        raise ConfigError("descriptors.files needs a 'dir'")
    return DescriptorSource(kind="files", dir=base / inner["dir"])


def config_from_dict(raw: dict, base: Path = Path(".")) -> RunConfig:
    _require_keys(raw, {"landmarks", "descriptors", "projection", "match",
                        "evaluation", "seed", "threads"}, "config")
    seed = int(raw.get("seed", 0))

    projection = None
    if "projection" in raw and raw["projection"] is not None:
        p = raw["projection"]
        _require_keys(p, {"target_dim", "seed"}, "projection")
        projection = ProjectionConfig(target_dim=int(p.get("target_dim", 1024)),
                                      seed=int(p.get("seed", seed)))

    match = MatchConfig()
    if "match" in raw and raw["match"] is not None:
        mc = raw["match"]
        _require_keys(mc, {"shape_exponent_sign", "soft_nms"}, "match")
        soft = None
        if mc.get("soft_nms") is not None:
            sn = mc["soft_nms"]
            _require_keys(sn, {"iou_threshold", "sigma", "side"}, "match.soft_nms")
            if "iou_threshold" not in sn:
                raise ConfigError("match.soft_nms needs an 'iou_threshold'")
            soft = SoftNmsConfig(
                iou_threshold=float(sn["iou_threshold"]),
                sigma=float(sn.get("sigma", 0.5)),
                side=sn.get("side", "query"),
            )
        match = MatchConfig(
            shape_exponent_sign=mc.get("shape_exponent_sign", "negative"),
            soft_nms=soft,
        )

    evaluation = EvaluationConfig()
    if "evaluation" in raw and raw["evaluation"] is not None:
        ev = raw["evaluation"]
        _require_keys(ev, {"thresholds", "labels"}, "evaluation")
        evaluation = EvaluationConfig(
            thresholds=int(ev.get("thresholds", 101)),
            labels=None if ev.get("labels") is None else base / ev["labels"],
        )

    return RunConfig(
        landmarks=_landmarks_from_dict(raw.get("landmarks", {"dense": {}}), base),
        descriptors=_descriptors_from_dict(raw.get("descriptors", {"builtin": {}}), base),
        projection=projection,
        match=match,
        evaluation=evaluation,
        seed=seed,
        threads=int(raw.get("threads", 0)),
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=path)
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(raw, base=path.parent)
