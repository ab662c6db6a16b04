"""Batch command-line frontend.

Subcommands mirror the pipeline stages and hand data off through files:
sample -> (external) select/describe -> match/evaluate/study, plus a bench
stage for the cost table. Exit codes: 0 success, 1 config/parse error,
2 data error, 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__, kernels
from .config import RunConfig, load_config
from .descriptors import BLOCK_SUFFIX, write_block
from .errors import ConfigError, DataError, GeometryError, LmvprError, ParseError
from .evaluation import DatasetManifest, default_thresholds, pr_curve, study_stats, coverage_heatmap
from .geometry import dense_sample
from .outputs import (
    metadata_header,
    read_labels_csv,
    read_match_records_csv,
    write_heatmap_csv,
    write_heatmap_pgm,
    write_match_records_csv,
    write_matrix_csv,
    write_pr_csv,
    write_study_csvs,
)
from .pipeline import (
    StageTimings,
    block_for_image,
    build_similarity_matrix,
    landmarks_for_image,
    timing_table,
)
from .proposals import BOX_SUFFIX, write_boxes_csv
from . import imageio

log = logging.getLogger("lmvpr")


def _manifest_images(manifest: DatasetManifest) -> list[tuple[str, Path]]:
    """Union of query and reference images, order preserved, ids unique."""
    seen: dict[str, Path] = {}
    out = []
    for image_id, path in list(manifest.queries) + list(manifest.references):
        if image_id in seen:
            if Path(seen[image_id]) != Path(path):
                raise DataError(f"image id {image_id!r} maps to two different paths")
            continue
        seen[image_id] = path
        out.append((image_id, Path(path)))
    return out


def _load_inputs(args) -> tuple[RunConfig, DatasetManifest, Path]:
    config = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        import dataclasses

        config = dataclasses.replace(config, seed=args.seed)
    if args.threads is not None:
        import dataclasses

        config = dataclasses.replace(config, threads=args.threads)
    manifest = DatasetManifest.from_json(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return config, manifest, out_dir


def _meta(config: RunConfig, kind: str, extra: str = "") -> str:
    return metadata_header(kind, config.hash(), config.seed, extra)


def _report_image_errors(errors: list[tuple[str, str]]) -> int:
    for image_id, message in errors:
        log.error("%s: %s", image_id, message)
        print(f"error: {image_id}: {message}", file=sys.stderr)
    return 2 if errors else 0


def cmd_sample(args) -> int:
    config, manifest, out_dir = _load_inputs(args)
    if config.landmarks.kind != "dense":
        raise ConfigError("'sample' needs a dense landmark source in the config")
    errors: list[tuple[str, str]] = []
    for image_id, path in _manifest_images(manifest):
        try:
            dims = imageio.image_dims(path)
            lset = dense_sample(dims, config.landmarks.spec, image_id=image_id)
            write_boxes_csv(
                out_dir / f"{image_id}{BOX_SUFFIX}",
                [lm.box for lm in lset.landmarks], dims, image_id,
                meta=f"config={config.hash()} seed={config.seed}",
            )
            if args.heatmaps:
                grid = coverage_heatmap(lset)
                comment = _meta(config, "coverage", f"image_id={image_id}")
                write_heatmap_pgm(out_dir / f"{image_id}.coverage.pgm", grid, comment)
                write_heatmap_csv(out_dir / f"{image_id}.coverage.csv", grid, comment)
            log.info("sampled %d boxes for %s", len(lset), image_id)
        except LmvprError as exc:
            errors.append((image_id, str(exc)))
    return _report_image_errors(errors)


def cmd_select(args) -> int:
    config, manifest, out_dir = _load_inputs(args)
    if config.landmarks.kind != "proposals":
        raise ConfigError("'select' needs a proposals landmark source in the config")
    errors: list[tuple[str, str]] = []
    for image_id, path in _manifest_images(manifest):
        try:
            lset = landmarks_for_image(image_id, path, config)
            if lset.underfull:
                log.warning("%s: selection underfull (%d < %d)", image_id, len(lset),
                            config.landmarks.selection.limit)
            write_boxes_csv(
                out_dir / f"{image_id}{BOX_SUFFIX}",
                [lm.box for lm in lset.landmarks], lset.dims, image_id,
                meta=f"config={config.hash()} seed={config.seed}",
            )
        except LmvprError as exc:
            errors.append((image_id, str(exc)))
    return _report_image_errors(errors)


def cmd_describe(args) -> int:
    config, manifest, out_dir = _load_inputs(args)
    errors: list[tuple[str, str]] = []
    for image_id, path in _manifest_images(manifest):
        try:
            block = block_for_image(image_id, path, config)
            write_block(block, out_dir / f"{image_id}{BLOCK_SUFFIX}")
            log.info("described %s: %d landmarks, dim %d", image_id, len(block), block.dim)
        except LmvprError as exc:
            errors.append((image_id, str(exc)))
    return _report_image_errors(errors)


def cmd_match(args) -> int:
    config, manifest, out_dir = _load_inputs(args)
    result = build_similarity_matrix(manifest, config, threads=config.effective_threads(),
                                     collect_matches=True)
    write_match_records_csv(out_dir / "matches.csv", result.match_records,
                            _meta(config, "matches"))
    write_matrix_csv(out_dir / "similarity_matrix.csv", result.matrix,
                     _meta(config, "similarity-matrix"))
    return _report_image_errors(result.errors)


def _write_timing_csv(path, timings: StageTimings, header: str) -> None:
    totals = timings.totals()
    means = timings.per_image()
    cols = ["extract_landmarks", "compute_features", "remaining_steps"]
    lines = [header, "row," + ",".join(cols)]
    lines.append("total_s," + ",".join(repr(totals[c]) for c in cols))
    lines.append("mean_s," + ",".join(repr(means[c]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_evaluate(args) -> int:
    config, manifest, out_dir = _load_inputs(args)
    t_start = time.perf_counter()
    result = build_similarity_matrix(manifest, config, threads=config.effective_threads(),
                                     collect_matches=True)
    rc = _report_image_errors(result.errors)
    write_matrix_csv(out_dir / "similarity_matrix.csv", result.matrix,
                     _meta(config, "similarity-matrix"))

    valid_cols = len(manifest.references) - len(result.matrix.invalid_cols)
    valid_rows = len(manifest.queries) - len(result.matrix.invalid_rows)
    if valid_cols >= 2 and valid_rows >= 1:
        curve = pr_curve(result.matrix, manifest,
                         default_thresholds(config.evaluation.thresholds))
        write_pr_csv(out_dir / "pr_curve.csv", curve, _meta(config, "pr-curve"))
        labels = None
        if config.evaluation.labels is not None:
            labels = read_labels_csv(config.evaluation.labels)
        record = study_stats(result.match_records, manifest.gt_pairs(), labels)
        write_study_csvs(out_dir, record, _meta(config, "study"))
    elif not result.errors:
        raise DataError("ratio test needs at least two valid reference columns")
    else:
        print("error: too few valid images, PR curve and study skipped", file=sys.stderr)
    _write_timing_csv(out_dir / "timing.csv", result.timings, _meta(config, "timing"))

    meta = {
        "tool": "lmvpr",
        "version": __version__,
        "backend": kernels.backend_name(),
        "config": config.to_dict(),
        "config_hash": config.hash(),
        "seed": config.seed,
        "queries": len(manifest.queries),
        "references": len(manifest.references),
        "wall_seconds": time.perf_counter() - t_start,
        "stage_totals_s": result.timings.totals(),
        "stage_means_s": result.timings.per_image(),
        "image_errors": [{"image_id": i, "error": e} for i, e in result.errors],
    }
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")
    return rc


def cmd_study(args) -> int:
    config, manifest, out_dir = _load_inputs(args)
    records = read_match_records_csv(args.matches)
    labels_path = args.labels or config.evaluation.labels
    metrics = {m.strip() for m in args.metrics.split(",") if m.strip()}
    unknown = metrics - {"cmr", "cls", "asl"}
    if unknown:
        raise ConfigError(f"unknown study metrics: {sorted(unknown)}")
    if "cmr" in metrics and labels_path is None:
        raise DataError("CMR requested but no labels file was given")
    labels = read_labels_csv(labels_path) if labels_path is not None else None
    record = study_stats(records, manifest.gt_pairs(), labels)
    write_study_csvs(out_dir, record, _meta(config, "study"))
    return 0


def cmd_bench(args) -> int:
    config, manifest, out_dir = _load_inputs(args)
    kernels.warmup()
    timings = StageTimings()
    errors: list[tuple[str, str]] = []
    for _ in range(args.repeat):
        result = build_similarity_matrix(manifest, config, threads=1)
        timings.merge(result.timings)
        errors.extend(result.errors)
    method = "dense sampling" if config.landmarks.kind == "dense" else \
        f"proposal {config.landmarks.scheme}"
    table = timing_table(timings, method)
    print(f"backend: {kernels.backend_name()}")
    print(table)
    _write_timing_csv(out_dir / "timing.csv", timings, _meta(config, "timing"))
    return _report_image_errors(errors)


def _add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="run config JSON")
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--threads", type=int, default=None, help="override the worker count")
    p.add_argument("--verbose", action="store_true", help="info-level logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmvpr", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lmvpr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="dense-sample landmark boxes, one CSV per image")
    _add_common(p)
    p.add_argument("--heatmaps", action="store_true", help="also write coverage heatmaps")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("select", help="apply a proposal selection scheme to ranked box files")
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("describe", help="compute descriptor blocks, one .lmdb1 per image")
    _add_common(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("match", help="dump reciprocal matches for every image pair")
    _add_common(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", help="similarity matrix, PR curve, study stats, timing")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("study", help="per-scale statistics from a match dump")
    _add_common(p, config_required=False)
    p.add_argument("--matches", required=True, help="matches.csv from the match stage")
    p.add_argument("--labels", default=None, help="manual true/false match labels CSV")
    p.add_argument("--metrics", default="cls,asl", help="comma list of cmr,cls,asl")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("bench", help="per-stage cost table for the configured pipeline")
    _add_common(p)
    p.add_argument("--repeat", type=int, default=1, help="pipeline repetitions to time")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LmvprError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
