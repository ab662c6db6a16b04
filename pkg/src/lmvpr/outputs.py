"""Writers and readers for the evaluation artifacts.

Every text artifact starts with a single `#` metadata line naming the
config hash and seed, so a run can always be traced back to its inputs.
Floats are written with repr (shortest round-trip form): identical runs
produce identical bytes.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ParseError
from .evaluation import MatchRecord, PRCurve, SimilarityMatrix, StudyRecord


def metadata_header(kind: str, config_hash: str, seed: int, extra: str = "") -> str:
    line = f"# lmvpr {kind} config={config_hash} seed={seed}"
    if extra:
        line += f" {extra}"
    return line


def _fmt(v: float) -> str:
    return repr(float(v))


def _cell(v: float | None) -> str:
    return "" if v is None else _fmt(v)


def write_matrix_csv(path, matrix: SimilarityMatrix, header: str) -> None:
    lines = [header]
    for row in matrix.values:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(v) for v in line.split(",")])
    return np.array(rows, dtype=np.float64)


def write_pr_csv(path, curve: PRCurve, header: str) -> None:
    lines = [header, "threshold,precision,recall"]
    for t, p, r in curve.points():
        lines.append(f"{_fmt(t)},{_fmt(p)},{_fmt(r)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_study_csvs(out_dir, record: StudyRecord, header: str) -> list[Path]:
    """One CSV per study metric, one row per scale bin, one column per
    channel. Empty bins are empty cells, not zeros."""
    out_dir = Path(out_dir)
    written = []
    cls_gt, cls_irr = record.cls()
    asl_gt, asl_irr = record.asl()
    specs = [
        ("cls.csv", "scale,ground_truth,irrelevant",
         [(k + 1, cls_gt[k], cls_irr[k]) for k in range(len(cls_gt))]),
        ("asl.csv", "scale,ground_truth,irrelevant",
         [(k + 1, asl_gt[k], asl_irr[k]) for k in range(len(asl_gt))]),
    ]
    if record.has_labels:
        cmr = record.cmr()
        specs.append(("cmr.csv", "scale,ground_truth",
                      [(k + 1, cmr[k]) for k in range(len(cmr))]))
    for name, cols, rows in specs:
        lines = [header, cols]
        for row in rows:
            lines.append(",".join([str(row[0])] + [_cell(v) for v in row[1:]]))
        target = out_dir / name
        target.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(target)
    return written


def write_heatmap_pgm(path, grid: np.ndarray, comment: str) -> None:
    """Plain-text PGM (P2); the metadata line rides along as a PGM comment."""
    grid = np.asarray(grid)
    maxval = max(int(grid.max(initial=0)), 1)
    lines = ["P2", comment, f"{grid.shape[1]} {grid.shape[0]}", str(maxval)]
    for row in grid:
        lines.append(" ".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_heatmap_csv(path, grid: np.ndarray, header: str) -> None:
    lines = [header]
    for row in np.asarray(grid):
        lines.append(",".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_MATCH_COLUMNS = ["query_id", "ref_id", "query_idx", "ref_idx", "d", "s", "score",
                  "query_scale", "ref_scale"]


def write_match_records_csv(path, records, header: str) -> None:
    lines = [header, ",".join(_MATCH_COLUMNS)]
    for r in records:
        lines.append(",".join([
            r.query_id, r.ref_id, str(r.query_idx), str(r.ref_idx),
            _fmt(r.d), _fmt(r.s), _fmt(r.score), str(r.query_scale), str(r.ref_scale),
        ]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_match_records_csv(path) -> list[MatchRecord]:
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if row == _MATCH_COLUMNS:
                continue
            if len(row) != len(_MATCH_COLUMNS):
                raise ParseError(
                    f"expected {len(_MATCH_COLUMNS)} columns, got {len(row)}",
                    path=path, line=lineno,
                )
            try:
                records.append(MatchRecord(
                    query_id=row[0], ref_id=row[1],
                    query_idx=int(row[2]), ref_idx=int(row[3]),
                    d=float(row[4]), s=float(row[5]), score=float(row[6]),
                    query_scale=int(row[7]), ref_scale=int(row[8]),
                ))
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from exc
    return records


def read_labels_csv(path) -> dict[tuple[str, str, int, int], bool]:
    """Manual true/false match annotations:
    query_id,ref_id,query_landmark_idx,ref_landmark_idx,label"""
    path = Path(path)
    labels = {}
    truthy = {"1", "true", "t", "yes"}
    falsy = {"0", "false", "f", "no"}
    with path.open("r", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"expected 5 columns, got {len(row)}", path=path, line=lineno)
            if row[4].strip().lower() in truthy:
                value = True
            elif row[4].strip().lower() in falsy:
                value = False
            else:
                raise ParseError(f"unrecognized label {row[4]!r}", path=path, line=lineno)
            try:
                key = (row[0], row[1], int(row[2]), int(row[3]))
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from exc
            labels[key] = value
    return labels
