import json

import numpy as np
import pytest

from lmvpr.errors import ConfigError, DataError, ParseError
from lmvpr.evaluation import (
    DatasetManifest,
    MatchRecord,
    SimilarityMatrix,
    StudyRecord,
    coverage_heatmap,
    default_thresholds,
    pr_curve,
    study_stats,
)
from lmvpr.geometry import BoundingBox, ImageDims, Landmark, LandmarkSet, dense_sample


def manifest_for(n_q, n_r, gt=None, tol=1):
    return DatasetManifest(
        queries=tuple((f"q{i}", f"q{i}.npy") for i in range(n_q)),
        references=tuple((f"r{i}", f"r{i}.npy") for i in range(n_r)),
        ground_truth=gt if gt is not None else {i: i for i in range(min(n_q, n_r))},
        frame_tolerance=tol,
    )


def brute_force_pr(values, gt, tol, thresholds):
    """Independent per-threshold evaluator, plain python."""
    points = []
    n_gt = len(gt)
    for theta in thresholds:
        tp = fp = 0
        for q in range(values.shape[0]):
            row = list(values[q])
            best = max(range(len(row)), key=lambda j: (row[j], -j))
            s1 = row[best]
            rest = row[:best] + row[best + 1:]
            s2 = max(rest)
            rho = 1.0 if s1 <= 0 else min(max(s2 / s1, 0.0), 1.0)
            if rho <= theta:
                if q in gt and abs(best - gt[q]) <= tol:
                    tp += 1
                else:
                    fp += 1
        precision = 1.0 if tp + fp == 0 else tp / (tp + fp)
        recall = tp / n_gt if n_gt else 0.0
        points.append((precision, recall))
    return points


class TestManifest:
    def test_from_json(self, tmp_path):
        doc = {
            "queries": [{"id": "a", "path": "imgs/a.npy"}, ["b", "imgs/b.npy"]],
            "references": [{"id": "x", "path": "imgs/x.npy"}, {"id": "y", "path": "imgs/y.npy"}],
            "ground_truth": {"0": 1, "1": 0},
            "frame_tolerance": 2,
        }
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(doc))
        m = DatasetManifest.from_json(path)
        assert m.queries[0] == ("a", tmp_path / "imgs/a.npy")
        assert m.queries[1][0] == "b"
        assert m.ground_truth == {0: 1, 1: 0}
        assert m.frame_tolerance == 2

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"queries": [], "references": [], "typo": 1}))
        with pytest.raises(ParseError):
            DatasetManifest.from_json(path)

    def test_gt_out_of_range(self):
        with pytest.raises(DataError):
            manifest_for(2, 2, gt={5: 0})
        with pytest.raises(DataError):
            manifest_for(2, 2, gt={0: 5})

    def test_negative_tolerance(self):
        with pytest.raises(ConfigError):
            manifest_for(2, 2, tol=-1)

    def test_gt_pairs_with_tolerance(self):
        m = manifest_for(1, 4, gt={0: 1}, tol=1)
        assert m.gt_pairs() == {("q0", "r0"), ("q0", "r1"), ("q0", "r2")}
        m0 = manifest_for(1, 4, gt={0: 0}, tol=0)
        assert m0.gt_pairs() == {("q0", "r0")}


class TestSimilarityMatrix:
    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            SimilarityMatrix(np.array([[np.inf, 0.0]]))

    def test_shape(self):
        m = SimilarityMatrix(np.zeros((3, 4)))
        assert m.shape == (3, 4)


class TestPRCurve:
    def test_hand_case_accept_thresholds(self):
        # best ref is the ground truth, s1 = 0.9, s2 = 0.3 -> accepted for theta >= 1/3
        vals = np.array([[0.9, 0.3]])
        m = manifest_for(1, 2, gt={0: 0}, tol=0)
        curve = pr_curve(SimilarityMatrix(vals), m, np.array([0.0, 0.3, 1 / 3, 0.5, 1.0]))
        assert curve.recall.tolist() == [0.0, 0.0, 1.0, 1.0, 1.0]
        assert curve.precision[2] == 1.0

    def test_theta_zero_accepts_nothing(self):
        rng = np.random.default_rng(0)
        vals = np.abs(rng.random((5, 4))) + 0.01
        m = manifest_for(5, 4, gt={i: i % 4 for i in range(5)})
        curve = pr_curve(SimilarityMatrix(vals), m, default_thresholds())
        assert curve.recall[0] == 0.0
        assert curve.undefined_precision[0]
        assert curve.precision[0] == 1.0

    def test_theta_one_accepts_everything(self):
        rng = np.random.default_rng(1)
        vals = rng.random((6, 5))
        gt = {i: i % 5 for i in range(6)}
        m = manifest_for(6, 5, gt=gt)
        curve = pr_curve(SimilarityMatrix(vals), m, default_thresholds())
        # at theta = 1 every query is accepted
        assert curve.recall[-1] == pytest.approx(
            sum(1 for q in range(6)
                if abs(int(np.argmax(vals[q])) - gt[q]) <= 1) / len(gt))

    def test_recall_monotone(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            vals = rng.standard_normal((8, 6))
            m = manifest_for(8, 6, gt={i: i % 6 for i in range(8)})
            curve = pr_curve(SimilarityMatrix(vals), m, default_thresholds())
            assert np.all(np.diff(curve.recall) >= -1e-15)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(3)
        thresholds = default_thresholds(41)
        for _ in range(25):
            n_q = int(rng.integers(2, 12))
            n_r = int(rng.integers(2, 12))
            vals = rng.standard_normal((n_q, n_r))
            n_gt = int(rng.integers(1, n_q + 1))
            gt = {int(q): int(rng.integers(0, n_r))
                  for q in rng.choice(n_q, size=n_gt, replace=False)}
            tol = int(rng.integers(0, 3))
            m = manifest_for(n_q, n_r, gt=gt, tol=tol)
            curve = pr_curve(SimilarityMatrix(vals), m, thresholds)
            expected = brute_force_pr(vals, gt, tol, thresholds)
            for k, (p, r) in enumerate(expected):
                assert curve.precision[k] == pytest.approx(p, abs=1e-12)
                assert curve.recall[k] == pytest.approx(r, abs=1e-12)

    def test_single_column_rejected(self):
        m = manifest_for(2, 1, gt={0: 0})
        with pytest.raises(DataError):
            pr_curve(SimilarityMatrix(np.ones((2, 1))), m)

    def test_non_positive_best_never_accepted_below_one(self):
        vals = np.array([[-0.5, -0.9]])
        m = manifest_for(1, 2, gt={0: 0}, tol=0)
        curve = pr_curve(SimilarityMatrix(vals), m, np.array([0.0, 0.5, 0.99, 1.0]))
        assert curve.recall.tolist() == [0.0, 0.0, 0.0, 1.0]

    def test_invalid_rows_count_against_recall(self):
        vals = np.array([[0.9, 0.1], [0.0, 0.0]])
        m = manifest_for(2, 2, gt={0: 0, 1: 1}, tol=0)
        matrix = SimilarityMatrix(vals, invalid_rows=(1,))
        curve = pr_curve(matrix, m, np.array([0.0, 0.5, 1.0]))
        assert curve.recall[-1] == 0.5  # query 1 can never be accepted

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        vals = rng.random((5, 5))
        m = manifest_for(5, 5)
        a = pr_curve(SimilarityMatrix(vals), m)
        b = pr_curve(SimilarityMatrix(vals), m)
        assert np.array_equal(a.precision, b.precision)
        assert np.array_equal(a.recall, b.recall)


def record(qid, rid, qi, ri, score, q_scale, r_scale=5, d=0.1, s=1.0):
    return MatchRecord(query_id=qid, ref_id=rid, query_idx=qi, ref_idx=ri,
                       d=d, s=s, score=score, query_scale=q_scale, ref_scale=r_scale)


class TestStudyStats:
    def test_single_bin_all_true(self):
        records = [record("q0", "r0", i, i, 0.5, q_scale=5) for i in range(4)]
        labels = {("q0", "r0", i, i): True for i in range(4)}
        rec = study_stats(records, {("q0", "r0")}, labels)
        cmr = rec.cmr()
        assert cmr[4] == 1.0
        assert all(v is None for k, v in enumerate(cmr) if k != 4)

    def test_cls_ratio(self):
        records = [record("q0", "r0", 0, 0, 3.0, q_scale=2),
                   record("q0", "r0", 1, 1, 1.0, q_scale=6)]
        rec = study_stats(records, {("q0", "r0")})
        cls_gt, cls_irr = rec.cls()
        assert cls_gt[1] == pytest.approx(0.75)
        assert cls_gt[5] == pytest.approx(0.25)
        assert all(v is None for v in cls_irr)

    def test_cls_sums_to_one_per_channel(self):
        rng = np.random.default_rng(5)
        records = []
        for k in range(40):
            pair_is_gt = bool(rng.integers(0, 2))
            records.append(record("q0", "r0" if pair_is_gt else "r1", k, k,
                                  float(rng.uniform(0.1, 1.0)),
                                  q_scale=int(rng.integers(1, 10))))
        rec = study_stats(records, {("q0", "r0")})
        for col in rec.cls():
            total = sum(v for v in col if v is not None)
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_spreadsheet_oracle_20_matches(self):
        rng = np.random.default_rng(6)
        scales = [1, 3, 5, 7]
        records = []
        for k in range(20):
            qsc = scales[k % 4]
            gt_side = k % 2 == 0
            records.append(record("q0", "r0" if gt_side else "r9", k, k,
                                  round(float(rng.uniform(0.2, 1.0)), 3), q_scale=qsc))
        gt_pairs = {("q0", "r0")}
        rec = study_stats(records, gt_pairs)
        # independent aggregation with plain dicts
        sums = {}
        counts = {}
        for r in records:
            ch = 0 if (r.query_id, r.ref_id) in gt_pairs else 1
            key = (ch, r.query_scale)
            sums[key] = sums.get(key, 0.0) + r.score
            counts[key] = counts.get(key, 0) + 1
        asl_gt, asl_irr = rec.asl()
        cls_gt, cls_irr = rec.cls()
        for ch, asl_col, cls_col in ((0, asl_gt, cls_gt), (1, asl_irr, cls_irr)):
            total = sum(v for (c, _), v in sums.items() if c == ch)
            for scale in range(1, 10):
                if (ch, scale) in counts:
                    assert asl_col[scale - 1] == pytest.approx(
                        sums[(ch, scale)] / counts[(ch, scale)])
                    assert cls_col[scale - 1] == pytest.approx(sums[(ch, scale)] / total)
                else:
                    assert asl_col[scale - 1] is None
                    assert cls_col[scale - 1] is None

    def test_cmr_without_labels_errors(self):
        rec = study_stats([record("q0", "r0", 0, 0, 0.5, 5)], {("q0", "r0")})
        with pytest.raises(DataError):
            rec.cmr()

    def test_unlabeled_gt_match_errors(self):
        records = [record("q0", "r0", 0, 0, 0.5, 5), record("q0", "r0", 1, 1, 0.5, 5)]
        labels = {("q0", "r0", 0, 0): True}
        with pytest.raises(DataError):
            study_stats(records, {("q0", "r0")}, labels)

    def test_irrelevant_channel_needs_no_labels(self):
        records = [record("q0", "r5", 0, 0, 0.5, 5)]
        rec = study_stats(records, {("q0", "r0")}, labels={})
        assert rec.match_count[1, 4] == 1

    def test_cmr_mixed_labels(self):
        records = [record("q0", "r0", i, i, 0.5, 5) for i in range(4)]
        labels = {("q0", "r0", i, i): i < 3 for i in range(4)}
        rec = study_stats(records, {("q0", "r0")}, labels)
        assert rec.cmr()[4] == pytest.approx(0.75)

    def test_bad_scale_rejected(self):
        with pytest.raises(DataError):
            study_stats([record("q", "r", 0, 0, 1.0, q_scale=0)], set())


class TestCoverageHeatmap:
    def _lset(self, boxes, dims):
        from lmvpr.geometry import area_ratio, scale_index

        marks = tuple(Landmark(b, area_ratio(b, dims), scale_index(area_ratio(b, dims)))
                      for b in boxes)
        return LandmarkSet(image_id="h", dims=dims, landmarks=marks)

    def test_full_image_box_all_ones(self):
        dims = ImageDims(40, 30)
        grid = coverage_heatmap(self._lset([BoundingBox(0, 0, 40, 30)], dims))
        assert grid.shape == (30, 40)
        assert np.all(grid == 1)

    def test_empty_set_all_zero(self):
        grid = coverage_heatmap(LandmarkSet("e", ImageDims(20, 10), ()))
        assert np.all(grid == 0)

    def test_total_equals_sum_of_areas(self):
        rng = np.random.default_rng(7)
        dims = ImageDims(200, 150)
        boxes = []
        for _ in range(30):
            w = int(rng.integers(5, 100))
            h = int(rng.integers(5, 80))
            boxes.append(BoundingBox(int(rng.integers(0, 200 - w)), int(rng.integers(0, 150 - h)), w, h))
        grid = coverage_heatmap(self._lset(boxes, dims))
        assert int(grid.sum()) == sum(b.area for b in boxes)

    def test_default_dense_sample_covers_everything(self):
        dims = ImageDims(320, 240)
        lset = dense_sample(dims)
        grid = coverage_heatmap(lset)
        assert int(grid.min()) >= 1
        # independent oracle: per-pixel containment test on a subsampled grid
        boxes = [lm.box for lm in lset.landmarks]
        for py in range(0, 240, 7):
            for px in range(0, 320, 7):
                covered = sum(1 for b in boxes
                              if b.x <= px < b.x + b.w and b.y <= py < b.y + b.h)
                assert covered == grid[py, px]
