"""Numpy and numba kernel backends must agree to round-off."""
import os
import subprocess
import sys

import numpy as np
import pytest

from lmvpr.kernels import numpy_backend as np_k

numba_k = pytest.importorskip("lmvpr.kernels.numba_backend")


def random_boxes(rng, n, span=500):
    w = rng.integers(5, 200, size=n)
    h = rng.integers(5, 200, size=n)
    x = rng.integers(0, span, size=n)
    y = rng.integers(0, span, size=n)
    return np.stack([x, y, w, h], axis=1).astype(np.float64)


class TestParity:
    def test_iou_matrix(self):
        rng = np.random.default_rng(0)
        a = random_boxes(rng, 40)
        b = random_boxes(rng, 25)
        assert np.allclose(np_k.iou_matrix(a, b), numba_k.iou_matrix(a, b), atol=1e-12)

    def test_pairwise_cosine(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((30, 64))
        b = rng.standard_normal((20, 64))
        a[3] = 0.0  # zero-norm row must give distance 1 in both backends
        d_np = np_k.pairwise_cosine(a, b)
        d_nb = numba_k.pairwise_cosine(a, b)
        assert np.allclose(d_np, d_nb, atol=1e-10)
        assert np.all(d_np[3] == 1.0)
        assert np.all(d_nb[3] == 1.0)

    def test_greedy_overlap_select(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            boxes = random_boxes(rng, 120, span=300)
            t = float(rng.uniform(0.2, 0.9))
            got_np = np_k.greedy_overlap_select(boxes, t, 40)
            got_nb = numba_k.greedy_overlap_select(boxes, t, 40)
            assert got_np.tolist() == got_nb.tolist()

    def test_soft_nms_rescore(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            boxes = random_boxes(rng, 15, span=150)
            overlaps = np_k.iou_matrix(boxes, boxes)
            scores = rng.uniform(0.0, 1.0, size=15)
            out_np = np_k.soft_nms_rescore(scores, overlaps, 0.3, 0.5)
            out_nb = numba_k.soft_nms_rescore(scores, overlaps, 0.3, 0.5)
            assert np.allclose(out_np, out_nb, atol=1e-12)

    def test_resize_area(self):
        rng = np.random.default_rng(4)
        for shape in ((32, 32), (17, 53), (100, 70), (5, 5), (64, 48)):
            patch = rng.random(shape)
            assert np.allclose(np_k.resize_area(patch), numba_k.resize_area(patch),
                               atol=1e-12)

    def test_resize_area_preserves_mean(self):
        rng = np.random.default_rng(5)
        patch = rng.random((48, 80))
        for impl in (np_k, numba_k):
            resized = impl.resize_area(patch)
            assert resized.mean() == pytest.approx(patch.mean(), abs=1e-9)

    def test_patch_descriptors(self):
        rng = np.random.default_rng(6)
        image = rng.random((120, 160))
        boxes = np.array([[0, 0, 160, 120], [10, 20, 64, 48], [100, 60, 33, 41]],
                         dtype=np.int64)
        d_np = np_k.patch_descriptors(image, boxes)
        d_nb = numba_k.patch_descriptors(image, boxes)
        assert d_np.shape == d_nb.shape == (3, 144)
        assert np.allclose(d_np, d_nb, atol=1e-9)


class TestEnvFlag:
    @pytest.mark.parametrize("flag,expected", [("numpy", "numpy"), ("numba", "numba")])
    def test_backend_selected_by_env(self, flag, expected):
        code = "from lmvpr import kernels; print(kernels.backend_name())"
        env = dict(os.environ, LMVPR_BACKEND=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == expected

    def test_bad_flag_rejected(self):
        code = "import lmvpr.kernels"
        env = dict(os.environ, LMVPR_BACKEND="cuda")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        assert out.returncode != 0
        assert "LMVPR_BACKEND" in out.stderr

    def test_warmup_runs(self):
        from lmvpr import kernels

        kernels.warmup()
