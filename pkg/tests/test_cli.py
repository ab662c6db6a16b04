import json

import numpy as np
import pytest

from conftest import write_config
from lmvpr.cli import main
from lmvpr.config import config_from_dict, load_config
from lmvpr.descriptors import read_block
from lmvpr.errors import ConfigError
from lmvpr.geometry import ImageDims, dense_sample
from lmvpr.outputs import read_match_records_csv, read_matrix_csv

# Experiment grids from the scale-level study: all must be expressible
# purely through config.
LEVEL_COUNT_GRID = [
    [[0.25, 100]],
    [[0.49, 100]],
    [[0.25, 49], [0.49, 49]],
    [[0.16, 49], [0.36, 49]],
    [[0.16, 25], [0.25, 25], [0.36, 25], [0.49, 25]],
    [[0.09, 16], [0.18, 16], [0.25, 16], [0.33, 16], [0.41, 16], [0.49, 16]],
]
LEVEL_COUNT_TOTALS = [100, 100, 98, 98, 100, 96]
PER_SCALE_COUNT_GRID = [
    [[0.16, 25], [0.25, 25], [0.36, 25], [0.49, 25]],
    [[0.16, 36], [0.25, 25], [0.36, 25], [0.49, 16]],
    [[0.16, 36], [0.25, 36], [0.36, 16], [0.49, 16]],
    [[0.16, 49], [0.25, 25], [0.36, 16], [0.49, 9]],
    [[0.16, 49], [0.25, 36], [0.36, 9], [0.49, 9]],
]
SCALE_VALUE_GRID = [
    [[0.16, 25], [0.25, 25], [0.36, 25], [0.49, 25]],
    [[0.18, 25], [0.27, 25], [0.38, 25], [0.51, 25]],
    [[0.09, 25], [0.20, 25], [0.32, 25], [0.44, 25]],
    [[0.20, 25], [0.32, 25], [0.44, 25], [0.54, 25]],
]


def run(argv):
    return main([str(a) for a in argv])


class TestSample:
    def test_writes_one_csv_per_image(self, tiny_dataset, default_config):
        out = tiny_dataset / "boxes"
        rc = run(["sample", "--config", default_config,
                  "--manifest", tiny_dataset / "manifest.json", "--out", out])
        assert rc == 0
        files = sorted(out.glob("*.boxes.csv"))
        assert len(files) == 8
        for f in files:
            lines = f.read_text().strip().splitlines()
            assert lines[0].startswith("# lmvpr boxes")
            assert len(lines) == 101

    @pytest.mark.parametrize("levels,total", list(zip(LEVEL_COUNT_GRID, LEVEL_COUNT_TOTALS)))
    def test_level_preset_totals_from_config_alone(self, tiny_dataset, levels, total):
        cfg = write_config(tiny_dataset, {
            "landmarks": {"dense": {"levels": levels}},
            "descriptors": {"builtin": {}},
        }, name=f"lv_{total}.json")
        out = tiny_dataset / f"lv_{total}"
        rc = run(["sample", "--config", cfg,
                  "--manifest", tiny_dataset / "manifest.json", "--out", out])
        assert rc == 0
        lines = (out / "q0.boxes.csv").read_text().strip().splitlines()
        assert len(lines) - 1 == total

    def test_heatmaps_flag(self, tiny_dataset, default_config):
        out = tiny_dataset / "hm"
        rc = run(["sample", "--config", default_config, "--heatmaps",
                  "--manifest", tiny_dataset / "manifest.json", "--out", out])
        assert rc == 0
        pgm = (out / "q0.coverage.pgm").read_text().splitlines()
        assert pgm[0] == "P2"
        assert pgm[1].startswith("# lmvpr coverage")
        assert pgm[2] == "120 90"
        grid = read_matrix_csv(out / "q0.coverage.csv")
        assert grid.shape == (90, 120)
        assert grid.min() >= 1

    def test_sample_requires_dense_source(self, tiny_dataset):
        cfg = write_config(tiny_dataset, {
            "landmarks": {"proposals": {"dir": "props"}},
            "descriptors": {"builtin": {}},
        }, name="prop.json")
        rc = run(["sample", "--config", cfg,
                  "--manifest", tiny_dataset / "manifest.json",
                  "--out", tiny_dataset / "x"])
        assert rc == 1


class TestDescribe:
    def test_builtin_blocks(self, tiny_dataset, default_config):
        out = tiny_dataset / "blocks"
        rc = run(["describe", "--config", default_config,
                  "--manifest", tiny_dataset / "manifest.json", "--out", out])
        assert rc == 0
        block = read_block(out / "q0.lmdb1")
        assert len(block) == 100
        assert block.dim == 144

    def test_projection_larger_than_source_is_config_error(self, tiny_dataset):
        cfg = write_config(tiny_dataset, {
            "landmarks": {"dense": {}},
            "descriptors": {"builtin": {}},
            "projection": {"target_dim": 1024, "seed": 1},
        }, name="proj.json")
        rc = run(["describe", "--config", cfg,
                  "--manifest", tiny_dataset / "manifest.json",
                  "--out", tiny_dataset / "pb"])
        assert rc == 2  # collected per-image; reported as data errors

    def test_files_mode_passthrough(self, tiny_dataset, default_config):
        blocks = tiny_dataset / "blocks"
        run(["describe", "--config", default_config,
             "--manifest", tiny_dataset / "manifest.json", "--out", blocks])
        cfg = write_config(tiny_dataset, {
            "landmarks": {"dense": {}},
            "descriptors": {"files": {"dir": "blocks"}},
        }, name="files.json")
        out = tiny_dataset / "blocks2"
        rc = run(["describe", "--config", cfg,
                  "--manifest", tiny_dataset / "manifest.json", "--out", out])
        assert rc == 0
        assert (out / "q0.lmdb1").read_bytes() == (blocks / "q0.lmdb1").read_bytes()


class TestSelect:
    def _proposals_dir(self, tiny_dataset):
        rng = np.random.default_rng(0)
        props = tiny_dataset / "props"
        props.mkdir()
        for i in range(4):
            for prefix in ("q", "r"):
                lines = []
                for _ in range(300):
                    w = int(rng.integers(10, 120))
                    h = int(rng.integers(10, 90))
                    x = int(rng.integers(0, 120 - w + 1))
                    y = int(rng.integers(0, 90 - h + 1))
                    lines.append(f"{x},{y},{w},{h}")
                (props / f"{prefix}{i}.boxes.csv").write_text("\n".join(lines) + "\n")
        return props

    @pytest.mark.parametrize("scheme", ["scheme1", "scheme2", "overlap"])
    def test_select_schemes(self, tiny_dataset, scheme):
        self._proposals_dir(tiny_dataset)
        cfg = write_config(tiny_dataset, {
            "landmarks": {"proposals": {"dir": "props", "scheme": scheme,
                                        "limit": 20, "iou_threshold": 0.7}},
            "descriptors": {"builtin": {}},
        }, name=f"sel_{scheme}.json")
        out = tiny_dataset / f"sel_{scheme}"
        rc = run(["select", "--config", cfg,
                  "--manifest", tiny_dataset / "manifest.json", "--out", out])
        assert rc == 0
        assert len(list(out.glob("*.boxes.csv"))) == 8


class TestEvaluate:
    def test_artifacts_and_determinism(self, tiny_dataset, default_config):
        out1 = tiny_dataset / "eval1"
        out2 = tiny_dataset / "eval2"
        for out in (out1, out2):
            rc = run(["evaluate", "--config", default_config,
                      "--manifest", tiny_dataset / "manifest.json", "--out", out])
            assert rc == 0
        for name in ("similarity_matrix.csv", "pr_curve.csv", "cls.csv", "asl.csv",
                     "timing.csv", "run_meta.json"):
            assert (out1 / name).exists(), name
        assert (out1 / "similarity_matrix.csv").read_bytes() == \
            (out2 / "similarity_matrix.csv").read_bytes()
        assert (out1 / "pr_curve.csv").read_bytes() == (out2 / "pr_curve.csv").read_bytes()

    def test_matrix_shape_and_self_recognition(self, tiny_dataset, default_config):
        out = tiny_dataset / "eval"
        run(["evaluate", "--config", default_config,
             "--manifest", tiny_dataset / "manifest.json", "--out", out])
        matrix = read_matrix_csv(out / "similarity_matrix.csv")
        assert matrix.shape == (4, 4)
        assert np.array_equal(matrix.argmax(axis=1), np.arange(4))

    def test_metadata_headers_name_config_and_seed(self, tiny_dataset, default_config):
        out = tiny_dataset / "eval_h"
        run(["evaluate", "--config", default_config, "--seed", "7",
             "--manifest", tiny_dataset / "manifest.json", "--out", out])
        for name in ("similarity_matrix.csv", "pr_curve.csv", "cls.csv", "asl.csv", "timing.csv"):
            first = (out / name).read_text().splitlines()[0]
            assert first.startswith("# lmvpr")
            assert "config=" in first and "seed=7" in first

    def test_missing_descriptor_file_is_data_error(self, tiny_dataset, capsys):
        cfg = write_config(tiny_dataset, {
            "landmarks": {"dense": {}},
            "descriptors": {"files": {"dir": "missing_blocks"}},
        }, name="missing.json")
        rc = run(["evaluate", "--config", cfg,
                  "--manifest", tiny_dataset / "manifest.json",
                  "--out", tiny_dataset / "ev"])
        assert rc == 2
        err = capsys.readouterr().err
        assert "q0" in err

    def test_run_meta_contents(self, tiny_dataset, default_config):
        out = tiny_dataset / "eval_m"
        run(["evaluate", "--config", default_config,
             "--manifest", tiny_dataset / "manifest.json", "--out", out])
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["seed"] == 0
        assert meta["config_hash"]
        assert meta["backend"] in ("numba", "numpy")
        assert set(meta["stage_totals_s"]) == {"extract_landmarks", "compute_features",
                                               "remaining_steps"}


class TestMatchAndStudy:
    def test_match_then_study(self, tiny_dataset, default_config):
        mout = tiny_dataset / "matches"
        rc = run(["match", "--config", default_config,
                  "--manifest", tiny_dataset / "manifest.json", "--out", mout])
        assert rc == 0
        records = read_match_records_csv(mout / "matches.csv")
        assert records
        assert all(1 <= r.query_scale <= 9 for r in records)

        sout = tiny_dataset / "study"
        rc = run(["study", "--manifest", tiny_dataset / "manifest.json",
                  "--matches", mout / "matches.csv", "--out", sout])
        assert rc == 0
        assert (sout / "cls.csv").exists()
        assert (sout / "asl.csv").exists()
        assert not (sout / "cmr.csv").exists()

    def test_cmr_without_labels_errors(self, tiny_dataset, default_config):
        mout = tiny_dataset / "matches2"
        run(["match", "--config", default_config,
             "--manifest", tiny_dataset / "manifest.json", "--out", mout])
        rc = run(["study", "--manifest", tiny_dataset / "manifest.json",
                  "--matches", mout / "matches.csv", "--metrics", "cmr",
                  "--out", tiny_dataset / "study2"])
        assert rc == 2

    def test_cmr_with_labels(self, tiny_dataset, default_config):
        mout = tiny_dataset / "matches3"
        run(["match", "--config", default_config,
             "--manifest", tiny_dataset / "manifest.json", "--out", mout])
        records = read_match_records_csv(mout / "matches.csv")
        gt_ids = {(f"q{i}", f"r{i}") for i in range(4)}
        labels = "\n".join(
            f"{r.query_id},{r.ref_id},{r.query_idx},{r.ref_idx},1"
            for r in records if (r.query_id, r.ref_id) in gt_ids
        )
        labels_path = tiny_dataset / "labels.csv"
        labels_path.write_text(labels + "\n")
        sout = tiny_dataset / "study3"
        rc = run(["study", "--manifest", tiny_dataset / "manifest.json",
                  "--matches", mout / "matches.csv", "--labels", labels_path,
                  "--metrics", "cmr,cls,asl", "--out", sout])
        assert rc == 0
        cmr_lines = (sout / "cmr.csv").read_text().strip().splitlines()
        assert cmr_lines[1] == "scale,ground_truth"
        assert len(cmr_lines) == 11  # header + column row + 9 scale rows


class TestBench:
    def test_bench_writes_timing(self, tiny_dataset, default_config, capsys):
        out = tiny_dataset / "bench"
        rc = run(["bench", "--config", default_config,
                  "--manifest", tiny_dataset / "manifest.json", "--out", out])
        assert rc == 0
        assert (out / "timing.csv").exists()
        captured = capsys.readouterr().out
        assert "extract_landmarks" in captured
        assert "dense sampling" in captured


class TestConfig:
    def test_unknown_key_rejected(self, tiny_dataset):
        cfg = write_config(tiny_dataset, {"landmarks": {"dense": {}},
                                          "descriptors": {"builtin": {}},
                                          "typo_key": 1}, name="bad.json")
        rc = run(["sample", "--config", cfg,
                  "--manifest", tiny_dataset / "manifest.json",
                  "--out", tiny_dataset / "nope"])
        assert rc == 1

    def test_nested_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"landmarks": {"dense": {"levls": []}},
                              "descriptors": {"builtin": {}}})

    def test_two_landmark_sources_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"landmarks": {"dense": {}, "proposals": {"dir": "x"}},
                              "descriptors": {"builtin": {}}})

    @pytest.mark.parametrize("levels", LEVEL_COUNT_GRID + PER_SCALE_COUNT_GRID + SCALE_VALUE_GRID)
    def test_all_study_grids_expressible(self, levels):
        cfg = config_from_dict({"landmarks": {"dense": {"levels": levels}},
                                "descriptors": {"builtin": {}}})
        lset = dense_sample(ImageDims(640, 480), cfg.landmarks.spec)
        assert len(lset) == sum(c for _, c in levels)

    def test_config_hash_stable(self, tiny_dataset, default_config):
        a = load_config(default_config)
        b = load_config(default_config)
        assert a.hash() == b.hash()
        assert len(a.hash()) == 12

    def test_bad_json_exit_code(self, tiny_dataset):
        bad = tiny_dataset / "broken.json"
        bad.write_text("{not json")
        rc = run(["sample", "--config", bad,
                  "--manifest", tiny_dataset / "manifest.json",
                  "--out", tiny_dataset / "x"])
        assert rc == 1
