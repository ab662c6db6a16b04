import json

import numpy as np
import pytest

from _synth import translated_place_dataset


@pytest.fixture
def tiny_dataset(tmp_path):
    """Four-place synthetic dataset on disk: npy images plus manifest."""
    queries, refs = translated_place_dataset(n_places=4, width=120, height=90, seed=3)
    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    q_entries, r_entries = [], []
    for i, (q, r) in enumerate(zip(queries, refs)):
        qp = img_dir / f"q{i}.npy"
        rp = img_dir / f"r{i}.npy"
        np.save(qp, q)
        np.save(rp, r)
        q_entries.append({"id": f"q{i}", "path": f"imgs/q{i}.npy"})
        r_entries.append({"id": f"r{i}", "path": f"imgs/r{i}.npy"})
    manifest = {
        "queries": q_entries,
        "references": r_entries,
        "ground_truth": {str(i): i for i in range(4)},
        "frame_tolerance": 0,
    }
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(json.dumps(manifest))
    return tmp_path


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def default_config(tmp_path):
    return write_config(tmp_path, {
        "landmarks": {"dense": {"levels": [[0.16, 25], [0.25, 25], [0.36, 25], [0.49, 25]]}},
        "descriptors": {"builtin": {}},
        "seed": 0,
        "threads": 1,
    })
