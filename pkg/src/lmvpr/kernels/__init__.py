"""Hot-kernel dispatch.

The LMVPR_BACKEND environment variable picks the implementation:

  LMVPR_BACKEND=numba   numba @njit kernels (error if numba is missing)
  LMVPR_BACKEND=numpy   pure-numpy kernels
  unset / auto          numba when importable, numpy otherwise

Both backends implement the same contracts and agree to floating-point
round-off; `benchmarks/compare_backends.py` times them against each other.
"""
from __future__ import annotations

import os

from ..errors import ConfigError

_requested = os.environ.get("LMVPR_BACKEND", "auto").strip().lower() or "auto"
if _requested not in ("auto", "numba", "numpy"):
    raise ConfigError(
        f"LMVPR_BACKEND must be 'numba', 'numpy', or 'auto', got {_requested!r}"
    )

if _requested == "numpy":
    from . import numpy_backend as _impl
else:
    try:
        from . import numba_backend as _impl
    except ImportError:
        if _requested == "numba":
            raise
        from . import numpy_backend as _impl

NAME = _impl.NAME
PATCH_SIDE = _impl.PATCH_SIDE
DESCRIPTOR_DIM = _impl.DESCRIPTOR_DIM

iou_matrix = _impl.iou_matrix
pairwise_cosine = _impl.pairwise_cosine
greedy_overlap_select = _impl.greedy_overlap_select
soft_nms_rescore = _impl.soft_nms_rescore
resize_area = _impl.resize_area
patch_descriptors = _impl.patch_descriptors


def backend_name() -> str:
    return NAME


def warmup() -> None:
    """Force kernel compilation so timing runs do not measure the JIT."""
    import numpy as np

    boxes = np.array([[0, 0, 4, 4], [2, 0, 4, 4]], dtype=np.float64)
    iou_matrix(boxes, boxes)
    greedy_overlap_select(boxes, 0.5, 2)
    soft_nms_rescore(np.array([0.9, 0.8]), iou_matrix(boxes, boxes), 0.1, 0.5)
    vecs = np.eye(3, dtype=np.float64)
    pairwise_cosine(vecs, vecs)
    patch_descriptors(np.zeros((8, 8)), np.array([[0, 0, 8, 8]], dtype=np.int64))
