"""Landmark-based visual place recognition.

Dense multi-scale landmark sampling, proposal selection schemes, reciprocal
nearest-neighbor matching with shape-weighted similarity aggregation, and a
precision-recall evaluation harness.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    DEFAULT_SCALE_SPEC,
    BoundingBox,
    ImageDims,
    Landmark,
    LandmarkSet,
    ScaleSpec,
    area_ratio,
    dense_sample,
    iou,
    scale_index,
)
from .proposals import (  # noqa: F401
    ProposalList,
    SelectionConfig,
    load_proposals,
    select_overlap,
    select_scheme1,
    select_scheme2,
)
from .descriptors import (  # noqa: F401
    DESCRIPTOR_DIM,
    DescriptorBlock,
    ProjectionConfig,
    cosine_distance,
    describe_landmarks,
    describe_patch,
    random_projection,
    read_block,
    write_block,
)
from .matching import (  # noqa: F401
    MatchConfig,
    MatchPair,
    SoftNmsConfig,
    image_similarity,
    match_blocks,
    reciprocal_matches,
    shape_similarity,
    soft_nms_rescore,
)
from .evaluation import (  # noqa: F401
    DatasetManifest,
    MatchRecord,
    PRCurve,
    SimilarityMatrix,
    StudyRecord,
    coverage_heatmap,
    pr_curve,
    study_stats,
)
from .pipeline import StageTimings, build_similarity_matrix, timing_table  # noqa: F401
