"""Compute ConvNet features of landmark crops and emit descriptor block
files for the place-recognition pipeline.

Talks to the pipeline only through its file formats: `<id>.boxes.csv` in,
`<id>.lmdb1` out.
"""

__version__ = "0.1.0"

from .export import ExportConfig, export_image, run_export  # noqa: F401
from .model import FeatureExtractor  # noqa: F401
