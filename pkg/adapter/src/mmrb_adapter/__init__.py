"""Predictor-side adapter for the multi-modal robustness benchmark.

Implements the benchmark's file exchange protocol (manifest in, one label
map per sample out) without importing the benchmark package, so model code
only needs numpy and Pillow. Wire a model in by passing a predict_fn to
:func:`serve_batch` or :class:`AdapterSession`.
"""

from .errors import AdapterError, FormatError, ManifestError, PredictionError
from .protocol import (AdapterManifest, ModalityInfo, SampleInfo,
                       parse_manifest, read_tensor, write_label_png)
from .session import AdapterSession, PredictFn, serve_batch
from .synthetic import synthetic_inverse

__version__ = "0.1.0"

__all__ = [
    "AdapterError", "AdapterManifest", "AdapterSession", "FormatError",
    "ManifestError", "ModalityInfo", "PredictFn", "PredictionError",
    "SampleInfo", "parse_manifest", "read_tensor", "serve_batch",
    "synthetic_inverse", "write_label_png",
]
