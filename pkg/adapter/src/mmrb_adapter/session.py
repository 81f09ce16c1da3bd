"""Serve one benchmark scenario: read inputs, predict, write label maps.

The harness launches an external predictor once per corruption scenario as

    <command> --manifest <path> --output <dir>

and collects one ``<sample_id>.png`` label map per sample from the output
directory. A zero exit approves the scenario; any nonzero exit aborts the
whole benchmark run, which then reports the scenario id together with the
predictor's last stderr lines, so failures logged here surface verbatim in
the run error.

Serving is single-process and strictly sequential in manifest order. The
predict_fn is a plain callable from a name-keyed dict of (channels, height,
width) arrays to a (height, width) integer class-id map, which keeps the
adapter framework-agnostic: wrap a model by converting tensors inside the
callable and return its argmax map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

from .errors import FormatError, PredictionError
from .protocol import AdapterManifest, parse_manifest, read_tensor, write_label_png

LOG = logging.getLogger("mmrb_adapter")

PredictFn = Callable[[Mapping[str, np.ndarray]], np.ndarray]


def _load_inputs(manifest: AdapterManifest, sample) -> dict[str, np.ndarray]:
    inputs: dict[str, np.ndarray] = {}
    size: tuple[int, int] | None = None
    for m in manifest.modalities:
        arr = read_tensor(manifest.resolve(sample.inputs[m.name]))
        if arr.shape[0] != m.channels:
            raise FormatError(
                f"modality {m.name!r}: {arr.shape[0]} channel(s), "
                f"manifest says {m.channels}")
        if size is not None and arr.shape[1:] != size:
            raise FormatError(
                f"modality {m.name!r}: size {arr.shape[1:]} differs from {size}")
        size = arr.shape[1:]
        inputs[m.name] = arr
    return inputs


def _checked_prediction(raw, manifest: AdapterManifest,
                        size: tuple[int, int]) -> np.ndarray:
    arr = np.asarray(raw)
    if arr.ndim != 2 or arr.dtype.kind not in "iu":
        raise PredictionError(
            f"predict_fn must return a 2-d integer class-id map, got shape "
            f"{getattr(arr, 'shape', None)}, dtype {arr.dtype}")
    if arr.shape != size:
        raise PredictionError(
            f"prediction shape {arr.shape} does not match inputs {size}")
    ids = arr.astype(np.int64)
    bad = (ids != manifest.ignore_index) & ((ids < 0) | (ids >= manifest.class_count))
    if bad.any():
        raise PredictionError(
            f"{int(bad.sum())} prediction value(s) outside class ids "
            f"0..{manifest.class_count - 1} and not the ignore id "
            f"{manifest.ignore_index}")
    return arr.astype(np.uint16)


def serve_batch(manifest: AdapterManifest, output_dir: Path | str,
                predict_fn: PredictFn) -> int:
    """Predict every sample in manifest order; returns a process exit status.

    Loads all modality tensors of a sample into a name-keyed dict, calls
    ``predict_fn`` on it, and writes the returned class-id map to
    ``<output_dir>/<sample_id>.png``. The first failing sample is logged by
    id and makes the result 1; label maps written before the failure stay
    in place.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    for sample in manifest.samples:
        try:
            inputs = _load_inputs(manifest, sample)
            size = next(iter(inputs.values())).shape[1:]
            pred = _checked_prediction(predict_fn(inputs), manifest, size)
            write_label_png(pred, output_dir / f"{sample.id}.png")
        except Exception as exc:
            LOG.error("sample %s failed: %s: %s", sample.id, type(exc).__name__, exc)
            return 1
    return 0


@dataclass(frozen=True)
class AdapterSession:
    """One serving assignment: a manifest to read, a directory to fill, and
    the callable that turns a sample's modality tensors into class ids."""

    manifest_path: Path
    output_dir: Path
    predict_fn: PredictFn

    def run(self) -> int:
        return serve_batch(parse_manifest(self.manifest_path), self.output_dir,
                           self.predict_fn)
