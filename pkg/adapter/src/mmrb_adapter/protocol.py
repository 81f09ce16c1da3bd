"""The benchmark harness's on-disk exchange protocol, implemented standalone.

This package never imports the benchmark itself; everything here is written
against the documented file formats so a predictor can run in a model
environment where only numpy and Pillow are installed.

Three artifacts cross the process boundary:

* ``manifest.json`` names the modalities, the class list, the ignore id, and
  one input file per (sample, modality). All paths are relative to the
  manifest's directory. The manifests a predictor receives never reference
  ground-truth labels; ``label`` entries are ignored when present.
* Input tensors arrive as PNG (u8 gray/RGB, u16 gray) or as MMTB, a minimal
  raw container: magic ``MMTB``, version byte 0x01, dtype byte (0 = u8,
  1 = u16, 2 = f32), ndim byte, ndim little-endian u32 dims, then the
  row-major little-endian payload.
* Predictions leave as one ``<sample_id>.png`` grayscale label map per
  sample, 8-bit whenever every class id fits a byte.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from PIL import Image

from .errors import FormatError, ManifestError

MANIFEST_VERSION = 1

MMTB_MAGIC = b"MMTB"
MMTB_VERSION = 1
_MMTB_DTYPES = {0: np.dtype("u1"), 1: np.dtype("<u2"), 2: np.dtype("<f4")}
_MMTB_MAX_DIMS = 4


# ---------------------------------------------------------------------------
# tensor files

def _read_mmtb(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    if len(blob) < 7:
        raise FormatError(f"{path}: truncated MMTB header ({len(blob)} bytes)")
    if blob[:4] != MMTB_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {MMTB_MAGIC!r}")
    version, dtype_code, ndim = blob[4], blob[5], blob[6]
    if version != MMTB_VERSION:
        raise FormatError(f"{path}: unsupported MMTB version {version}")
    if dtype_code not in _MMTB_DTYPES:
        raise FormatError(f"{path}: unsupported dtype code {dtype_code}")
    if not 1 <= ndim <= _MMTB_MAX_DIMS:
        raise FormatError(f"{path}: ndim {ndim} outside 1..{_MMTB_MAX_DIMS}")
    header_end = 7 + 4 * ndim
    if len(blob) < header_end:
        raise FormatError(f"{path}: truncated MMTB dims")
    dims = struct.unpack(f"<{ndim}I", blob[7:header_end])
    count = math.prod(dims)
    dtype = _MMTB_DTYPES[dtype_code]
    if count == 0 or count > (1 << 40):
        raise FormatError(f"{path}: dimension overflow, dims {dims}")
    expected = header_end + count * dtype.itemsize
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload is {len(blob) - header_end} bytes, "
            f"expected {expected - header_end}")
    data = np.frombuffer(blob, dtype=dtype, offset=header_end)
    return data.reshape(dims).copy()


def _png_to_array(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        mode = img.mode
        if mode in ("L", "RGB"):
            return np.asarray(img, dtype=np.uint8)
        if mode in ("I;16", "I;16B"):
            return np.asarray(img, dtype=np.uint16)
        if mode == "I":
            # Some decoder versions promote 16-bit gray PNG to 32-bit I.
            arr = np.asarray(img, dtype=np.int32)
            if arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max:
                raise FormatError(f"{path}: 32-bit values exceed u16 range")
            return arr.astype(np.uint16)
        raise FormatError(f"{path}: unsupported PNG mode {mode!r}")


def read_tensor(path: Path | str) -> np.ndarray:
    """Load one modality tensor as a (channels, height, width) array."""
    path = Path(path)
    if path.suffix == ".png":
        arr = _png_to_array(path)
        if arr.ndim == 2:
            return arr[None]
        return np.ascontiguousarray(arr.transpose(2, 0, 1))
    if path.suffix == ".mmtb":
        arr = _read_mmtb(path)
        if arr.ndim != 3:
            raise FormatError(f"{path}: tensor MMTB must be 3-d, got ndim {arr.ndim}")
        return arr
    raise FormatError(f"{path}: unknown tensor format (want .png or .mmtb)")


def write_label_png(labels: np.ndarray, path: Path | str) -> None:
    """Write a (height, width) class-id map as a grayscale PNG.

    8-bit when every id fits a byte (always the case for class counts up to
    255 with the usual ignore id), 16-bit otherwise; ids above u16 range
    cannot be represented and are rejected.
    """
    arr = np.asarray(labels)
    if arr.ndim != 2 or arr.dtype.kind not in "iu":
        raise FormatError(
            f"label map must be a 2-d integer array, got shape "
            f"{getattr(arr, 'shape', None)}, dtype {arr.dtype}")
    if arr.size == 0:
        raise FormatError("label map is empty")
    lo, hi = int(arr.min()), int(arr.max())
    if lo < 0 or hi > np.iinfo(np.uint16).max:
        raise FormatError(f"label values {lo}..{hi} do not fit u16")
    if hi <= np.iinfo(np.uint8).max:
        img = Image.fromarray(arr.astype(np.uint8), mode="L")
    else:
        data = np.ascontiguousarray(arr.astype("<u2"))
        img = Image.frombytes("I;16", (arr.shape[1], arr.shape[0]), data.tobytes())
    img.save(Path(path), format="PNG")


# ---------------------------------------------------------------------------
# manifests

@dataclass(frozen=True)
class ModalityInfo:
    """The per-modality manifest fields a predictor consumes."""

    name: str
    channels: int
    value_min: float
    value_max: float

    def __post_init__(self) -> None:
        if not self.name:
            raise ManifestError("modality name must be non-empty")
        if self.channels < 1:
            raise ManifestError(f"modality {self.name!r}: channels must be >= 1")
        if not self.value_min < self.value_max:
            raise ManifestError(
                f"modality {self.name!r}: empty value range "
                f"[{self.value_min}, {self.value_max}]")


@dataclass(frozen=True)
class SampleInfo:
    """One sample: an id and one input file per modality name."""

    id: str
    inputs: Mapping[str, str]

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("sample id must be non-empty")
        object.__setattr__(self, "inputs", dict(self.inputs))


@dataclass(frozen=True)
class AdapterManifest:
    """The subset of a dataset manifest needed to serve predictions."""

    modalities: tuple[ModalityInfo, ...]
    classes: tuple[str, ...]
    ignore_index: int
    samples: tuple[SampleInfo, ...]
    root: Path

    def __post_init__(self) -> None:
        if not self.modalities:
            raise ManifestError("need at least one modality")
        names = [m.name for m in self.modalities]
        if len(set(names)) != len(names):
            raise ManifestError(f"duplicate modality names {names}")
        if len(self.classes) < 2:
            raise ManifestError(f"need at least 2 classes, got {len(self.classes)}")
        if not self.class_count <= self.ignore_index <= np.iinfo(np.uint16).max:
            raise ManifestError(
                f"ignore_index {self.ignore_index} must be outside class ids "
                f"0..{self.class_count - 1} and fit u16")
        seen: set[str] = set()
        for i, sample in enumerate(self.samples):
            if sample.id in seen:
                raise ManifestError(f"samples[{i}]: duplicate sample id {sample.id!r}")
            seen.add(sample.id)
            missing = sorted(set(names) - set(sample.inputs))
            if missing:
                raise ManifestError(
                    f"samples[{i}] (id {sample.id!r}): inputs missing {missing}")

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def modality_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modalities)

    def resolve(self, relpath: str) -> Path:
        return self.root / relpath


def _require(doc: Mapping, key: str, kind, where: str):
    if key not in doc:
        raise ManifestError(f"{where}: missing field {key!r}")
    value = doc[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ManifestError(
                f"{where}.{key}: expected a number, got {type(value).__name__}")
        return float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ManifestError(
            f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def parse_manifest(path: Path | str) -> AdapterManifest:
    """Parse the fields of a manifest file that serving depends on.

    Fields the adapter never consumes (modality letters, noise eligibility,
    ground-truth ``label`` entries) are tolerated and dropped.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    where = str(path)
    version = _require(doc, "version", int, where)
    if version != MANIFEST_VERSION:
        raise ManifestError(f"{where}: unsupported manifest version {version}")
    raw_mods = _require(doc, "modalities", list, where)
    modalities = []
    for i, m in enumerate(raw_mods):
        mwhere = f"{where}.modalities[{i}]"
        if not isinstance(m, dict):
            raise ManifestError(f"{mwhere}: expected an object")
        modalities.append(ModalityInfo(
            name=_require(m, "name", str, mwhere),
            channels=_require(m, "channels", int, mwhere),
            value_min=_require(m, "value_min", float, mwhere),
            value_max=_require(m, "value_max", float, mwhere),
        ))
    classes = _require(doc, "classes", list, where)
    if not all(isinstance(c, str) for c in classes):
        raise ManifestError(f"{where}.classes: expected a list of strings")
    ignore_index = _require(doc, "ignore_index", int, where)
    raw_samples = _require(doc, "samples", list, where)
    samples = []
    for i, s in enumerate(raw_samples):
        swhere = f"{where}.samples[{i}]"
        if not isinstance(s, dict):
            raise ManifestError(f"{swhere}: expected an object")
        inputs = _require(s, "inputs", dict, swhere)
        for k, v in inputs.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise ManifestError(f"{swhere}.inputs: expected a string-to-string map")
        samples.append(SampleInfo(id=_require(s, "id", str, swhere), inputs=inputs))
    try:
        return AdapterManifest(modalities=tuple(modalities), classes=tuple(classes),
                               ignore_index=ignore_index, samples=tuple(samples),
                               root=path.parent)
    except ManifestError as exc:
        raise ManifestError(f"{where}: {exc}") from exc
