"""Dataset manifests, tensor file formats, and synthetic data generation.

A dataset is a directory with one ``manifest.json`` naming the modalities,
the class list, and one input file per (sample, modality) plus a label map
per sample. All paths in a manifest are relative to the manifest's own
directory.

Tensors travel as PNG where PNG is a natural fit (u8 gray/RGB, u16 gray) and
otherwise as MMTB, a minimal raw container: magic ``MMTB``, version byte
0x01, dtype byte (0 = u8, 1 = u16, 2 = f32), ndim byte, ndim little-endian
u32 dims, then the row-major little-endian payload. Round-trips are bit-exact
for both formats.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from PIL import Image

from .corruption import DTYPES, TensorBuffer
from .errors import ManifestError, ParameterError, TensorFormatError
from .metrics import DEFAULT_IGNORE_INDEX, LabelMap
from .modality import DELIVER_PROFILES, ModalityProfile, validate_profiles
from .rng import SeedContext, derive_stream_seed, shuffle_prefix

MANIFEST_VERSION = 1

MMTB_MAGIC = b"MMTB"
MMTB_VERSION = 1
_MMTB_DTYPES = {0: np.dtype("u1"), 1: np.dtype("<u2"), 2: np.dtype("<f4")}
_MMTB_CODES = {np.dtype(np.uint8): 0, np.dtype(np.uint16): 1, np.dtype(np.float32): 2}
_MMTB_MAX_DIMS = 4


# ---------------------------------------------------------------------------
# tensor files

def _read_mmtb(path: Path) -> np.ndarray:
    blob = path.read_bytes()
    if len(blob) < 7:
        raise TensorFormatError(f"{path}: truncated MMTB header ({len(blob)} bytes)")
    if blob[:4] != MMTB_MAGIC:
        raise TensorFormatError(f"{path}: bad magic {blob[:4]!r}, expected {MMTB_MAGIC!r}")
    version, dtype_code, ndim = blob[4], blob[5], blob[6]
    if version != MMTB_VERSION:
        raise TensorFormatError(f"{path}: unsupported MMTB version {version}")
    if dtype_code not in _MMTB_DTYPES:
        raise TensorFormatError(f"{path}: unsupported dtype code {dtype_code}")
    if not 1 <= ndim <= _MMTB_MAX_DIMS:
        raise TensorFormatError(f"{path}: ndim {ndim} outside 1..{_MMTB_MAX_DIMS}")
    header_end = 7 + 4 * ndim
    if len(blob) < header_end:
        raise TensorFormatError(f"{path}: truncated MMTB dims")
    dims = struct.unpack(f"<{ndim}I", blob[7:header_end])
    count = math.prod(dims)
    dtype = _MMTB_DTYPES[dtype_code]
    if count == 0 or count > (1 << 40):
        raise TensorFormatError(f"{path}: dimension overflow, dims {dims}")
    expected = header_end + count * dtype.itemsize
    if len(blob) != expected:
        raise TensorFormatError(
            f"{path}: payload is {len(blob) - header_end} bytes, expected {expected - header_end}")
    data = np.frombuffer(blob, dtype=dtype, offset=header_end)
    return data.reshape(dims).copy()


def _write_mmtb(arr: np.ndarray, path: Path) -> None:
    dtype = np.dtype(arr.dtype)
    if dtype not in _MMTB_CODES:
        raise TensorFormatError(f"cannot write dtype {dtype} as MMTB")
    if not 1 <= arr.ndim <= _MMTB_MAX_DIMS:
        raise TensorFormatError(f"cannot write ndim {arr.ndim} as MMTB")
    if max(arr.shape) >= (1 << 32):
        raise TensorFormatError(f"dimension overflow, shape {arr.shape}")
    le = arr.astype(_MMTB_DTYPES[_MMTB_CODES[dtype]], copy=False)
    header = MMTB_MAGIC + bytes([MMTB_VERSION, _MMTB_CODES[dtype], arr.ndim])
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    path.write_bytes(header + np.ascontiguousarray(le).tobytes())


def _png_to_array(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        mode = img.mode
        if mode == "L":
            return np.asarray(img, dtype=np.uint8)
        if mode == "RGB":
            return np.asarray(img, dtype=np.uint8)
        if mode in ("I;16", "I;16B"):
            return np.asarray(img, dtype=np.uint16)
        if mode == "I":
            # Some decoder versions promote 16-bit gray PNG to 32-bit I.
            arr = np.asarray(img, dtype=np.int32)
            if arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max:
                raise TensorFormatError(f"{path}: 32-bit values exceed u16 range")
            return arr.astype(np.uint16)
        raise TensorFormatError(f"{path}: unsupported PNG mode {mode!r}")


def _array_to_png(arr: np.ndarray, path: Path) -> None:
    if arr.dtype == np.uint8 and arr.ndim in (2, 3):
        img = Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB")
    elif arr.dtype == np.uint16 and arr.ndim == 2:
        img = Image.frombytes("I;16", (arr.shape[1], arr.shape[0]),
                              np.ascontiguousarray(arr.astype("<u2")).tobytes())
    else:
        raise TensorFormatError(
            f"cannot write dtype {arr.dtype}, shape {arr.shape} as PNG")
    img.save(path, format="PNG")


def read_tensor(path: Path | str) -> TensorBuffer:
    """Load one modality tensor from a PNG or MMTB file."""
    path = Path(path)
    if path.suffix == ".png":
        arr = _png_to_array(path)
        if arr.ndim == 2:
            arr = arr[None]
        else:
            arr = np.ascontiguousarray(arr.transpose(2, 0, 1))
        return TensorBuffer(arr)
    if path.suffix == ".mmtb":
        arr = _read_mmtb(path)
        if arr.ndim != 3:
            raise TensorFormatError(f"{path}: tensor MMTB must be 3-d, got ndim {arr.ndim}")
        return TensorBuffer(arr)
    raise TensorFormatError(f"{path}: unknown tensor format (want .png or .mmtb)")


def write_tensor(t: TensorBuffer, path: Path | str) -> None:
    """Write one modality tensor; the format follows the file suffix."""
    path = Path(path)
    if path.suffix == ".png":
        arr = t.data
        if arr.shape[0] == 1:
            _array_to_png(arr[0], path)
        elif arr.shape[0] == 3 and arr.dtype == np.uint8:
            _array_to_png(np.ascontiguousarray(arr.transpose(1, 2, 0)), path)
        else:
            raise TensorFormatError(
                f"cannot write {t.dtype_code} tensor with {arr.shape[0]} channels as PNG")
    elif path.suffix == ".mmtb":
        _write_mmtb(t.data, path)
    else:
        raise TensorFormatError(f"{path}: unknown tensor format (want .png or .mmtb)")


def tensor_suffix(dtype: np.dtype, channels: int) -> str:
    """Preferred file suffix for a tensor of this dtype and channel count."""
    dtype = np.dtype(dtype)
    if dtype == np.uint8 and channels in (1, 3):
        return ".png"
    if dtype == np.uint16 and channels == 1:
        return ".png"
    return ".mmtb"


def read_label(path: Path | str, ignore_index: int = DEFAULT_IGNORE_INDEX) -> LabelMap:
    """Load a label map from an 8/16-bit gray PNG or a 2-d MMTB file."""
    path = Path(path)
    if path.suffix == ".png":
        arr = _png_to_array(path)
        if arr.ndim != 2:
            raise TensorFormatError(f"{path}: label PNG must be grayscale")
    elif path.suffix == ".mmtb":
        arr = _read_mmtb(path)
        if arr.ndim != 2 or arr.dtype not in (np.uint8, np.uint16):
            raise TensorFormatError(f"{path}: label MMTB must be 2-d u8/u16")
    else:
        raise TensorFormatError(f"{path}: unknown label format (want .png or .mmtb)")
    return LabelMap(arr, ignore_index=ignore_index)


def write_label(label: LabelMap, path: Path | str) -> None:
    """Write a label map as PNG (8-bit when all ids fit a byte)."""
    path = Path(path)
    if path.suffix != ".png":
        raise TensorFormatError(f"{path}: labels are written as PNG")
    arr = label.data
    if int(arr.max(initial=0)) <= np.iinfo(np.uint8).max:
        _array_to_png(arr.astype(np.uint8), path)
    else:
        _array_to_png(arr, path)


# ---------------------------------------------------------------------------
# manifests

@dataclass(frozen=True)
class Sample:
    """One dataset sample: per-modality input files plus an optional label."""

    id: str
    inputs: Mapping[str, str]
    label: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("sample id must be non-empty")
        object.__setattr__(self, "inputs", dict(self.inputs))


@dataclass(frozen=True)
class Manifest:
    """A dataset index; all paths are relative to ``root``."""

    version: int
    modalities: tuple[ModalityProfile, ...]
    classes: tuple[str, ...]
    ignore_index: int
    samples: tuple[Sample, ...]
    root: Path = field(default=Path("."), compare=False)

    def __post_init__(self) -> None:
        if self.version != MANIFEST_VERSION:
            raise ManifestError(f"unsupported manifest version {self.version}")
        validate_profiles(self.modalities)
        if len(self.classes) < 2:
            raise ManifestError(f"need at least 2 classes, got {len(self.classes)}")
        if not len(self.classes) <= self.ignore_index:
            raise ManifestError(
                f"ignore_index {self.ignore_index} collides with class ids 0..{len(self.classes) - 1}")
        names = {p.name for p in self.modalities}
        seen_ids: set[str] = set()
        for i, sample in enumerate(self.samples):
            if sample.id in seen_ids:
                raise ManifestError(f"samples[{i}]: duplicate sample id {sample.id!r}")
            seen_ids.add(sample.id)
            if set(sample.inputs) != names:
                missing = sorted(names - set(sample.inputs))
                extra = sorted(set(sample.inputs) - names)
                detail = f"missing {missing}" if missing else f"unknown {extra}"
                raise ManifestError(
                    f"samples[{i}] (id {sample.id!r}): inputs {detail}")

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def modality_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.modalities)

    def profile(self, name: str) -> ModalityProfile:
        for p in self.modalities:
            if p.name == name:
                return p
        raise ManifestError(f"no modality named {name!r}")

    def resolve(self, relpath: str) -> Path:
        return self.root / relpath

    def without_labels(self) -> "Manifest":
        stripped = tuple(replace(s, label=None) for s in self.samples)
        return replace(self, samples=stripped)


def _require(doc: Mapping, key: str, kind, where: str):
    if key not in doc:
        raise ManifestError(f"{where}: missing field {key!r}")
    value = doc[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ManifestError(f"{where}.{key}: expected a number, got {type(value).__name__}")
        return value
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ManifestError(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def parse_manifest(path: Path | str, *, strict: bool = False) -> Manifest:
    """Parse and validate a manifest file.

    With ``strict`` every referenced input/label file must exist.
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
    raw_mods = _require(doc, "modalities", list, where)
    profiles = []
    for i, m in enumerate(raw_mods):
        if not isinstance(m, dict):
            raise ManifestError(f"{where}.modalities[{i}]: expected an object")
        mwhere = f"{where}.modalities[{i}]"
        try:
            profiles.append(ModalityProfile(
                name=_require(m, "name", str, mwhere),
                letter=_require(m, "letter", str, mwhere),
                channels=_require(m, "channels", int, mwhere),
                value_min=_require(m, "value_min", float, mwhere),
                value_max=_require(m, "value_max", float, mwhere),
                gaussian_eligible=_require(m, "gaussian_eligible", bool, mwhere),
            ))
        except ParameterError as exc:
            raise ManifestError(f"{mwhere}: {exc}") from exc
    classes = _require(doc, "classes", list, where)
    if not all(isinstance(c, str) for c in classes):
        raise ManifestError(f"{where}.classes: expected a list of strings")
    ignore_index = _require(doc, "ignore_index", int, where)
    raw_samples = _require(doc, "samples", list, where)
    samples = []
    for i, s in enumerate(raw_samples):
        if not isinstance(s, dict):
            raise ManifestError(f"{where}.samples[{i}]: expected an object")
        swhere = f"{where}.samples[{i}]"
        inputs = _require(s, "inputs", dict, swhere)
        for k, v in inputs.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise ManifestError(f"{swhere}.inputs: expected a string-to-string map")
        label = s.get("label")
        if label is not None and not isinstance(label, str):
            raise ManifestError(f"{swhere}.label: expected a string path")
        samples.append(Sample(id=_require(s, "id", str, swhere), inputs=inputs, label=label))
    try:
        manifest = Manifest(version=version, modalities=tuple(profiles),
                            classes=tuple(classes), ignore_index=ignore_index,
                            samples=tuple(samples), root=path.parent)
    except ParameterError as exc:
        raise ManifestError(f"{where}: {exc}") from exc
    if strict:
        for sample in manifest.samples:
            for name, rel in sample.inputs.items():
                if not manifest.resolve(rel).is_file():
                    raise ManifestError(
                        f"{where}: sample {sample.id!r} modality {name!r}: no file {rel}")
            if sample.label is not None and not manifest.resolve(sample.label).is_file():
                raise ManifestError(
                    f"{where}: sample {sample.id!r}: no label file {sample.label}")
    return manifest


def _number(x: float):
    # Keep integral profile bounds as JSON integers so files stay readable.
    return int(x) if float(x).is_integer() else float(x)


def manifest_to_doc(m: Manifest) -> dict:
    doc: dict = {
        "version": m.version,
        "modalities": [
            {
                "name": p.name,
                "letter": p.letter,
                "channels": p.channels,
                "value_min": _number(p.value_min),
                "value_max": _number(p.value_max),
                "gaussian_eligible": p.gaussian_eligible,
            }
            for p in m.modalities
        ],
        "classes": list(m.classes),
        "ignore_index": m.ignore_index,
        "samples": [],
    }
    for s in m.samples:
        entry: dict = {"id": s.id, "inputs": {n: s.inputs[n] for n in m.modality_names}}
        if s.label is not None:
            entry["label"] = s.label
        doc["samples"].append(entry)
    return doc


def write_manifest(m: Manifest, path: Path | str) -> None:
    path = Path(path)
    path.write_text(json.dumps(manifest_to_doc(m), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# synthetic datasets

@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of a generated dataset."""

    n_samples: int
    height: int
    width: int
    class_count: int
    modalities: tuple[ModalityProfile, ...] = DELIVER_PROFILES
    seed: int = 0
    ignore_index: int = DEFAULT_IGNORE_INDEX

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ParameterError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.height < 8 or self.width < 8:
            raise ParameterError(
                f"dataset images must be at least 8x8, got {self.height}x{self.width}")
        if self.class_count < 2:
            raise ParameterError(f"class_count must be >= 2, got {self.class_count}")
        if self.class_count > self.ignore_index:
            raise ParameterError(
                f"class_count {self.class_count} collides with ignore_index {self.ignore_index}")
        if self.ignore_index > np.iinfo(np.uint16).max:
            raise ParameterError(f"ignore_index {self.ignore_index} does not fit uint16")
        validate_profiles(self.modalities)


def profile_dtype(profile: ModalityProfile) -> np.dtype:
    """Storage dtype for a profile: u8/u16 for integral unsigned ranges, else f32."""
    lo, hi = float(profile.value_min), float(profile.value_max)
    if lo.is_integer() and hi.is_integer() and lo >= 0:
        if hi <= np.iinfo(np.uint8).max:
            return np.dtype(np.uint8)
        if hi <= np.iinfo(np.uint16).max:
            return np.dtype(np.uint16)
    return np.dtype(np.float32)


def class_encoding_step(profile: ModalityProfile, class_count: int) -> float:
    """Per-class value increment of the synthetic label-to-tensor encoding."""
    span = float(profile.value_max) - float(profile.value_min)
    if profile_dtype(profile).kind == "u":
        step = math.floor(span / (class_count + 1))
        if step < 1:
            raise ParameterError(
                f"modality {profile.name!r}: range {span} too narrow for "
                f"{class_count} classes")
        return float(step)
    return span / (class_count + 1)


def encode_labels(labels: np.ndarray, profile: ModalityProfile, modality_index: int,
                  class_count: int, ignore_index: int) -> TensorBuffer:
    """Synthetic modality tensor for a label map.

    Class k maps to value_min + step * (((k + modality_index) mod K) + 1) in
    every channel; ignore pixels map to value_min. Encoding index 0 is never
    used for a class, so a decoder can tell zeroed-out data from real values
    on any profile with value_min = 0.
    """
    step = class_encoding_step(profile, class_count)
    dtype = profile_dtype(profile)
    enc_index = np.where(labels == ignore_index, 0,
                         (labels.astype(np.int64) + modality_index) % class_count + 1)
    values = float(profile.value_min) + step * enc_index.astype(np.float64)
    if dtype.kind == "u":
        plane = np.floor(values + 0.5).astype(dtype)
    else:
        plane = values.astype(dtype)
    return TensorBuffer(np.repeat(plane[None], profile.channels, axis=0))


def decode_tensor(t: TensorBuffer, profile: ModalityProfile, modality_index: int,
                  class_count: int, ignore_index: int) -> np.ndarray:
    """Inverse of :func:`encode_labels`; unreadable pixels become ignore_index.

    A pixel is unreadable when its first-channel value sits below half an
    encoding step above value_min (covers both real ignore pixels and zeroed
    data).
    """
    step = class_encoding_step(profile, class_count)
    lo = float(profile.value_min)
    plane = t.data[0].astype(np.float64)
    enc_index = np.floor((plane - lo) / step + 0.5).astype(np.int64)
    enc_index = np.clip(enc_index, 0, class_count)
    k = (enc_index - 1 - modality_index) % class_count
    out = np.where(enc_index == 0, ignore_index, k)
    return out.astype(np.uint16)


def _voronoi_labels(cfg: SyntheticConfig, sample_id: str) -> np.ndarray:
    seed = derive_stream_seed(SeedContext(cfg.seed, "synthetic", "labels", sample_id))
    h, w = cfg.height, cfg.width
    inner_h, inner_w = h - 2, w - 2
    n_sites = 2 * cfg.class_count
    if n_sites > inner_h * inner_w:
        raise ParameterError(
            f"{cfg.class_count} classes need {n_sites} seed sites, "
            f"interior has only {inner_h * inner_w} pixels")
    flat = shuffle_prefix(inner_h * inner_w, n_sites, seed)
    sy = flat // inner_w + 1
    sx = flat % inner_w + 1
    yy, xx = np.mgrid[0:h, 0:w]
    # (sites, H, W) squared distances in int64; nearest site wins, ties to
    # the lower site index.
    d2 = (yy[None] - sy[:, None, None]) ** 2 + (xx[None] - sx[:, None, None]) ** 2
    nearest = np.argmin(d2, axis=0)
    labels = (nearest % cfg.class_count).astype(np.uint16)
    labels[0, :] = cfg.ignore_index
    labels[-1, :] = cfg.ignore_index
    labels[:, 0] = cfg.ignore_index
    labels[:, -1] = cfg.ignore_index
    return labels


def generate_synthetic(cfg: SyntheticConfig, out_dir: Path | str) -> Manifest:
    """Write a self-verifying synthetic dataset and return its manifest.

    Labels are Voronoi partitions of seeded random interior sites (every
    class appears in every sample); each modality tensor encodes the label
    map per :func:`encode_labels`, so a decoder can recover labels exactly
    from any single intact modality.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(exist_ok=True)
    for profile in cfg.modalities:
        (out_dir / profile.name).mkdir(exist_ok=True)
    id_width = max(4, len(str(cfg.n_samples)))
    digits = max(2, len(str(cfg.class_count - 1)))
    classes = tuple(f"class_{i:0{digits}d}" for i in range(cfg.class_count))
    samples = []
    for i in range(cfg.n_samples):
        sample_id = f"{i + 1:0{id_width}d}"
        labels = _voronoi_labels(cfg, sample_id)
        label_rel = f"labels/{sample_id}.png"
        write_label(LabelMap(labels, ignore_index=cfg.ignore_index), out_dir / label_rel)
        inputs = {}
        for j, profile in enumerate(cfg.modalities):
            tensor = encode_labels(labels, profile, j, cfg.class_count, cfg.ignore_index)
            rel = f"{profile.name}/{sample_id}{tensor_suffix(tensor.data.dtype, profile.channels)}"
            write_tensor(tensor, out_dir / rel)
            inputs[profile.name] = rel
        samples.append(Sample(id=sample_id, inputs=inputs, label=label_rel))
    manifest = Manifest(version=MANIFEST_VERSION, modalities=cfg.modalities,
                        classes=classes, ignore_index=cfg.ignore_index,
                        samples=tuple(samples), root=out_dir)
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest
