"""File-format conformance of the adapter's standalone codecs.

The adapter reimplements the exchange formats instead of importing the
benchmark package. These tests cross-check its readers and writers against
files the benchmark writes (and against hand-crafted bytes) so the two
sides stay interoperable, and they pin the adapter's independence from the
benchmark package.
"""

import json
import math
import re
import struct
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

import mmrb
import mmrb_adapter
from mmrb_adapter import (FormatError, ManifestError, parse_manifest,
                          read_tensor, write_label_png)


def test_package_imports_only_numpy_and_pillow():
    # The library half must stay usable where the benchmark is not installed.
    pkg_dir = Path(mmrb_adapter.__file__).parent
    benchmark_import = re.compile(r"^\s*(?:import|from)\s+mmrb(?![_0-9A-Za-z])", re.M)
    for src in sorted(pkg_dir.glob("*.py")):
        assert not benchmark_import.search(src.read_text(encoding="utf-8")), src.name


# ---------------------------------------------------------------------------
# tensors

def test_reads_mmtb_files_written_by_the_benchmark(tmp_path):
    cases = {
        "bytes.mmtb": np.arange(60, dtype=np.uint8).reshape(3, 4, 5),
        "depth.mmtb": np.arange(40, dtype=np.uint16).reshape(1, 5, 8) * 801,
        "flow.mmtb": np.linspace(-1.0, 1.0, 48, dtype=np.float32).reshape(2, 4, 6),
    }
    for name, arr in cases.items():
        mmrb.write_tensor(mmrb.TensorBuffer(arr), tmp_path / name)
        out = read_tensor(tmp_path / name)
        assert out.dtype == arr.dtype and np.array_equal(out, arr), name


def mmtb_blob(dtype_code=1, dims=(1, 2, 2), payload=None, *,
              magic=b"MMTB", version=1, ndim=None):
    ndim = len(dims) if ndim is None else ndim
    blob = magic + bytes([version, dtype_code, ndim])
    blob += struct.pack(f"<{len(dims)}I", *dims)
    if payload is None:
        itemsize = {0: 1, 1: 2, 2: 4}.get(dtype_code, 1)
        payload = bytes(itemsize * math.prod(dims))
    return blob + payload


def test_reads_crafted_mmtb_bytes(tmp_path):
    payload = np.array([10, 2000, 0, 65535], dtype="<u2").tobytes()
    path = tmp_path / "t.mmtb"
    path.write_bytes(mmtb_blob(dtype_code=1, dims=(1, 2, 2), payload=payload))
    out = read_tensor(path)
    assert out.dtype == np.uint16
    assert out.tolist() == [[[10, 2000], [0, 65535]]]


@pytest.mark.parametrize("blob, match", [
    (b"MMTB\x01", "truncated MMTB header"),
    (mmtb_blob(magic=b"XXTB"), "bad magic"),
    (mmtb_blob(version=2), "unsupported MMTB version"),
    (mmtb_blob(dtype_code=3), "unsupported dtype code"),
    (mmtb_blob(ndim=0), "ndim 0 outside"),
    (mmtb_blob(ndim=5), "ndim 5 outside"),
    (mmtb_blob(dims=(1, 2), ndim=3, payload=b""), "truncated MMTB dims"),
    (mmtb_blob(payload=b"\x00" * 7), "payload is 7 bytes, expected 8"),
    (mmtb_blob(payload=b"\x00" * 9), "payload is 9 bytes, expected 8"),
    (mmtb_blob(dims=(1, 0, 2), payload=b""), "dimension overflow"),
    (mmtb_blob(dims=(2, 2)), "must be 3-d"),
    (mmtb_blob(dims=(1, 1, 2, 2)), "must be 3-d"),
], ids=["truncated-header", "magic", "version", "dtype", "ndim-0", "ndim-5",
        "truncated-dims", "short-payload", "long-payload", "zero-dim",
        "2-d", "4-d"])
def test_rejects_malformed_mmtb(tmp_path, blob, match):
    path = tmp_path / "bad.mmtb"
    path.write_bytes(blob)
    with pytest.raises(FormatError, match=match):
        read_tensor(path)


def test_reads_png_tensors_like_the_benchmark(tmp_path):
    cases = {
        "gray.png": np.arange(35, dtype=np.uint8).reshape(1, 5, 7),
        "rgb.png": np.arange(105, dtype=np.uint8).reshape(3, 5, 7),
        "deep.png": (np.arange(35, dtype=np.uint16) * 1801).reshape(1, 5, 7),
    }
    for name, arr in cases.items():
        mmrb.write_tensor(mmrb.TensorBuffer(arr), tmp_path / name)
        out = read_tensor(tmp_path / name)
        assert np.array_equal(out, mmrb.read_tensor(tmp_path / name).data), name
        assert out.dtype == arr.dtype and np.array_equal(out, arr), name


def test_rejects_unsupported_png_mode_and_unknown_suffix(tmp_path):
    rgba = tmp_path / "t.png"
    Image.new("RGBA", (4, 4)).save(rgba)
    with pytest.raises(FormatError, match="unsupported PNG mode"):
        read_tensor(rgba)
    with pytest.raises(FormatError, match="unknown tensor format"):
        read_tensor(tmp_path / "t.npy")


# ---------------------------------------------------------------------------
# label maps

def test_label_png_is_eight_bit_when_ids_fit_a_byte(tmp_path):
    labels = np.arange(48, dtype=np.uint16).reshape(6, 8) % 5
    labels[0, :] = 255
    path = tmp_path / "label.png"
    write_label_png(labels, path)
    with Image.open(path) as img:
        assert img.mode == "L"
    assert np.array_equal(mmrb.read_label(path).data, labels)


def test_label_png_is_sixteen_bit_for_wide_ids(tmp_path):
    labels = np.arange(48, dtype=np.int64).reshape(6, 8) % 260
    labels[-1, :] = 300
    path = tmp_path / "label.png"
    write_label_png(labels, path)
    with Image.open(path) as img:
        assert img.mode in ("I;16", "I")
    assert np.array_equal(mmrb.read_label(path, ignore_index=300).data, labels)


@pytest.mark.parametrize("labels, match", [
    (np.zeros((4, 4), dtype=np.float32), "2-d integer"),
    (np.zeros(16, dtype=np.uint8), "2-d integer"),
    (np.zeros((0, 4), dtype=np.uint8), "empty"),
    (np.full((4, 4), -1, dtype=np.int32), "do not fit u16"),
    (np.full((4, 4), 1 << 16, dtype=np.int64), "do not fit u16"),
], ids=["float", "1-d", "empty", "negative", "overflow"])
def test_rejects_unwritable_label_maps(tmp_path, labels, match):
    with pytest.raises(FormatError, match=match):
        write_label_png(labels, tmp_path / "label.png")


# ---------------------------------------------------------------------------
# manifests

def make_doc():
    return {
        "version": 1,
        "modalities": [
            {"name": "rgb", "letter": "R", "channels": 3,
             "value_min": 0, "value_max": 255, "gaussian_eligible": True},
            {"name": "depth", "letter": "D", "channels": 1,
             "value_min": 0, "value_max": 65535, "gaussian_eligible": True},
        ],
        "classes": ["road", "sky", "car"],
        "ignore_index": 255,
        "samples": [
            {"id": "0001", "inputs": {"rgb": "rgb/0001.png", "depth": "depth/0001.png"}},
            {"id": "0002", "inputs": {"rgb": "rgb/0002.png", "depth": "depth/0002.png"}},
        ],
    }


def write_doc(tmp_path, doc):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def test_parses_the_fields_serving_depends_on(tmp_path):
    manifest = parse_manifest(write_doc(tmp_path, make_doc()))
    assert manifest.modality_names == ("rgb", "depth")
    assert [m.channels for m in manifest.modalities] == [3, 1]
    assert manifest.modalities[1].value_max == 65535.0
    assert manifest.classes == ("road", "sky", "car")
    assert manifest.class_count == 3
    assert manifest.ignore_index == 255
    assert [s.id for s in manifest.samples] == ["0001", "0002"]
    assert manifest.resolve("rgb/0001.png") == tmp_path / "rgb" / "0001.png"


def test_ground_truth_label_entries_are_dropped(tmp_path):
    doc = make_doc()
    for s in doc["samples"]:
        s["label"] = f"labels/{s['id']}.png"
    manifest = parse_manifest(write_doc(tmp_path, doc))
    assert all(not hasattr(s, "label") for s in manifest.samples)


def put_version(doc, v):
    doc["version"] = v


def drop_field(key):
    def mutate(doc):
        del doc[key]
    return mutate


def bad_channels(doc):
    doc["modalities"][0]["channels"] = "three"


def bad_value_min(doc):
    doc["modalities"][0]["value_min"] = True


def empty_range(doc):
    doc["modalities"][0]["value_max"] = doc["modalities"][0]["value_min"]


def one_class(doc):
    doc["classes"] = ["road"]


def mixed_classes(doc):
    doc["classes"] = ["road", 3]


def colliding_ignore(doc):
    doc["ignore_index"] = 2


def missing_input(doc):
    del doc["samples"][1]["inputs"]["depth"]


def duplicate_ids(doc):
    doc["samples"][1]["id"] = "0001"


def numeric_input(doc):
    doc["samples"][0]["inputs"]["rgb"] = 7


def empty_id(doc):
    doc["samples"][0]["id"] = ""


@pytest.mark.parametrize("mutate, match", [
    (lambda d: put_version(d, 2), "unsupported manifest version 2"),
    (drop_field("version"), "missing field 'version'"),
    (drop_field("modalities"), "missing field 'modalities'"),
    (lambda d: d.update(modalities={}), "expected list"),
    (bad_channels, "channels: expected int"),
    (bad_value_min, "value_min: expected a number"),
    (empty_range, "empty value range"),
    (one_class, "at least 2 classes"),
    (mixed_classes, "list of strings"),
    (colliding_ignore, "ignore_index 2"),
    (drop_field("samples"), "missing field 'samples'"),
    (missing_input, r"inputs missing \['depth'\]"),
    (duplicate_ids, "duplicate sample id '0001'"),
    (numeric_input, "string-to-string"),
    (empty_id, "sample id must be non-empty"),
], ids=["version-2", "no-version", "no-modalities", "modalities-type",
        "channels-type", "value-min-bool", "empty-range", "one-class",
        "mixed-classes", "ignore-collision", "no-samples", "missing-input",
        "duplicate-ids", "numeric-input", "empty-id"])
def test_rejects_malformed_manifests(tmp_path, mutate, match):
    doc = make_doc()
    mutate(doc)
    with pytest.raises(ManifestError, match=match):
        parse_manifest(write_doc(tmp_path, doc))


def test_rejects_non_json_and_absent_manifests(tmp_path):
    scribble = tmp_path / "manifest.json"
    scribble.write_text("not json", encoding="utf-8")
    with pytest.raises(ManifestError, match="not valid JSON"):
        parse_manifest(scribble)
    scribble.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ManifestError, match="must be a JSON object"):
        parse_manifest(scribble)
    with pytest.raises(ManifestError, match="cannot read manifest"):
        parse_manifest(tmp_path / "nowhere.json")
