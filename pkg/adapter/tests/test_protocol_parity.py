"""Acceptance gate: external-adapter runs are interchangeable with builtin ones.

A8 passes when a full entire-modality-zeroing benchmark served by the
adapter command reproduces the builtin ground-truth predictor's report to
1e-9 before any rounding, when an adapter that dies on one sample aborts
the run with both the scenario id and the failing sample id in the error,
and when none of the manifests handed to the adapter reference ground-truth
labels. The runs below drive the real harness entry point with the real
subprocess protocol; nothing is stubbed.
"""

import json
import shlex
import sys

import pytest

from mmrb import (BenchmarkConfig, PredictorError, PredictorRef,
                  SyntheticConfig, generate_synthetic, run_benchmark)
from mmrb.report import report_to_doc

TOL = 1e-9
PY = shlex.quote(sys.executable)

DIES_ON_0002 = """\
import sys

from mmrb_adapter import parse_manifest, serve_batch, synthetic_inverse

args = dict(zip(sys.argv[1::2], sys.argv[2::2]))
manifest = parse_manifest(args["--manifest"])
inner = synthetic_inverse(manifest)
order = [s.id for s in manifest.samples]
calls = []


def predict(inputs):
    calls.append(None)
    if order[len(calls) - 1] == "0002":
        raise RuntimeError("injected failure")
    return inner(inputs)


raise SystemExit(serve_batch(manifest, args["--output"], predict))
"""


def check(problems, ok, detail):
    if not ok:
        problems.append(detail)


def finish(tag, problems):
    print(f"{tag}: {'PASS' if not problems else 'FAIL'}")
    assert not problems, f"{tag}: " + "; ".join(str(p) for p in problems[:10])


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("parity-data")
    cfg = SyntheticConfig(n_samples=3, height=32, width=32, class_count=5, seed=11)
    generate_synthetic(cfg, root)
    return root


def emm_only_config(dataset_root, work_dir, predictor, keep=False):
    return BenchmarkConfig(manifest=dataset_root / "manifest.json", emm=True,
                           rmm_r=(), nm_levels=(), global_seed=0,
                           predictor=predictor, work_dir=work_dir,
                           parallelism=1, keep_artifacts=keep)


def numeric_diffs(a, b, path="report"):
    """Structural comparison with a numeric tolerance; run_id may differ."""
    problems = []
    number = (int, float)
    if isinstance(a, dict) and isinstance(b, dict):
        if sorted(a) != sorted(b):
            problems.append(f"{path}: keys {sorted(a)} vs {sorted(b)}")
            return problems
        for k in a:
            if k == "run_id":
                continue
            problems += numeric_diffs(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            problems.append(f"{path}: length {len(a)} vs {len(b)}")
            return problems
        for i, (x, y) in enumerate(zip(a, b)):
            problems += numeric_diffs(x, y, f"{path}[{i}]")
    elif (isinstance(a, number) and not isinstance(a, bool)
          and isinstance(b, number) and not isinstance(b, bool)):
        if abs(a - b) > TOL:
            problems.append(f"{path}: {a} vs {b}")
    elif a != b:
        problems.append(f"{path}: {a!r} vs {b!r}")
    return problems


def test_a8_external_adapter_matches_builtin_and_fails_loudly(dataset, tmp_path,
                                                              capsys):
    problems = []

    builtin_report = run_benchmark(emm_only_config(
        dataset, tmp_path / "builtin", PredictorRef(builtin="ground_truth")))
    adapter_report = run_benchmark(emm_only_config(
        dataset, tmp_path / "adapter", PredictorRef(command=f"{PY} -m mmrb_adapter"),
        keep=True))

    check(problems, builtin_report.emm is not None
          and len(builtin_report.emm.combinations) == 15,
          "builtin run did not produce the full zeroing grid")
    problems += numeric_diffs(report_to_doc(builtin_report),
                              report_to_doc(adapter_report))

    script = tmp_path / "dies_on_0002.py"
    script.write_text(DIES_ON_0002, encoding="utf-8")
    crashing = PredictorRef(command=f"{PY} {shlex.quote(str(script))}")
    try:
        run_benchmark(emm_only_config(dataset, tmp_path / "crash", crashing))
        check(problems, False, "crashing adapter did not abort the run")
    except PredictorError as exc:
        check(problems, exc.scenario == "emm-RDEL",
              f"aborting scenario was {exc.scenario!r}, want 'emm-RDEL'")
        check(problems, "0002" in str(exc),
              f"failing sample id not in the error: {exc}")

    handed_over = sorted((tmp_path / "adapter").rglob("predictor_manifest.json"))
    check(problems, len(handed_over) == 15,
          f"kept artifacts hold {len(handed_over)} predictor manifests, want 15")
    for path in handed_over:
        doc = json.loads(path.read_text(encoding="utf-8"))
        if any("label" in s for s in doc["samples"]):
            problems.append(f"{path}: ground-truth label leaked to the predictor")
            break

    capsys.readouterr()
    with capsys.disabled():
        finish("A8", problems)
