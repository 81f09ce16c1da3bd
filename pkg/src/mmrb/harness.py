"""Benchmark orchestration: materialize scenarios, predict, score, aggregate.

A run walks every scenario of the configured regimes, writes the corrupted
dataset copy under ``work_dir/<run_id>/<scenario_id>/data/``, obtains one
label map per sample from the configured predictor, scores against ground
truth, and finally aggregates the per-combination mIoUs into a report.

Seeding is keyed per (scenario, modality, sample), and confusion merging is
commutative, so reports are independent of worker count and scheduling. A
failed scenario aborts the whole run: imputing a silent zero would corrupt
the aggregates.
"""

from __future__ import annotations

import hashlib
import json
import os
import shlex
import shutil
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .aggregation import MetricRecord, RobustnessReport, build_report
from .corruption import (TensorBuffer, apply_nm, corruption_severity,
                         validate_range, zero_full, zero_random)
from .dataset import (Manifest, Sample, manifest_to_doc, parse_manifest,
                      read_label, read_tensor, write_label, write_manifest,
                      write_tensor)
from .errors import (ManifestError, ParameterError, PredictorError,
                     ScenarioError)
from .metrics import (ConfusionMatrix, LabelMap, accumulate_confusion,
                      mean_iou, merge_confusion)
from .modality import (KIND_EMM, KIND_NM, KIND_RMM, ModalityProfile,
                       ModalitySubset, NoiseLevel, NoiseParams, ScenarioSpec,
                       combination_label, enumerate_corrupted_subsets)
from .report import write_report
from .rng import SeedContext, derive_stream_seed, uniforms

BUILTIN_PREDICTORS = ("ground_truth", "constant", "degraded_oracle")

# Severity grid for the noisy-modality regime: density of the impulse stage
# and sigma of the Gaussian stage, mu fixed at 0.
NM_LEVELS: dict[str, NoiseLevel] = {
    "low": NoiseLevel("low", NoiseParams(density=0.05, sigma=0.1, mu=0.0)),
    "mid": NoiseLevel("mid", NoiseParams(density=0.1, sigma=0.2, mu=0.0)),
    "high": NoiseLevel("high", NoiseParams(density=0.2, sigma=0.5, mu=0.0)),
}

DEFAULT_P_GRID = (0.2, 0.1, 0.05)
DEFAULT_RMM_R = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class PredictorRef:
    """Either a built-in in-process predictor or an external command.

    External commands receive ``--manifest <path> --output <dir>`` (or have
    ``{manifest}``/``{output}`` placeholders substituted) and must write one
    ``<sample_id>.png`` or ``.mmtb`` label file per sample, then exit 0.
    """

    builtin: str | None = None
    command: str | None = None
    params: Mapping[str, object] = field(default_factory=dict)
    timeout: float = 600.0

    def __post_init__(self) -> None:
        if (self.builtin is None) == (self.command is None):
            raise ParameterError("predictor needs exactly one of builtin or command")
        if self.builtin is not None and self.builtin not in BUILTIN_PREDICTORS:
            raise ParameterError(
                f"unknown builtin predictor {self.builtin!r}, want one of {BUILTIN_PREDICTORS}")
        if self.timeout <= 0:
            raise ParameterError(f"timeout must be positive, got {self.timeout}")
        object.__setattr__(self, "params", dict(self.params))
        if self.builtin == "constant":
            class_id = self.params.get("class_id", 0)
            if not isinstance(class_id, int) or class_id < 0:
                raise ParameterError(f"constant predictor needs class_id >= 0, got {class_id}")
        if self.builtin == "degraded_oracle":
            alpha = self.params.get("alpha", 0.8)
            if not isinstance(alpha, (int, float)) or not 0.0 <= float(alpha) <= 1.0:
                raise ParameterError(f"degraded_oracle needs alpha in [0, 1], got {alpha}")


def _default_predictor() -> PredictorRef:
    return PredictorRef(builtin="ground_truth")


def _default_nm_levels() -> tuple[NoiseLevel, ...]:
    return tuple(NM_LEVELS.values())


@dataclass(frozen=True)
class BenchmarkConfig:
    """Everything a benchmark run depends on; defaults mirror the full grid."""

    manifest: Path
    emm: bool = True
    rmm_r: tuple[float, ...] = DEFAULT_RMM_R
    nm_levels: tuple[NoiseLevel, ...] = field(default_factory=_default_nm_levels)
    p_grid: tuple[float, ...] = DEFAULT_P_GRID
    global_seed: int = 0
    predictor: PredictorRef = field(default_factory=_default_predictor)
    work_dir: Path = Path("runs")
    parallelism: int = 1
    keep_artifacts: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "manifest", Path(self.manifest))
        object.__setattr__(self, "work_dir", Path(self.work_dir))
        object.__setattr__(self, "rmm_r", tuple(float(r) for r in self.rmm_r))
        object.__setattr__(self, "nm_levels", tuple(self.nm_levels))
        object.__setattr__(self, "p_grid", tuple(float(p) for p in self.p_grid))
        for p in self.p_grid:
            if not 0.0 <= p < 1.0:
                raise ParameterError(f"p values must be in [0, 1), got {p}")
        for r in self.rmm_r:
            if not 0.0 <= r <= 1.0:
                raise ParameterError(f"r values must be in [0, 1], got {r}")
        if len(set(self.rmm_r)) != len(self.rmm_r):
            raise ParameterError(f"duplicate r values {self.rmm_r}")
        names = [l.name for l in self.nm_levels]
        if len(set(names)) != len(names):
            raise ParameterError(f"duplicate noise level names {names}")
        if self.parallelism < 1:
            raise ParameterError(f"parallelism must be >= 1, got {self.parallelism}")
        if not 0 <= self.global_seed < (1 << 64):
            raise ParameterError(f"global_seed must be a 64-bit unsigned int, got {self.global_seed}")


# ---------------------------------------------------------------------------
# scenario construction

def emm_scenarios(profiles: Sequence[ModalityProfile]) -> list[ScenarioSpec]:
    """One scenario per modality combination, the clean one included."""
    specs = []
    for corrupted in enumerate_corrupted_subsets(profiles):
        label = combination_label(corrupted.complement(), profiles)
        specs.append(ScenarioSpec(id=f"emm-{label}", kind=KIND_EMM, corrupted=corrupted))
    return specs


def rmm_scenarios(profiles: Sequence[ModalityProfile], r: float) -> list[ScenarioSpec]:
    specs = []
    for corrupted in enumerate_corrupted_subsets(profiles):
        label = combination_label(corrupted.complement(), profiles)
        specs.append(ScenarioSpec(id=f"rmm-r{r:g}-{label}", kind=KIND_RMM,
                                  corrupted=corrupted, r=r))
    return specs


def nm_scenario(profiles: Sequence[ModalityProfile], level: NoiseLevel) -> ScenarioSpec:
    """Noise over the full modality combination at one severity level."""
    universe = tuple(p.name for p in profiles)
    return ScenarioSpec(id=f"nm-{level.name}", kind=KIND_NM,
                        corrupted=ModalitySubset(universe, universe),
                        noise=level.params)


# ---------------------------------------------------------------------------
# materialization

def _corrupt_tensor(t: TensorBuffer, profile: ModalityProfile, spec: ScenarioSpec,
                    ctx: SeedContext) -> TensorBuffer | None:
    """Corrupted tensor per the scenario, or None when the modality is untouched."""
    if spec.kind == KIND_EMM:
        return zero_full(t) if profile.name in spec.corrupted else None
    if spec.kind == KIND_RMM:
        if profile.name not in spec.corrupted:
            return None
        return zero_random(t, float(spec.r), derive_stream_seed(ctx))
    assert spec.kind == KIND_NM
    if profile.name not in spec.corrupted:
        return None
    assert spec.noise is not None
    return apply_nm(t, profile, spec.noise, ctx)


def materialize_scenario(dataset: Manifest, spec: ScenarioSpec, global_seed: int,
                         out_dir: Path | str) -> Manifest:
    """Write the corrupted copy of a dataset for one scenario.

    Untouched modalities and labels are copied byte-for-byte. A clean
    scenario only writes a manifest whose paths point back into the source
    dataset.
    """
    if tuple(spec.corrupted.universe) != dataset.modality_names:
        raise ScenarioError(
            f"scenario {spec.id!r} is over modalities {spec.corrupted.universe}, "
            f"dataset has {dataset.modality_names}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if len(spec.corrupted) == 0 and spec.kind != KIND_NM:
        samples = []
        for s in dataset.samples:
            inputs = {name: os.path.relpath(dataset.resolve(rel).resolve(), out_dir.resolve())
                      for name, rel in s.inputs.items()}
            label = None
            if s.label is not None:
                label = os.path.relpath(dataset.resolve(s.label).resolve(), out_dir.resolve())
            samples.append(Sample(id=s.id, inputs=inputs, label=label))
        manifest = Manifest(version=dataset.version, modalities=dataset.modalities,
                            classes=dataset.classes, ignore_index=dataset.ignore_index,
                            samples=tuple(samples), root=out_dir)
        write_manifest(manifest, out_dir / "manifest.json")
        return manifest

    for profile in dataset.modalities:
        (out_dir / profile.name).mkdir(exist_ok=True)
    if any(s.label is not None for s in dataset.samples):
        (out_dir / "labels").mkdir(exist_ok=True)
    samples = []
    zero_ok = spec.kind in (KIND_EMM, KIND_RMM)
    for s in dataset.samples:
        inputs = {}
        for j, profile in enumerate(dataset.modalities):
            src = dataset.resolve(s.inputs[profile.name])
            rel = f"{profile.name}/{s.id}{src.suffix}"
            ctx = SeedContext(global_seed, spec.id, profile.name, s.id)
            tensor = read_tensor(src)
            validate_range(tensor, profile)
            corrupted = _corrupt_tensor(tensor, profile, spec, ctx)
            if corrupted is None:
                shutil.copyfile(src, out_dir / rel)
            else:
                validate_range(corrupted, profile, zero_ok=zero_ok)
                write_tensor(corrupted, out_dir / rel)
            inputs[profile.name] = rel
        label = None
        if s.label is not None:
            src = dataset.resolve(s.label)
            label = f"labels/{s.id}{src.suffix}"
            shutil.copyfile(src, out_dir / label)
        samples.append(Sample(id=s.id, inputs=inputs, label=label))
    manifest = Manifest(version=dataset.version, modalities=dataset.modalities,
                        classes=dataset.classes, ignore_index=dataset.ignore_index,
                        samples=tuple(samples), root=out_dir)
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# predictors

def predict_degraded_oracle(sample: LabelMap, spec: ScenarioSpec, alpha: float,
                            seed: int, *, profiles: Sequence[ModalityProfile],
                            class_count: int) -> LabelMap:
    """Ground truth with a severity-proportional fraction of labels flipped.

    Each non-ignore pixel is replaced, with probability alpha * mean
    corruption severity, by a uniformly random different class.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must be in [0, 1], got {alpha}")
    if class_count < 2:
        raise ParameterError(f"need at least 2 classes, got {class_count}")
    severities = [corruption_severity(spec, p) for p in profiles]
    q = alpha * (sum(severities) / len(severities))
    if q == 0.0:
        return LabelMap(sample.data.copy(), ignore_index=sample.ignore_index)
    h, w = sample.shape
    u = uniforms(2 * h * w, seed)
    flip = u[:h * w].reshape(h, w) < q
    shift = 1 + np.floor(u[h * w:].reshape(h, w) * (class_count - 1)).astype(np.int64)
    gt = sample.data.astype(np.int64)
    scored = sample.data != sample.ignore_index
    flipped = (gt + shift) % class_count
    out = np.where(flip & scored, flipped, gt).astype(np.uint16)
    return LabelMap(out, ignore_index=sample.ignore_index)


def _builtin_predictions(ref: PredictorRef, manifest: Manifest, *,
                         spec: ScenarioSpec | None, global_seed: int,
                         scenario_id: str) -> dict[str, LabelMap]:
    preds: dict[str, LabelMap] = {}
    for s in manifest.samples:
        if s.label is None:
            raise PredictorError("builtin predictors need ground-truth labels",
                                 scenario=scenario_id, sample=s.id)
        gt = read_label(manifest.resolve(s.label), manifest.ignore_index)
        if ref.builtin == "ground_truth":
            preds[s.id] = gt
        elif ref.builtin == "constant":
            class_id = int(ref.params.get("class_id", 0))  # type: ignore[arg-type]
            if class_id >= manifest.class_count:
                raise PredictorError(
                    f"constant class_id {class_id} out of range for "
                    f"{manifest.class_count} classes", scenario=scenario_id)
            preds[s.id] = LabelMap(np.full(gt.shape, class_id, dtype=np.uint16),
                                   ignore_index=manifest.ignore_index)
        else:
            assert ref.builtin == "degraded_oracle"
            if spec is None:
                raise PredictorError("degraded_oracle needs the scenario spec",
                                     scenario=scenario_id)
            alpha = float(ref.params.get("alpha", 0.8))  # type: ignore[arg-type]
            seed = derive_stream_seed(
                SeedContext(global_seed, spec.id + "/oracle", "labels", s.id))
            preds[s.id] = predict_degraded_oracle(
                gt, spec, alpha, seed, profiles=manifest.modalities,
                class_count=manifest.class_count)
    return preds


def _external_predictions(ref: PredictorRef, manifest: Manifest, out_dir: Path,
                          scenario_id: str) -> dict[str, LabelMap]:
    stripped_path = manifest.root / "predictor_manifest.json"
    write_manifest(manifest.without_labels(), stripped_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    template = str(ref.command)
    argv = shlex.split(template)
    if "{manifest}" in template or "{output}" in template:
        argv = [a.format(manifest=str(stripped_path.resolve()),
                         output=str(out_dir.resolve())) for a in argv]
    else:
        argv += ["--manifest", str(stripped_path.resolve()),
                 "--output", str(out_dir.resolve())]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=ref.timeout)
    except subprocess.TimeoutExpired as exc:
        raise PredictorError(f"predictor timed out after {ref.timeout}s: {argv[0]}",
                             scenario=scenario_id) from exc
    except OSError as exc:
        raise PredictorError(f"cannot launch predictor {argv[0]!r}: {exc}",
                             scenario=scenario_id) from exc
    if proc.returncode != 0:
        tail = proc.stderr.strip().splitlines()[-5:]
        raise PredictorError(
            f"predictor failed on manifest {stripped_path}: " + (" | ".join(tail) or "no stderr"),
            scenario=scenario_id, exit_status=proc.returncode)
    preds: dict[str, LabelMap] = {}
    for s in manifest.samples:
        candidates = [out_dir / f"{s.id}.png", out_dir / f"{s.id}.mmtb"]
        path = next((c for c in candidates if c.is_file()), None)
        if path is None:
            raise PredictorError(f"predictor wrote no label file in {out_dir}",
                                 scenario=scenario_id, sample=s.id)
        preds[s.id] = read_label(path, manifest.ignore_index)
    return preds


def invoke_predictor(ref: PredictorRef, manifest: Manifest, out_dir: Path | str,
                     *, spec: ScenarioSpec | None = None, global_seed: int = 0,
                     write_files: bool = False) -> dict[str, LabelMap]:
    """Obtain one label map per sample, keyed by sample id."""
    out_dir = Path(out_dir)
    scenario_id = spec.id if spec is not None else "(no scenario)"
    if ref.command is not None:
        return _external_predictions(ref, manifest, out_dir, scenario_id)
    preds = _builtin_predictions(ref, manifest, spec=spec, global_seed=global_seed,
                                 scenario_id=scenario_id)
    if write_files:
        out_dir.mkdir(parents=True, exist_ok=True)
        for sample_id, label in preds.items():
            write_label(label, out_dir / f"{sample_id}.png")
    return preds


# ---------------------------------------------------------------------------
# the run

def _score(manifest: Manifest, preds: Mapping[str, LabelMap]) -> ConfusionMatrix:
    cm = ConfusionMatrix.zero(manifest.class_count)
    for s in manifest.samples:
        if s.label is None:
            raise ScenarioError(f"sample {s.id!r} has no ground-truth label")
        gt = read_label(manifest.resolve(s.label), manifest.ignore_index)
        cm = merge_confusion(cm, accumulate_confusion(preds[s.id], gt, manifest.class_count))
    return cm


def _spec_doc(spec: ScenarioSpec, profiles: Sequence[ModalityProfile]) -> dict:
    doc: dict = {
        "scenario": spec.id,
        "kind": spec.kind,
        "corrupted": list(spec.corrupted.members),
        "intact_label": (combination_label(spec.corrupted.complement(), profiles)
                         if len(spec.corrupted) < len(spec.corrupted.universe) else None),
    }
    if spec.r is not None:
        doc["r"] = spec.r
    if spec.noise is not None:
        doc["noise"] = {"density": spec.noise.density, "sigma": spec.noise.sigma,
                        "mu": spec.noise.mu}
    return doc


def run_scenario(dataset: Manifest, spec: ScenarioSpec, cfg: BenchmarkConfig,
                 scenario_dir: Path) -> tuple[float, ConfusionMatrix]:
    """Materialize, predict, and score one scenario; writes record.json."""
    data_dir = scenario_dir / "data"
    pred_dir = scenario_dir / "predictions"
    for stale in (data_dir, pred_dir):
        if stale.exists():
            shutil.rmtree(stale)
    scenario_dir.mkdir(parents=True, exist_ok=True)
    corrupted = materialize_scenario(dataset, spec, cfg.global_seed, data_dir)
    preds = invoke_predictor(cfg.predictor, corrupted, pred_dir, spec=spec,
                             global_seed=cfg.global_seed,
                             write_files=cfg.keep_artifacts)
    cm = _score(corrupted, preds)
    miou = mean_iou(cm)
    record = _spec_doc(spec, dataset.modalities)
    record["samples"] = len(dataset.samples)
    record["miou"] = miou
    (scenario_dir / "record.json").write_text(
        json.dumps(record, indent=2) + "\n", encoding="utf-8")
    if not cfg.keep_artifacts:
        shutil.rmtree(data_dir, ignore_errors=True)
        shutil.rmtree(pred_dir, ignore_errors=True)
    return miou, cm


def compute_run_id(cfg: BenchmarkConfig) -> str:
    """Digest of the semantically relevant config fields.

    work_dir, parallelism, and keep_artifacts do not influence results and
    are excluded, so reruns at different worker counts land on the same id.
    """
    doc = {
        "manifest": str(Path(cfg.manifest).resolve()),
        "emm": cfg.emm,
        "rmm_r": list(cfg.rmm_r),
        "nm_levels": [{"name": l.name, "density": l.params.density,
                       "sigma": l.params.sigma, "mu": l.params.mu}
                      for l in cfg.nm_levels],
        "p_grid": list(cfg.p_grid),
        "global_seed": cfg.global_seed,
        "predictor": {
            "builtin": cfg.predictor.builtin,
            "command": cfg.predictor.command,
            "params": {k: cfg.predictor.params[k] for k in sorted(cfg.predictor.params)},
        },
    }
    digest = hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()[:12]


def run_benchmark(cfg: BenchmarkConfig) -> RobustnessReport:
    """Execute the configured benchmark and persist its report.

    The report lands at ``work_dir/<run_id>/report.json``; per-scenario
    records live next to the (optionally kept) corrupted data.
    """
    dataset = parse_manifest(cfg.manifest, strict=True)
    for s in dataset.samples:
        if s.label is None:
            raise ManifestError(
                f"sample {s.id!r} has no label; a benchmark run needs ground truth")
    profiles = dataset.modalities

    tasks: list[tuple[str, float | None, NoiseLevel | None, ScenarioSpec]] = []
    if cfg.emm:
        tasks += [(KIND_EMM, None, None, s) for s in emm_scenarios(profiles)]
    for r in cfg.rmm_r:
        tasks += [(KIND_RMM, r, None, s) for s in rmm_scenarios(profiles, r)]
    for level in cfg.nm_levels:
        tasks.append((KIND_NM, None, level, nm_scenario(profiles, level)))

    run_id = compute_run_id(cfg)
    run_dir = cfg.work_dir / run_id
    run_dir.mkdir(parents=True, exist_ok=True)

    def one(task) -> tuple[float, ConfusionMatrix]:
        spec = task[3]
        try:
            return run_scenario(dataset, spec, cfg, run_dir / spec.id)
        except PredictorError:
            raise
        except Exception as exc:
            raise ScenarioError(f"scenario {spec.id} failed: {exc}") from exc

    if cfg.parallelism == 1:
        results = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            futures = [pool.submit(one, t) for t in tasks]
            try:
                results = [f.result() for f in futures]
            except BaseException:
                for f in futures:
                    f.cancel()
                raise

    emm_entries: dict[ModalitySubset, float] = {}
    rmm_entries: dict[float, dict[ModalitySubset, float]] = {r: {} for r in cfg.rmm_r}
    nm_results: list[tuple[NoiseLevel, ConfusionMatrix]] = []
    for (kind, r, level, spec), (miou, cm) in zip(tasks, results):
        if kind == KIND_EMM:
            emm_entries[spec.corrupted] = miou
        elif kind == KIND_RMM:
            rmm_entries[r][spec.corrupted] = miou
        else:
            nm_results.append((level, cm))

    names = dataset.modality_names
    emm_record = None
    if cfg.emm:
        emm_record = MetricRecord(kind=KIND_EMM, entries=emm_entries, modalities=names)
    rmm_records = [(r, MetricRecord(kind=KIND_RMM, entries=rmm_entries[r], r=r,
                                    modalities=names))
                   for r in cfg.rmm_r]
    report = build_report(emm_record, rmm_records, nm_results, cfg.p_grid,
                          profiles=profiles, class_names=dataset.classes,
                          run_id=run_id, global_seed=cfg.global_seed)
    write_report(report, run_dir / "report.json")
    return report
