"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage or config-schema error.
The global seed resolves as flag > MMRB_SEED environment variable > config
file value > 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .aggregation import avg_miou, expected_miou, record_from_labels
from .dataset import SyntheticConfig, generate_synthetic, parse_manifest
from .errors import ConfigError, MmrbError
from .harness import (BenchmarkConfig, NM_LEVELS, PredictorRef,
                      materialize_scenario, run_benchmark)
from .modality import (KIND_EMM, KIND_NM, KIND_RMM, ModalitySubset,
                       NoiseLevel, NoiseParams, ScenarioSpec,
                       combination_label)
from .report import fmt2, read_report, summary_lines, write_csv_bundle

SEED_ENV = "MMRB_SEED"


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}")


def resolve_seed(flag: int | None, config: int | None = None) -> int:
    for value in (flag, _env_seed(), config):
        if value is not None:
            return value
    return 0


def _parse_p_grid(raw: str) -> tuple[float, ...]:
    try:
        grid = tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"--p-grid must be comma-separated numbers, got {raw!r}")
    if not grid:
        raise ConfigError("--p-grid must name at least one probability")
    for p in grid:
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"--p-grid: {p} not in [0, 1)")
    return grid


# ---------------------------------------------------------------------------
# run-config files

_PREDICTOR_KEYS = {"builtin", "command", "params", "timeout"}
_CONFIG_KEYS = {"manifest", "emm", "rmm_r", "nm_levels", "p_grid", "global_seed",
                "predictor", "work_dir", "parallelism", "keep_artifacts"}


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")


def _config_nm_levels(raw, where: str) -> tuple[NoiseLevel, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"{where}: expected a list of noise levels")
    levels = []
    for i, entry in enumerate(raw):
        if isinstance(entry, str):
            if entry not in NM_LEVELS:
                raise ConfigError(
                    f"{where}[{i}]: unknown level {entry!r}, want one of {sorted(NM_LEVELS)}")
            levels.append(NM_LEVELS[entry])
        elif isinstance(entry, dict):
            _reject_unknown(entry, {"name", "density", "sigma", "mu"}, f"{where}[{i}]")
            try:
                levels.append(NoiseLevel(
                    name=str(entry["name"]),
                    params=NoiseParams(density=float(entry["density"]),
                                       sigma=float(entry["sigma"]),
                                       mu=float(entry.get("mu", 0.0)))))
            except (KeyError, TypeError, ValueError, MmrbError) as exc:
                raise ConfigError(f"{where}[{i}]: {exc}") from exc
        else:
            raise ConfigError(f"{where}[{i}]: expected a level name or object")
    return tuple(levels)


def _config_predictor(raw, where: str) -> PredictorRef:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    _reject_unknown(raw, _PREDICTOR_KEYS, where)
    try:
        kwargs: dict = {}
        if "builtin" in raw:
            kwargs["builtin"] = str(raw["builtin"])
        if "command" in raw:
            kwargs["command"] = str(raw["command"])
        if "params" in raw:
            if not isinstance(raw["params"], dict):
                raise ConfigError(f"{where}.params: expected an object")
            kwargs["params"] = raw["params"]
        if "timeout" in raw:
            kwargs["timeout"] = float(raw["timeout"])
        return PredictorRef(**kwargs)
    except MmrbError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def load_run_config(path: Path, seed_flag: int | None = None) -> BenchmarkConfig:
    """Parse a run-config JSON file into a BenchmarkConfig.

    Relative manifest/work_dir paths resolve against the config file's
    directory. Unknown keys anywhere are schema errors.
    """
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    where = str(path)
    _reject_unknown(doc, _CONFIG_KEYS, where)
    if "manifest" not in doc or not isinstance(doc["manifest"], str):
        raise ConfigError(f"{where}: manifest: required string field")
    base = path.parent

    def _path(raw: str) -> Path:
        p = Path(raw)
        return p if p.is_absolute() else base / p

    kwargs: dict = {"manifest": _path(doc["manifest"])}
    if "emm" in doc:
        if not isinstance(doc["emm"], bool):
            raise ConfigError(f"{where}: emm: expected true/false")
        kwargs["emm"] = doc["emm"]
    if "rmm_r" in doc:
        raw_r = doc["rmm_r"]
        if not isinstance(raw_r, list):
            raise ConfigError(f"{where}: rmm_r: expected a list of fractions")
        rs = []
        for i, r in enumerate(raw_r):
            if not isinstance(r, (int, float)) or isinstance(r, bool) or not 0.0 <= r <= 1.0:
                raise ConfigError(f"{where}: rmm_r[{i}]: {r!r} not in [0, 1]")
            rs.append(float(r))
        kwargs["rmm_r"] = tuple(rs)
    if "nm_levels" in doc:
        kwargs["nm_levels"] = _config_nm_levels(doc["nm_levels"], f"{where}: nm_levels")
    if "p_grid" in doc:
        raw_p = doc["p_grid"]
        if not isinstance(raw_p, list):
            raise ConfigError(f"{where}: p_grid: expected a list of probabilities")
        ps = []
        for i, p in enumerate(raw_p):
            if not isinstance(p, (int, float)) or isinstance(p, bool) or not 0.0 <= p < 1.0:
                raise ConfigError(f"{where}: p_grid[{i}]: {p!r} not in [0, 1)")
            ps.append(float(p))
        kwargs["p_grid"] = tuple(ps)
    if "global_seed" in doc:
        if not isinstance(doc["global_seed"], int) or isinstance(doc["global_seed"], bool):
            raise ConfigError(f"{where}: global_seed: expected an integer")
    if "predictor" in doc:
        kwargs["predictor"] = _config_predictor(doc["predictor"], f"{where}: predictor")
    if "work_dir" in doc:
        if not isinstance(doc["work_dir"], str):
            raise ConfigError(f"{where}: work_dir: expected a string path")
        kwargs["work_dir"] = _path(doc["work_dir"])
    if "parallelism" in doc:
        if not isinstance(doc["parallelism"], int) or isinstance(doc["parallelism"], bool):
            raise ConfigError(f"{where}: parallelism: expected an integer")
        kwargs["parallelism"] = doc["parallelism"]
    if "keep_artifacts" in doc:
        if not isinstance(doc["keep_artifacts"], bool):
            raise ConfigError(f"{where}: keep_artifacts: expected true/false")
        kwargs["keep_artifacts"] = doc["keep_artifacts"]
    kwargs["global_seed"] = resolve_seed(seed_flag, doc.get("global_seed"))
    try:
        return BenchmarkConfig(**kwargs)
    except MmrbError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args: argparse.Namespace) -> int:
    cfg = SyntheticConfig(
        n_samples=args.samples, height=args.size, width=args.size,
        class_count=args.classes, seed=resolve_seed(args.seed))
    manifest = generate_synthetic(cfg, args.out)
    print(manifest.root / "manifest.json")
    return 0


def _parse_drop(raw: str, profiles) -> tuple[str, ...]:
    tokens = [tok.strip() for tok in raw.split(",") if tok.strip()]
    by_letter = {p.letter: p.name for p in profiles}
    by_name = {p.name for p in profiles}
    names = []
    for tok in tokens:
        if tok in by_letter:
            names.append(by_letter[tok])
        elif tok in by_name:
            names.append(tok)
        else:
            raise ConfigError(f"--drop: unknown modality {tok!r}; "
                              f"letters {sorted(by_letter)} or names {sorted(by_name)}")
    return tuple(names)


def cmd_corrupt(args: argparse.Namespace) -> int:
    manifest = parse_manifest(args.manifest, strict=True)
    profiles = manifest.modalities
    universe = manifest.modality_names
    drop = _parse_drop(args.drop, profiles) if args.drop else ()
    corrupted = ModalitySubset.of(universe, drop)
    if args.emm:
        if args.r is not None or args.level is not None:
            raise ConfigError("--emm takes no --r or --level")
        label = combination_label(corrupted.complement(), profiles)
        spec = ScenarioSpec(id=f"emm-{label}", kind=KIND_EMM, corrupted=corrupted)
    elif args.rmm:
        if args.r is None:
            raise ConfigError("--rmm needs --r")
        if args.level is not None:
            raise ConfigError("--rmm takes no --level")
        if not 0.0 <= args.r <= 1.0:
            raise ConfigError(f"--r: {args.r} not in [0, 1]")
        label = combination_label(corrupted.complement(), profiles)
        spec = ScenarioSpec(id=f"rmm-r{args.r:g}-{label}", kind=KIND_RMM,
                            corrupted=corrupted, r=args.r)
    else:
        if args.r is not None:
            raise ConfigError("--nm takes no --r")
        if args.level not in NM_LEVELS:
            raise ConfigError(f"--level: unknown level {args.level!r}, "
                              f"want one of {sorted(NM_LEVELS)}")
        if not drop:
            corrupted = ModalitySubset(universe, universe)
        level = NM_LEVELS[args.level]
        spec = ScenarioSpec(id=f"nm-{level.name}", kind=KIND_NM,
                            corrupted=corrupted, noise=level.params)
    seed = resolve_seed(args.seed)
    out_dir = Path(args.out)
    materialize_scenario(manifest, spec, seed, out_dir)
    meta = {
        "scenario": spec.id,
        "kind": spec.kind,
        "corrupted": list(spec.corrupted.members),
        "intact_label": (combination_label(spec.corrupted.complement(), profiles)
                         if len(spec.corrupted) < len(universe) else None),
        "seed": seed,
    }
    if spec.r is not None:
        meta["r"] = spec.r
    if spec.noise is not None:
        meta["noise"] = {"density": spec.noise.density, "sigma": spec.noise.sigma,
                         "mu": spec.noise.mu}
    (out_dir / "scenario.json").write_text(json.dumps(meta, indent=2) + "\n",
                                           encoding="utf-8")
    print(out_dir / "manifest.json")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_run_config(Path(args.config), seed_flag=args.seed)
    report = run_benchmark(cfg)
    for line in summary_lines(report):
        print(line)
    print(cfg.work_dir / report.run_id / "report.json")
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    p_grid = _parse_p_grid(args.p_grid)
    results = {}
    for raw_path in args.records:
        path = Path(raw_path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise MmrbError(f"cannot read record {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise MmrbError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(doc, dict) or not all(
                isinstance(k, str) and isinstance(v, (int, float)) and not isinstance(v, bool)
                for k, v in doc.items()):
            raise MmrbError(f"{path}: expected a JSON map of combination label to mIoU")
        record = record_from_labels({k: float(v) for k, v in doc.items()})
        avg = avg_miou(record)
        expected = [(p, expected_miou(record, p)) for p in p_grid]
        results[path.stem] = {"avg": avg, "expected": {f"{p:g}": v for p, v in expected}}
        parts = [f"avg={fmt2(avg)}"] + [f"e({p:g})={fmt2(v)}" for p, v in expected]
        print(f"{path.stem}: " + " ".join(parts))
    if args.out:
        Path(args.out).write_text(json.dumps(results, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    paths = [Path(p) for p in args.reports]
    reports = [read_report(p) for p in paths]
    names = []
    for p in paths:
        base = p.stem or "report"
        name = base
        k = 2
        while name in names:
            name = f"{base}_{k}"
            k += 1
        names.append(name)
    written = write_csv_bundle(list(zip(names, reports)), args.out)
    for path in written:
        print(path)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmrb",
        description="Robustness benchmark for multi-modal semantic segmentation "
                    "under missing and noisy modalities.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--size", type=int, default=64, help="square image size in pixels")
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("corrupt", help="materialize one corruption scenario")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None)
    kind = p.add_mutually_exclusive_group(required=True)
    kind.add_argument("--emm", action="store_true", help="zero the dropped modalities")
    kind.add_argument("--rmm", action="store_true", help="zero a fraction r of the dropped modalities")
    kind.add_argument("--nm", action="store_true", help="apply noise at a severity level")
    p.add_argument("--drop", default="", help="comma-separated modalities (letters or names)")
    p.add_argument("--r", type=float, default=None, help="zeroed fraction for --rmm")
    p.add_argument("--level", default=None, help="noise level for --nm (low|mid|high)")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("run", help="run a full benchmark from a config file")
    p.add_argument("config", help="run-config JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("aggregate", help="aggregate per-combination mIoU records")
    p.add_argument("records", nargs="+", help="JSON files mapping combination label to mIoU")
    p.add_argument("--p-grid", default="0.2,0.1,0.05", dest="p_grid",
                   help="comma-separated failure probabilities")
    p.add_argument("--out", default=None, help="write full-precision results JSON here")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("report", help="emit plot-ready CSVs from report.json files")
    p.add_argument("reports", nargs="+", help="report.json files (first drives the layout)")
    p.add_argument("--out", required=True, help="output directory for CSV files")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MmrbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
