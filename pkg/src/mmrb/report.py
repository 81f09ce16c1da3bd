"""Report persistence and presentation.

``report.json`` carries full-precision doubles and no timestamps, so byte
identity across reruns is meaningful. All two-decimal rounding (half away
from zero, like the published tables) happens here, never upstream.
"""

from __future__ import annotations

import json
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Sequence

from .aggregation import NoiseSummary, RegimeSummary, RobustnessReport
from .errors import MmrbError, ParameterError

REPORT_FORMAT = "mmrb-report"
REPORT_VERSION = 1


def round_half_up(value: float, places: int = 2) -> float:
    """Round half away from zero on the shortest decimal form of ``value``."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def fmt2(value: float) -> str:
    return f"{round_half_up(value):.2f}"


# ---------------------------------------------------------------------------
# JSON round-trip

def _regime_doc(s: RegimeSummary) -> dict:
    doc: dict = {"kind": s.kind}
    if s.r is not None:
        doc["r"] = s.r
    doc["combinations"] = [[label, value] for label, value in s.combinations]
    doc["avg"] = s.avg
    doc["expected"] = [[p, value] for p, value in s.expected]
    return doc


def report_to_doc(report: RobustnessReport) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "run_id": report.run_id,
        "global_seed": report.global_seed,
        "modalities": list(report.modalities),
        "letters": list(report.letters),
        "classes": list(report.class_names),
        "p_grid": list(report.p_grid),
        "emm": None if report.emm is None else _regime_doc(report.emm),
        "rmm": [_regime_doc(s) for s in report.rmm],
        "nm": [
            {
                "level": s.level,
                "density": s.density,
                "sigma": s.sigma,
                "mu": s.mu,
                "miou": s.miou,
                "class_ious": list(s.class_ious),
            }
            for s in report.nm
        ],
    }


def write_report(report: RobustnessReport, path: Path | str) -> None:
    Path(path).write_text(json.dumps(report_to_doc(report), indent=2) + "\n",
                          encoding="utf-8")


def _regime_from_doc(doc: dict, where: str) -> RegimeSummary:
    try:
        return RegimeSummary(
            kind=doc["kind"],
            r=doc.get("r"),
            combinations=tuple((str(l), float(v)) for l, v in doc["combinations"]),
            avg=float(doc["avg"]),
            expected=tuple((float(p), float(v)) for p, v in doc["expected"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MmrbError(f"{where}: malformed regime entry: {exc}") from exc


def read_report(path: Path | str) -> RobustnessReport:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MmrbError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MmrbError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
        raise MmrbError(f"{path}: not a benchmark report")
    if doc.get("version") != REPORT_VERSION:
        raise MmrbError(f"{path}: unsupported report version {doc.get('version')}")
    try:
        nm = tuple(
            NoiseSummary(
                level=str(e["level"]), density=float(e["density"]),
                sigma=float(e["sigma"]), mu=float(e["mu"]), miou=float(e["miou"]),
                class_ious=tuple(None if v is None else float(v)
                                 for v in e["class_ious"]),
            )
            for e in doc["nm"])
        return RobustnessReport(
            modalities=tuple(doc["modalities"]),
            letters=tuple(doc["letters"]),
            p_grid=tuple(float(p) for p in doc["p_grid"]),
            emm=None if doc["emm"] is None else _regime_from_doc(doc["emm"], str(path)),
            rmm=tuple(_regime_from_doc(e, str(path)) for e in doc["rmm"]),
            nm=nm,
            class_names=tuple(doc["classes"]),
            run_id=str(doc["run_id"]),
            global_seed=int(doc["global_seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MmrbError(f"{path}: malformed report: {exc}") from exc


# ---------------------------------------------------------------------------
# presentation

def summary_lines(report: RobustnessReport) -> list[str]:
    """Human-readable run summary, values rounded to 2 decimals."""
    lines = []
    regimes: list[RegimeSummary] = ([] if report.emm is None else [report.emm])
    regimes += list(report.rmm)
    if regimes:
        header = "regime".ljust(12) + "avg".rjust(8)
        header += "".join(f"e({p:g})".rjust(10) for p in report.p_grid)
        lines.append(header)
        for s in regimes:
            name = s.kind if s.r is None else f"{s.kind} r={s.r:g}"
            row = name.ljust(12) + fmt2(s.avg).rjust(8)
            row += "".join(fmt2(v).rjust(10) for _, v in s.expected)
            lines.append(row)
    for s in report.nm:
        lines.append(f"nm {s.level} (D={s.density:g}, sigma={s.sigma:g}, "
                     f"mu={s.mu:g})  miou {fmt2(s.miou)}")
    return lines


def _unique_names(paths: Sequence[Path]) -> list[str]:
    names = []
    for p in paths:
        base = p.stem or "report"
        name = base
        k = 2
        while name in names:
            name = f"{base}_{k}"
            k += 1
        names.append(name)
    return names


def _regime_key(s: RegimeSummary) -> str:
    return s.kind if s.r is None else f"{s.kind}_r{s.r:g}"


def _find_regime(report: RobustnessReport, key: str) -> RegimeSummary | None:
    for s in ([] if report.emm is None else [report.emm]) + list(report.rmm):
        if _regime_key(s) == key:
            return s
    return None


def write_csv_bundle(reports: Sequence[tuple[str, RobustnessReport]],
                     out_dir: Path | str) -> list[Path]:
    """Emit combination and radar CSVs per regime, NM tables if present.

    Rows follow the first report's combination order; every further report
    must cover the same labels. Returns the written paths.
    """
    if not reports:
        raise ParameterError("no reports to emit")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = [name for name, _ in reports]
    first = reports[0][1]
    driver: list[RegimeSummary] = ([] if first.emm is None else [first.emm])
    driver += list(first.rmm)
    written: list[Path] = []
    if not driver and not first.nm:
        raise MmrbError("nothing to report: no regimes in " + names[0])

    for regime in driver:
        key = _regime_key(regime)
        labels = [label for label, _ in regime.combinations]
        columns: list[list[str]] = []
        for name, report in reports:
            match = _find_regime(report, key)
            if match is None:
                raise MmrbError(f"report {name} has no {key} regime to merge")
            values = dict(match.combinations)
            if set(values) != set(labels):
                raise MmrbError(f"report {name} covers different combinations for {key}")
            columns.append([fmt2(values[label]) for label in labels])
        for flavor, axis in (("combinations", "combination"), ("radar", "axis")):
            path = out_dir / f"{key}_{flavor}.csv"
            rows = [",".join([axis] + names)]
            for i, label in enumerate(labels):
                rows.append(",".join([label] + [col[i] for col in columns]))
            path.write_text("\n".join(rows) + "\n", encoding="utf-8")
            written.append(path)

    if first.nm:
        levels = [s.level for s in first.nm]
        by_level = []
        for name, report in reports:
            level_map = {s.level: s for s in report.nm}
            if set(level_map) < set(levels):
                raise MmrbError(f"report {name} lacks noise levels {sorted(set(levels) - set(level_map))}")
            by_level.append(level_map)
        path = out_dir / "nm_levels.csv"
        rows = [",".join(["level", "density", "sigma", "mu"] + names)]
        for s in first.nm:
            rows.append(",".join(
                [s.level, f"{s.density:g}", f"{s.sigma:g}", f"{s.mu:g}"]
                + [fmt2(m[s.level].miou) for m in by_level]))
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        written.append(path)
        if first.class_names:
            path = out_dir / "nm_class_iou.csv"
            header = ["class"]
            for name in names:
                header += [f"{name}_{level}" for level in levels]
            rows = [",".join(header)]
            for c, cls in enumerate(first.class_names):
                row = [cls]
                for m in by_level:
                    for level in levels:
                        v = m[level].class_ious[c]
                        row.append("" if v is None else fmt2(100.0 * v))
                rows.append(",".join(row))
            path.write_text("\n".join(rows) + "\n", encoding="utf-8")
            written.append(path)
    return written
