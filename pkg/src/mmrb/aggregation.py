"""Averaging and Bernoulli-weighted expectation over per-combination scores.

A :class:`MetricRecord` maps every corrupted modality subset (all 2^n - 1 of
them, clean included) to the mIoU measured under that corruption. Two
aggregates summarize a record:

* ``avg_miou``: the unweighted mean over all combinations.
* ``expected_miou(p)``: each subset of size k is weighted by the probability
  p^k (1-p)^(n-k) that exactly those modalities fail independently. The
  all-failed case is never evaluated, so the weighted sum is renormalized by
  ``1 - p^n`` to make the effective weights a proper distribution.

All arithmetic is double precision; any rounding happens in the reporting
layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import MissingCombinationError, ParameterError
from .metrics import ConfusionMatrix, class_iou, mean_iou
from .modality import (KIND_EMM, KIND_RMM, ModalityProfile, ModalitySubset,
                       NoiseLevel, combination_label,
                       enumerate_corrupted_subsets,
                       intact_subsets_in_table_order, validate_profiles)


@dataclass(frozen=True)
class MetricRecord:
    """Per-combination mIoU values for one regime, keyed by corrupted subset."""

    kind: str
    entries: Mapping[ModalitySubset, float]
    r: float | None = None
    modalities: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in (KIND_EMM, KIND_RMM):
            raise ParameterError(f"record kind must be emm or rmm, got {self.kind!r}")
        if self.kind == KIND_RMM:
            if self.r is None or not 0.0 <= self.r <= 1.0:
                raise ParameterError(f"rmm record needs r in [0, 1], got {self.r}")
        elif self.r is not None:
            raise ParameterError("r is only valid for rmm records")
        universe = self.modalities
        for subset, value in self.entries.items():
            if universe is None:
                universe = subset.universe
            elif subset.universe != universe:
                raise ParameterError(
                    f"mixed universes in record: {subset.universe} vs {universe}")
            if not 0.0 <= float(value) <= 100.0:
                raise ParameterError(f"mIoU {value} for {subset.members} not in [0, 100]")
        if universe is None:
            raise ParameterError("cannot determine modality list of an empty record")
        object.__setattr__(self, "modalities", tuple(universe))
        object.__setattr__(self, "entries", dict(self.entries))

    @property
    def n(self) -> int:
        return len(self.modalities)  # type: ignore[arg-type]


def record_from_labels(labeled: Mapping[str, float], *, kind: str = KIND_EMM,
                       r: float | None = None) -> MetricRecord:
    """Build a record from an intact-label -> mIoU map (e.g. "RD" -> 66.33).

    The canonical letter order is taken from the longest label, which for a
    complete record is the all-intact combination.
    """
    if not labeled:
        raise ParameterError("empty record: no combination labels")
    full = max(labeled, key=len)
    universe = tuple(full)
    if len(set(universe)) != len(universe):
        raise ParameterError(f"combination label {full!r} repeats a letter")
    entries: dict[ModalitySubset, float] = {}
    for label, value in labeled.items():
        intact = ModalitySubset.of(universe, tuple(label))
        if "".join(intact.members) != label:
            raise ParameterError(
                f"label {label!r} is not in canonical letter order {full!r}")
        entries[intact.complement()] = float(value)
    return MetricRecord(kind=kind, entries=entries, r=r, modalities=universe)


def _require_complete(record: MetricRecord) -> list[ModalitySubset]:
    subsets = enumerate_corrupted_subsets(record.modalities)  # type: ignore[arg-type]
    missing = tuple(s.complement().members for s in subsets if s not in record.entries)
    if missing:
        raise MissingCombinationError(missing)
    return subsets


def subset_probability(k: int, n: int, p: float) -> float:
    """Probability that one specific set of k out of n modalities fails."""
    if not 0 <= k <= n:
        raise ParameterError(f"need 0 <= k <= n, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability must be in [0, 1], got {p}")
    return p ** k * (1.0 - p) ** (n - k)


def _clamp_to_entries(value: float, record: MetricRecord) -> float:
    # Both aggregates are convex combinations of the entries, so the true
    # value lies inside the entry envelope; clip off float dust.
    lo = min(record.entries.values())
    hi = max(record.entries.values())
    return min(max(value, lo), hi)


def avg_miou(record: MetricRecord) -> float:
    """Unweighted mean over all 2^n - 1 combinations, clean included."""
    subsets = _require_complete(record)
    mean = math.fsum(record.entries[s] for s in subsets) / len(subsets)
    return _clamp_to_entries(mean, record)


def expected_miou(record: MetricRecord, p: float) -> float:
    """Failure-probability-weighted mean, renormalized by 1 - p^n."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"probability must be in [0, 1], got {p}")
    if p == 1.0:
        raise ParameterError("p = 1 leaves no surviving combination to weight")
    subsets = _require_complete(record)
    n = record.n
    total = math.fsum(
        subset_probability(len(s), n, p) * record.entries[s] for s in subsets)
    return _clamp_to_entries(total / (1.0 - p ** n), record)


@dataclass(frozen=True)
class RegimeSummary:
    """Aggregates for one zeroing regime (EMM, or RMM at one r)."""

    kind: str
    combinations: tuple[tuple[str, float], ...]
    avg: float
    expected: tuple[tuple[float, float], ...]
    r: float | None = None

    def __post_init__(self) -> None:
        values = [v for _, v in self.combinations]
        values.append(self.avg)
        values.extend(v for _, v in self.expected)
        for v in values:
            if not 0.0 <= v <= 100.0:
                raise ParameterError(f"summary value {v} not in [0, 100]")


@dataclass(frozen=True)
class NoiseSummary:
    """mIoU and per-class IoUs for one noise level over the full combination."""

    level: str
    density: float
    sigma: float
    mu: float
    miou: float
    class_ious: tuple[float | None, ...]

    def __post_init__(self) -> None:
        if not 0.0 <= self.miou <= 100.0:
            raise ParameterError(f"mIoU {self.miou} not in [0, 100]")
        for v in self.class_ious:
            if v is not None and not 0.0 <= v <= 1.0:
                raise ParameterError(f"class IoU {v} not in [0, 1]")


@dataclass(frozen=True)
class RobustnessReport:
    """Everything a benchmark run reports, ready for serialization."""

    modalities: tuple[str, ...]
    letters: tuple[str, ...]
    p_grid: tuple[float, ...]
    emm: RegimeSummary | None
    rmm: tuple[RegimeSummary, ...]
    nm: tuple[NoiseSummary, ...]
    class_names: tuple[str, ...] = ()
    run_id: str = ""
    global_seed: int = 0


def _summarize(record: MetricRecord, profiles: Sequence[ModalityProfile],
               p_grid: Sequence[float]) -> RegimeSummary:
    names = tuple(p.name for p in profiles)
    if record.modalities != names:
        raise ParameterError(
            f"record modalities {record.modalities} do not match profiles {names}")
    _require_complete(record)
    combos = tuple(
        (combination_label(intact, profiles), record.entries[intact.complement()])
        for intact in intact_subsets_in_table_order(profiles))
    return RegimeSummary(
        kind=record.kind,
        combinations=combos,
        avg=avg_miou(record),
        expected=tuple((float(p), expected_miou(record, p)) for p in p_grid),
        r=record.r,
    )


def build_report(emm: MetricRecord | None,
                 rmm: Sequence[tuple[float, MetricRecord]],
                 nm: Sequence[tuple[NoiseLevel, ConfusionMatrix]],
                 p_grid: Sequence[float],
                 *,
                 profiles: Sequence[ModalityProfile],
                 class_names: Sequence[str] = (),
                 run_id: str = "",
                 global_seed: int = 0) -> RobustnessReport:
    """Assemble the full report from per-regime records and NM confusions."""
    profiles = validate_profiles(profiles)
    if not p_grid:
        raise ParameterError("p_grid must be non-empty")
    rmm_summaries = []
    for r, record in rmm:
        if record.kind != KIND_RMM or record.r != r:
            raise ParameterError(f"rmm record for r={r} carries kind={record.kind}, r={record.r}")
        rmm_summaries.append(_summarize(record, profiles, p_grid))
    nm_summaries = []
    for level, cm in nm:
        iou = class_iou(cm)
        nm_summaries.append(NoiseSummary(
            level=level.name,
            density=level.params.density,
            sigma=level.params.sigma,
            mu=level.params.mu,
            miou=mean_iou(cm),
            class_ious=tuple(None if math.isnan(v) else float(v) for v in iou),
        ))
    return RobustnessReport(
        modalities=tuple(p.name for p in profiles),
        letters=tuple(p.letter for p in profiles),
        p_grid=tuple(float(p) for p in p_grid),
        emm=None if emm is None else _summarize(emm, profiles, p_grid),
        rmm=tuple(rmm_summaries),
        nm=tuple(nm_summaries),
        class_names=tuple(class_names),
        run_id=run_id,
        global_seed=global_seed,
    )
