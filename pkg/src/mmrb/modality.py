"""Modalities, modality subsets, and corruption scenarios.

A benchmark run is defined over an ordered list of :class:`ModalityProfile`.
The declaration order is canonical: subset iteration, combination labels, and
stream seeding all derive from it, so two runs over the same manifest agree on
every identifier. Combinations are labeled by the modalities that remain
intact ("RD" = rgb and depth survive), while scenarios are identified by the
corrupted complement, because enumeration walks the corrupted sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, Sequence

from .errors import ParameterError, ScenarioError

# 2^16 - 1 = 65535 subsets is already an unreasonable benchmark; anything
# larger is almost certainly a caller bug.
MAX_MODALITIES = 16

KIND_EMM = "emm"
KIND_RMM = "rmm"
KIND_NM = "nm"
SCENARIO_KINDS = (KIND_EMM, KIND_RMM, KIND_NM)


@dataclass(frozen=True)
class ModalityProfile:
    """Static description of one sensor channel of the dataset."""

    name: str
    letter: str
    channels: int
    value_min: float
    value_max: float
    gaussian_eligible: bool = True

    def __post_init__(self) -> None:
        if not self.name:
            raise ParameterError("modality name must be non-empty")
        if len(self.letter) != 1 or not self.letter.isalpha() or not self.letter.isupper():
            raise ParameterError(
                f"modality letter must be one uppercase character, got {self.letter!r}")
        if self.channels < 1:
            raise ParameterError(f"modality {self.name!r}: channels must be >= 1")
        if not self.value_min < self.value_max:
            raise ParameterError(
                f"modality {self.name!r}: value_min must be < value_max "
                f"({self.value_min} vs {self.value_max})")
        if self.name == "event" and self.gaussian_eligible:
            raise ParameterError("event modalities are never gaussian_eligible")


# Default profile set for DELIVER-style four-modality data. Event data is a
# derived representation, so additive Gaussian noise does not apply to it.
DELIVER_PROFILES: tuple[ModalityProfile, ...] = (
    ModalityProfile("rgb", "R", 3, 0, 255, gaussian_eligible=True),
    ModalityProfile("depth", "D", 1, 0, 65535, gaussian_eligible=True),
    ModalityProfile("event", "E", 3, 0, 255, gaussian_eligible=False),
    ModalityProfile("lidar", "L", 3, 0, 255, gaussian_eligible=True),
)


def _canonical_names(modalities: Sequence[ModalityProfile | str]) -> tuple[str, ...]:
    names = tuple(m.name if isinstance(m, ModalityProfile) else str(m) for m in modalities)
    if len(set(names)) != len(names):
        raise ParameterError(f"duplicate modality names in {names}")
    return names


def validate_profiles(profiles: Sequence[ModalityProfile]) -> tuple[ModalityProfile, ...]:
    """Check cross-profile invariants (unique names and letters)."""
    profs = tuple(profiles)
    _canonical_names(profs)
    letters = [p.letter for p in profs]
    if len(set(letters)) != len(letters):
        raise ParameterError(f"duplicate modality letters in {letters}")
    return profs


@dataclass(frozen=True)
class ModalitySubset:
    """An immutable subset of a dataset's modalities.

    ``universe`` is the full canonical modality-name tuple; ``members`` is
    stored in universe order no matter how the subset was constructed.
    """

    universe: tuple[str, ...]
    members: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.universe)) != len(self.universe):
            raise ParameterError(f"duplicate names in universe {self.universe}")
        seen = set(self.members)
        if len(seen) != len(self.members):
            raise ParameterError(f"duplicate members {self.members}")
        if not seen <= set(self.universe):
            raise ParameterError(
                f"members {sorted(seen - set(self.universe))} not in universe {self.universe}")
        canonical = tuple(n for n in self.universe if n in seen)
        if canonical != self.members:
            object.__setattr__(self, "members", canonical)

    @classmethod
    def of(cls, universe: Sequence[ModalityProfile | str],
           members: Iterable[ModalityProfile | str]) -> "ModalitySubset":
        return cls(_canonical_names(universe), _canonical_names(list(members)))

    def complement(self) -> "ModalitySubset":
        inside = set(self.members)
        return ModalitySubset(self.universe, tuple(n for n in self.universe if n not in inside))

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, name: object) -> bool:
        return name in self.members

    def __iter__(self) -> Iterator[str]:
        return iter(self.members)


@dataclass(frozen=True)
class FailureModel:
    """Independent per-modality damage probability."""

    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"failure probability must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class NoiseParams:
    """Noisy-modality parameters, all in normalized [0, 1] value units."""

    density: float
    sigma: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.density <= 1.0:
            raise ParameterError(f"noise density must be in [0, 1], got {self.density}")
        if self.sigma < 0.0:
            raise ParameterError(f"noise sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class NoiseLevel:
    """A named severity point on the noise grid (e.g. "low", "mid", "high")."""

    name: str
    params: NoiseParams

    def __post_init__(self) -> None:
        if not self.name:
            raise ParameterError("noise level name must be non-empty")


@dataclass(frozen=True)
class ScenarioSpec:
    """One corruption scenario of a benchmark run.

    ``corrupted`` lists the modalities the scenario touches. For the zeroing
    kinds the all-corrupted case is excluded (a run where every modality is
    gone is never scored); noise scenarios may cover the full set because
    per-modality eligibility still limits what actually changes.
    """

    id: str
    kind: str
    corrupted: ModalitySubset
    r: float | None = None
    noise: NoiseParams | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ScenarioError("scenario id must be non-empty")
        if self.kind not in SCENARIO_KINDS:
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        n = len(self.corrupted.universe)
        if self.kind in (KIND_EMM, KIND_RMM) and len(self.corrupted) > n - 1:
            raise ScenarioError(
                f"scenario {self.id!r}: at most {n - 1} of {n} modalities may be corrupted")
        if self.kind == KIND_RMM:
            if self.r is None or not 0.0 <= self.r <= 1.0:
                raise ScenarioError(f"scenario {self.id!r}: rmm needs r in [0, 1], got {self.r}")
        elif self.r is not None:
            raise ScenarioError(f"scenario {self.id!r}: r is only valid for rmm")
        if self.kind == KIND_NM:
            if self.noise is None:
                raise ScenarioError(f"scenario {self.id!r}: nm needs noise parameters")
        elif self.noise is not None:
            raise ScenarioError(f"scenario {self.id!r}: noise is only valid for nm")


def enumerate_corrupted_subsets(
        modalities: Sequence[ModalityProfile | str]) -> list[ModalitySubset]:
    """All corrupted subsets of size 0..n-1, in canonical evaluation order.

    Order is by subset size ascending, then lexicographically by canonical
    modality position, so the clean (empty) subset comes first and the order
    is reproducible across runs.
    """
    universe = _canonical_names(modalities)
    n = len(universe)
    if n == 0:
        raise ParameterError("empty modality list: nothing to enumerate")
    if n > MAX_MODALITIES:
        raise ParameterError(
            f"{n} modalities would enumerate 2^{n}-1 subsets; limit is {MAX_MODALITIES}")
    out: list[ModalitySubset] = []
    for k in range(n):
        for picks in combinations(range(n), k):
            out.append(ModalitySubset(universe, tuple(universe[i] for i in picks)))
    return out


def combination_label(intact: ModalitySubset,
                      profiles: Sequence[ModalityProfile]) -> str:
    """Concatenated letters of the intact modalities, in canonical order."""
    if len(intact) == 0:
        raise ParameterError("empty intact set has no combination label")
    letters = {p.name: p.letter for p in profiles}
    try:
        return "".join(letters[name] for name in intact)
    except KeyError as exc:
        raise ParameterError(f"no profile for modality {exc.args[0]!r}") from exc


def intact_subsets_in_table_order(
        profiles: Sequence[ModalityProfile]) -> list[ModalitySubset]:
    """Non-empty intact subsets ordered the way result tables list them.

    Tables grow by how much survives: single intact modalities first, the
    fully intact combination last, lexicographic by position within one size.
    """
    universe = _canonical_names(profiles)
    n = len(universe)
    if n == 0:
        raise ParameterError("empty modality list: nothing to enumerate")
    out: list[ModalitySubset] = []
    for k in range(1, n + 1):
        for picks in combinations(range(n), k):
            out.append(ModalitySubset(universe, tuple(universe[i] for i in picks)))
    return out
