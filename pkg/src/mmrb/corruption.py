"""The three corruption regimes, applied to per-modality tensors.

Entire-missing zeroes a whole tensor. Random-missing zeroes an exact
``floor(r * N)`` element count, selected without replacement by a partial
Fisher-Yates shuffle over the seeded stream. The noise regime composes
additive Gaussian noise (skipped for modalities that are not
gaussian-eligible) with salt-and-pepper replacement at the profile extremes.

Noise parameters live in the normalized [0, 1] value domain; results are
clamped there before mapping back to native units, so corrupted tensors never
leave their profile range. All operations are pure: inputs are never mutated,
and identical (input, parameters, seed) yields bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, TensorFormatError
from .modality import (KIND_EMM, KIND_NM, KIND_RMM, ModalityProfile,
                       NoiseParams, ScenarioSpec)
from .rng import SeedContext, derive_stream_seed, shuffle_prefix, standard_normals

DTYPES: dict[str, np.dtype] = {
    "u8": np.dtype(np.uint8),
    "u16": np.dtype(np.uint16),
    "f32": np.dtype(np.float32),
}
DTYPE_CODES: dict[np.dtype, str] = {v: k for k, v in DTYPES.items()}


@dataclass(frozen=True)
class TensorBuffer:
    """One modality tensor: (channels, height, width), u8/u16/f32, row-major."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = self.data
        if not isinstance(arr, np.ndarray) or arr.ndim != 3:
            raise TensorFormatError(
                f"tensor must be a 3-d (channels, height, width) array, got "
                f"{getattr(arr, 'shape', None)}")
        if arr.dtype not in DTYPE_CODES:
            raise TensorFormatError(f"unsupported tensor dtype {arr.dtype}, want u8/u16/f32")
        if arr.size == 0:
            raise TensorFormatError(f"tensor has zero elements, shape {arr.shape}")
        if not arr.flags.c_contiguous:
            object.__setattr__(self, "data", np.ascontiguousarray(arr))

    @property
    def dtype_code(self) -> str:
        return DTYPE_CODES[self.data.dtype]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def size(self) -> int:
        return self.data.size


def validate_range(x: TensorBuffer, profile: ModalityProfile, *, zero_ok: bool = False) -> None:
    """Raise unless every element is within the profile range.

    ``zero_ok`` additionally accepts exact zeros, which the zeroing regimes
    write regardless of value_min.
    """
    data = x.data
    ok = (data >= profile.value_min) & (data <= profile.value_max)
    if zero_ok:
        ok |= data == 0
    if not ok.all():
        bad = data[~ok]
        raise TensorFormatError(
            f"modality {profile.name!r}: {bad.size} element(s) outside "
            f"[{profile.value_min}, {profile.value_max}], e.g. {bad.flat[0]}")


def _check_profile_fits_dtype(x: TensorBuffer, profile: ModalityProfile) -> None:
    # Writing profile extremes into an integer array must not wrap around.
    if x.data.dtype.kind == "u":
        info = np.iinfo(x.data.dtype)
        if profile.value_min < info.min or profile.value_max > info.max:
            raise TensorFormatError(
                f"profile {profile.name!r} range [{profile.value_min}, {profile.value_max}] "
                f"does not fit tensor dtype {x.dtype_code}")


def zero_full(x: TensorBuffer) -> TensorBuffer:
    """Entire-missing: every element set to zero."""
    return TensorBuffer(np.zeros_like(x.data))


def zero_random(x: TensorBuffer, r: float, seed: int) -> TensorBuffer:
    """Random-missing: exactly floor(r * N) elements set to zero."""
    if not 0.0 <= r <= 1.0:
        raise ParameterError(f"missing ratio r must be in [0, 1], got {r}")
    out = x.data.copy()
    n_zero = math.floor(r * x.size)
    if n_zero:
        sel = shuffle_prefix(x.size, n_zero, seed)
        out.reshape(-1)[sel] = 0
    return TensorBuffer(out)


def add_gaussian(x: TensorBuffer, sigma: float, mu: float,
                 profile: ModalityProfile, seed: int) -> TensorBuffer:
    """Per-element Gaussian noise in the normalized domain, clamped to range.

    Modalities that are not gaussian-eligible pass through bit-identically.
    Integer outputs are rounded to nearest, ties away from zero.
    """
    if sigma < 0.0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if not profile.gaussian_eligible:
        return TensorBuffer(x.data.copy())
    _check_profile_fits_dtype(x, profile)
    lo = float(profile.value_min)
    hi = float(profile.value_max)
    span = hi - lo
    v = (x.data.astype(np.float64) - lo) / span
    z = standard_normals(x.size, seed).reshape(x.shape)
    v = np.clip(v + (z * sigma + mu), 0.0, 1.0)
    y = lo + v * span
    if x.data.dtype.kind == "u":
        y = np.copysign(np.floor(np.abs(y) + 0.5), y)
    return TensorBuffer(y.astype(x.data.dtype))


def add_salt_pepper(x: TensorBuffer, density: float,
                    profile: ModalityProfile, seed: int) -> TensorBuffer:
    """Impulse noise: floor(D * N) elements replaced by the profile extremes.

    The first ceil(n/2) selected positions (in selection order) become salt
    (value_max), the remaining floor(n/2) pepper (value_min).
    """
    if not 0.0 <= density <= 1.0:
        raise ParameterError(f"density must be in [0, 1], got {density}")
    _check_profile_fits_dtype(x, profile)
    out = x.data.copy()
    n_sel = math.floor(density * x.size)
    if n_sel:
        sel = shuffle_prefix(x.size, n_sel, seed)
        n_salt = (n_sel + 1) // 2
        flat = out.reshape(-1)
        flat[sel[:n_salt]] = out.dtype.type(profile.value_max)
        flat[sel[n_salt:]] = out.dtype.type(profile.value_min)
    return TensorBuffer(out)


def apply_nm(x: TensorBuffer, profile: ModalityProfile,
             noise: NoiseParams, ctx: SeedContext) -> TensorBuffer:
    """Noisy-modality regime: Gaussian stage, then salt-and-pepper stage.

    The two stages draw from independent streams derived by suffixing the
    scenario id, so changing sigma never shifts the salt/pepper positions.
    """
    seed_g = derive_stream_seed(replace(ctx, scenario_id=ctx.scenario_id + "/gauss"))
    seed_sp = derive_stream_seed(replace(ctx, scenario_id=ctx.scenario_id + "/sp"))
    y = add_gaussian(x, noise.sigma, noise.mu, profile, seed_g)
    return add_salt_pepper(y, noise.density, profile, seed_sp)


def corruption_severity(spec: ScenarioSpec, profile: ModalityProfile) -> float:
    """How badly a scenario damages one modality, as a fraction in [0, 1]."""
    if profile.name not in spec.corrupted.universe:
        raise ParameterError(
            f"modality {profile.name!r} is not part of scenario {spec.id!r}")
    if spec.kind == KIND_EMM:
        return 1.0 if profile.name in spec.corrupted else 0.0
    if spec.kind == KIND_RMM:
        return float(spec.r) if profile.name in spec.corrupted else 0.0
    assert spec.kind == KIND_NM
    noise = spec.noise
    assert noise is not None
    if profile.name not in spec.corrupted:
        return 0.0
    if profile.gaussian_eligible:
        return min(1.0, noise.density + noise.sigma)
    return noise.density
