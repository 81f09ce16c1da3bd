"""Seeded random streams for the corruption engine.

Every corruption decision flows through one fixed stack so results are
bit-reproducible for a given (global seed, scenario, modality, sample):

* FNV-1a-64 hashes the stream identity string to a 64-bit value,
* one SplitMix64 step finalizes (hash XOR global_seed) into the stream seed,
* four further SplitMix64 outputs initialize a xoshiro256** generator,
* uniform doubles take the top 53 bits, normals come from Box-Muller pairs,
  bounded ints use power-of-two mask rejection.

The hot loops (partial Fisher-Yates selection, normal generation) are
compiled with numba; they are bit-identical to the pure-Python reference the
test suite carries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, uint64

from .errors import ParameterError

_MASK64 = (1 << 64) - 1

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211

_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MULT1 = 0xBF58476D1CE4E5B9
_SM_MULT2 = 0x94D049BB133111EB

# 2^-53; top 53 bits of a 64-bit word -> double in [0, 1)
_U53 = 1.0 / 9007199254740992.0


def fnv1a64(text: str) -> int:
    """FNV-1a hash of the UTF-8 bytes of ``text``, 64-bit variant."""
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step: returns (advanced state, output word)."""
    state = (state + _SM_GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SM_MULT1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_MULT2) & _MASK64
    return state, z ^ (z >> 31)


@dataclass(frozen=True)
class SeedContext:
    """Identity of one random stream within a benchmark run."""

    global_seed: int
    scenario_id: str
    modality: str
    sample_id: str

    def __post_init__(self) -> None:
        if not 0 <= self.global_seed <= _MASK64:
            raise ParameterError(f"global_seed must be a 64-bit unsigned int, got {self.global_seed}")
        for field_name in ("scenario_id", "modality", "sample_id"):
            if not getattr(self, field_name):
                raise ParameterError(f"SeedContext.{field_name} must be non-empty")


def derive_stream_seed(ctx: SeedContext) -> int:
    """64-bit stream seed for one (scenario, modality, sample) triple."""
    h = fnv1a64(f"{ctx.scenario_id}/{ctx.modality}/{ctx.sample_id}")
    _, seed = splitmix64(h ^ ctx.global_seed)
    return seed


def _init_state(seed: int) -> tuple[np.uint64, np.uint64, np.uint64, np.uint64]:
    """xoshiro256** state from four successive SplitMix64 outputs."""
    if not 0 <= seed <= _MASK64:
        raise ParameterError(f"seed must be a 64-bit unsigned int, got {seed}")
    state = seed
    words = []
    for _ in range(4):
        state, word = splitmix64(state)
        words.append(np.uint64(word))
    return words[0], words[1], words[2], words[3]


# Constants are wrapped in uint64() inside the kernels: mixing a uint64 with a
# Python int literal would promote to float64 under numpy casting rules.

@njit(cache=True)
def _raw_kernel(s0, s1, s2, s3, out):  # pragma: no cover - compiled
    for i in range(out.shape[0]):
        r = s1 * uint64(5)
        r = ((r << uint64(7)) | (r >> uint64(57))) * uint64(9)
        t = s1 << uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << uint64(45)) | (s3 >> uint64(19))
        out[i] = r
    return out


@njit(cache=True)
def _shuffle_prefix_kernel(n, count, s0, s1, s2, s3, idx):  # pragma: no cover - compiled
    # Partial Fisher-Yates: after `count` steps the prefix idx[:count] is a
    # uniform sample without replacement from 0..n-1, in selection order.
    for i in range(n):
        idx[i] = i
    for i in range(count):
        span = uint64(n - i)
        mask = span - uint64(1)
        mask |= mask >> uint64(1)
        mask |= mask >> uint64(2)
        mask |= mask >> uint64(4)
        mask |= mask >> uint64(8)
        mask |= mask >> uint64(16)
        mask |= mask >> uint64(32)
        while True:
            r = s1 * uint64(5)
            r = ((r << uint64(7)) | (r >> uint64(57))) * uint64(9)
            t = s1 << uint64(17)
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = (s3 << uint64(45)) | (s3 >> uint64(19))
            v = r & mask
            if v < span:
                break
        j = i + np.int64(v)
        tmp = idx[i]
        idx[i] = idx[j]
        idx[j] = tmp
    return idx


@njit(cache=True)
def _normals_kernel(count, s0, s1, s2, s3, out):  # pragma: no cover - compiled
    # Box-Muller, two uniforms -> two normals; the trailing sin value of an
    # odd count is computed and dropped so the stream position only depends
    # on how many pairs were started.
    scale = 1.0 / 9007199254740992.0
    i = 0
    while i < count:
        ra = s1 * uint64(5)
        ra = ((ra << uint64(7)) | (ra >> uint64(57))) * uint64(9)
        t = s1 << uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << uint64(45)) | (s3 >> uint64(19))
        rb = s1 * uint64(5)
        rb = ((rb << uint64(7)) | (rb >> uint64(57))) * uint64(9)
        t = s1 << uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << uint64(45)) | (s3 >> uint64(19))
        u1 = (np.float64(ra >> uint64(11)) + 1.0) * scale
        u2 = np.float64(rb >> uint64(11)) * scale
        rad = math.sqrt(-2.0 * math.log(u1))
        ang = 2.0 * math.pi * u2
        out[i] = rad * math.cos(ang)
        if i + 1 < count:
            out[i + 1] = rad * math.sin(ang)
        i += 2
    return out


def raw_stream(count: int, seed: int) -> np.ndarray:
    """First ``count`` raw 64-bit outputs of the seeded generator."""
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    out = np.empty(count, dtype=np.uint64)
    if count:
        _raw_kernel(*_init_state(seed), out)
    return out


def shuffle_prefix(n: int, count: int, seed: int) -> np.ndarray:
    """Uniform sample of ``count`` distinct indices from 0..n-1, in selection order."""
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n}")
    if not 0 <= count <= n:
        raise ParameterError(f"count must be in [0, {n}], got {count}")
    idx = np.empty(n, dtype=np.int64)
    if n:
        _shuffle_prefix_kernel(n, count, *_init_state(seed), idx)
    return idx[:count].copy()


def standard_normals(count: int, seed: int) -> np.ndarray:
    """``count`` standard-normal doubles from the seeded stream."""
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    out = np.empty(count, dtype=np.float64)
    if count:
        _normals_kernel(count, *_init_state(seed), out)
    return out


def uniforms(count: int, seed: int) -> np.ndarray:
    """``count`` uniform doubles in [0, 1) from the seeded stream."""
    return (raw_stream(count, seed) >> np.uint64(11)).astype(np.float64) * _U53
