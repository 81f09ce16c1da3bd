"""Pure-Python reference for the seeded random stack.

Written straight from the public algorithm definitions (FNV-1a 64,
SplitMix64, xoshiro256**, Box-Muller) with no numpy or numba, so the
compiled kernels in mmrb.rng can be checked for bit-identical behavior
against an implementation that shares none of their code.
"""

import math

MASK = (1 << 64) - 1

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211


def fnv1a64(text):
    h = FNV_OFFSET
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * FNV_PRIME) & MASK
    return h


def splitmix64(state):
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


def stream_seed(global_seed, scenario, modality, sample):
    h = fnv1a64(f"{scenario}/{modality}/{sample}")
    return splitmix64(h ^ global_seed)[1]


class Xoshiro256SS:
    """xoshiro256** seeded by four successive SplitMix64 outputs."""

    def __init__(self, seed):
        state = seed
        self.s = []
        for _ in range(4):
            state, word = splitmix64(state)
            self.s.append(word)

    @staticmethod
    def _rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & MASK

    def next(self):
        s0, s1, s2, s3 = self.s
        result = (self._rotl((s1 * 5) & MASK, 7) * 9) & MASK
        t = (s1 << 17) & MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = self._rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def bounded(self, span):
        # Power-of-two mask rejection: unbiased for any span >= 1.
        mask = span - 1
        for shift in (1, 2, 4, 8, 16, 32):
            mask |= mask >> shift
        while True:
            v = self.next() & mask
            if v < span:
                return v


def shuffle_prefix(n, count, seed):
    gen = Xoshiro256SS(seed)
    idx = list(range(n))
    for i in range(count):
        j = i + gen.bounded(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:count]


def normals(count, seed):
    gen = Xoshiro256SS(seed)
    scale = 1.0 / 9007199254740992.0
    out = []
    while len(out) < count:
        u1 = ((gen.next() >> 11) + 1) * scale
        u2 = (gen.next() >> 11) * scale
        rad = math.sqrt(-2.0 * math.log(u1))
        ang = 2.0 * math.pi * u2
        out.append(rad * math.cos(ang))
        if len(out) < count:
            out.append(rad * math.sin(ang))
    return out[:count]


def uniforms(count, seed):
    gen = Xoshiro256SS(seed)
    scale = 1.0 / 9007199254740992.0
    return [(gen.next() >> 11) * scale for _ in range(count)]
