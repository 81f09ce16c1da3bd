"""
The three corruption regimes on a single modality tensor
=========================================================

Builds one small RGB-like tensor and walks it through the three regimes:
entire zeroing, random-fraction zeroing, and the two-stage noise pipeline.
Every operation is keyed by an explicit seed, so rerunning this script
prints identical numbers.
"""

import numpy as np

from mmrb.corruption import (TensorBuffer, add_gaussian, add_salt_pepper,
                             apply_nm, zero_full, zero_random)
from mmrb.harness import NM_LEVELS
from mmrb.modality import DELIVER_PROFILES
from mmrb.rng import SeedContext

rgb = DELIVER_PROFILES[0]
event = DELIVER_PROFILES[2]

# a deterministic 3x64x64 u8 tensor standing in for one camera frame
base = np.random.default_rng(42).integers(1, 255, size=(3, 64, 64), dtype=np.uint8)
t = TensorBuffer(base)
print(f"input: shape {t.shape}, dtype {t.data.dtype}, "
      f"range [{base.min()}, {base.max()}]")

# regime 1: the whole modality goes dark
dark = zero_full(t)
print(f"zero_full      -> {int((dark.data == 0).sum())} of {t.size} elements zero")

# regime 2: exactly floor(r * N) elements go dark, chosen by the seeded stream
for r in (0.25, 0.5, 0.75):
    partial = zero_random(t, r, seed=7)
    print(f"zero_random {r:4} -> {int((partial.data == 0).sum()):6d} zeros "
          f"(floor(r*N) = {int(r * t.size)})")

# the same seed always zeroes the same positions
again = zero_random(t, 0.5, seed=7)
print("same seed, same positions:", bool((again.data == zero_random(t, 0.5, 7).data).all()))

# regime 3a: Gaussian stage, sigma scaled to the value range, then clamped
noisy = add_gaussian(t, sigma=0.1, mu=0.0, profile=rgb, seed=3)
delta = noisy.data.astype(np.float64) - base.astype(np.float64)
print(f"gaussian sigma=0.1 -> measured std {delta.std():.2f} "
      f"(sigma * range = {0.1 * 255:.2f}, clamping shaves the tails)")

# event-camera data is impulse-only by profile: the Gaussian stage is a no-op
same = add_gaussian(t, sigma=0.5, mu=0.0, profile=event, seed=3)
print("gaussian on event profile is an identity:",
      same.data.tobytes() == base.tobytes())

# regime 3b: salt-and-pepper replaces floor(D * N) elements with the extremes
peppered = add_salt_pepper(t, density=0.1, profile=rgb, seed=11)
print(f"salt_pepper D=0.1 -> {int((peppered.data == 255).sum())} salt, "
      f"{int((peppered.data == 0).sum())} pepper")

# the full noise pipeline at the named severity levels
for name, level in NM_LEVELS.items():
    ctx = SeedContext(global_seed=0, scenario_id=f"demo-{name}",
                      modality="rgb", sample_id="0001")
    out = apply_nm(t, rgb, level.params, ctx)
    changed = int((out.data != base).sum())
    print(f"apply_nm {name:4} (D={level.params.density}, sigma={level.params.sigma}) "
          f"-> {changed} of {t.size} elements changed")
