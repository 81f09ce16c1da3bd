"""
From per-combination scores to robustness metrics
==================================================

A model evaluated under modality dropout yields one mIoU per surviving
modality combination. This demo aggregates such a table two ways: the
unweighted average over all combinations, and the expectation under
independent per-modality failures with probability p (renormalized to
exclude the impossible all-failed case).
"""

import math

from mmrb.aggregation import (avg_miou, expected_miou, record_from_labels,
                              subset_probability)
from mmrb.report import fmt2

# per-combination mIoU for a hypothetical model over R(GB), D(epth),
# E(vent), L(iDAR); labels name the modalities that stayed intact
scores = {
    "R": 22.5, "D": 50.6, "E": 3.2, "L": 2.9,
    "RD": 66.3, "RE": 22.9, "RL": 22.5, "DE": 50.8, "DL": 50.8, "EL": 3.2,
    "RDE": 66.3, "RDL": 66.4, "REL": 22.9, "DEL": 51.0,
    "RDEL": 66.3,
}
record = record_from_labels(scores)
print(f"record over {record.n} modalities, {len(scores)} combinations")

# the flat average treats catastrophic and benign failures alike
print(f"average mIoU: {fmt2(avg_miou(record))}")

# the expectation weights each combination by how likely it is to occur
for p in (0.2, 0.1, 0.05):
    print(f"expected mIoU at p={p}: {fmt2(expected_miou(record, p))}")

# the weights are Bernoulli subset probabilities; k modalities fail with
# probability p^k (1-p)^(n-k), and excluding k = n leaves mass 1 - p^n
p = 0.2
n = record.n
mass = sum(math.comb(n, k) * subset_probability(k, n, p) for k in range(n))
print(f"surviving probability mass at p={p}: {mass:.6f} (= 1 - p^n = {1 - p**n:.6f})")

# a failure-prone sensor suite (large p) leans on the single-modality rows,
# so a model that collapses without RGB scores much worse there
for p in (0.05, 0.3, 0.6, 0.9):
    print(f"p={p:4}: expected mIoU {fmt2(expected_miou(record, p))}")
