"""|A ∩ B| and |A \\ B| from two independently sampled streams.

Run: python demos/03_intersection_difference.py
"""

import numpy as np

from mtsketch import MtsSketch, SketchConfig, estimate_difference, estimate_intersection
from mtsketch.workload import WorkloadSpec, generate, sample_counts

config = SketchConfig(m=100, u=1000)
spec = WorkloadSpec.two_stream(a=10_000, size_ratio=1.0, alpha=0.6, master_seed=3)

inter, diff = [], []
for run in range(100):
    w = generate(spec, run)
    counts = sample_counts(w)
    a, b = MtsSketch(config), MtsSketch(config)
    a.update_counts(w.ids, counts[0])
    b.update_counts(w.ids, counts[1])
    inter.append(estimate_intersection(a, b).value)
    diff.append(estimate_difference(a, b).value)

print("true |A ∩ B| = 6000, |A - B| = 4000")
print(f"intersection: mean {np.mean(inter):7.0f}  rel sd {np.std(inter) / 6000:.3f}")
print(f"difference:   mean {np.mean(diff):7.0f}  rel sd {np.std(diff) / 4000:.3f}")

rep = estimate_intersection(a, b)
for key in ("rho_hat", "d_a", "d_b", "p0_a", "p0_b", "p0_union", "f", "union_hat"):
    print(f"  {key:10s} {rep.components[key]}")
