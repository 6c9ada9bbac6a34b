"""Arbitrary set expressions over k streams.

Expressions use | for union, & for intersection and - for difference (or
∪ ∩ ∖). All operators have equal precedence and group left to right, so
use parentheses freely.

Run: python demos/04_set_expressions.py
"""

import numpy as np

from mtsketch import MtsSketch, SketchConfig, estimate, format_expr, parse
from mtsketch.workload import WorkloadSpec, generate, sample_counts

names = ("A", "B", "C")
print(format_expr(parse("A ∩ B ∖ C", names), names))      # A & B - C
print(parse("A - (B | C)", names))

config = SketchConfig(m=100, u=1000)
spec = WorkloadSpec.three_stream(ab=6000, master_seed=11)   # |(A ∩ B) - C| = 5000

for text in ("(A & B) - C", "A & B & C", "(A | B) - C", "A | B | C"):
    expr = parse(text, names)
    values = []
    for run in range(40):
        w = generate(spec, run)
        counts = sample_counts(w)
        sketches = []
        for i in range(3):
            s = MtsSketch(config)
            s.update_counts(w.ids, counts[i])
            sketches.append(s)
        values.append(estimate(sketches, expr).value)
    truth = w.true_cardinality(expr)
    print(f"{text:14s} true {truth:6d}  mean {np.mean(values):8.0f}  rel sd {np.std(values) / truth:.3f}")
