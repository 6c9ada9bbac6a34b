"""Cardinality estimators over MTS sketches.

The register part feeds HyperLogLog (sampled-stream cardinality) and
max-attribution Jaccard indicators; the subsample part feeds Good-Turing
estimates of the unseen fraction, which rescale sampled cardinalities to
full-stream cardinalities.

Estimator ratios are reported raw: Jaccard-type estimates may fall slightly
outside [0, 1] and are intentionally not clamped, since clamping biases them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import (
    BindingError,
    EmptySketch,
    ExpressionSampleEmpty,
    SampleTooSparse,
)
from .expr import Leaf, SetExpr, arity, membership_mask
from .sketch import (
    BottomUSample,
    MtsSketch,
    Registers,
    check_compatible,
    merge_all,
    merge_bottom_u,
)

MAX_REGISTER = 64


@dataclass
class GoodTuringStats:
    singletons: int
    total_occurrences: int
    p0_hat: float
    min_frequency: int = 1
    distinct: int = 0


@dataclass
class EstimateReport:
    value: float
    algorithm: str
    components: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"algorithm": self.algorithm, "value": self.value}
        out.update(self.components)
        out["warnings"] = list(self.warnings)
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@lru_cache(maxsize=None)
def alpha_m(m: int) -> float:
    """HyperLogLog bias constant, by quadrature of its defining integral.

    Substituting ``x = t / m`` keeps the integrand on an O(1) scale for any m.
    """
    if m < 1:
        raise ValueError("m must be positive")

    def integrand(t):
        return math.log2((2 + t / m) / (1 + t / m)) ** m

    total = 0.0
    # split the range so quad sees the bulk of the mass separately from the tail
    for lo, hi in ((0.0, 8.0), (8.0, 64.0), (64.0, math.inf)):
        part, _ = integrate.quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        total += part
    return 1.0 / total


def _bit_length_u64(y: np.ndarray) -> np.ndarray:
    y = y.copy()
    n = np.zeros(y.shape, dtype=np.int64)
    for shift in (32, 16, 8, 4, 2, 1):
        big = y >= np.uint64(1 << shift)
        n[big] += shift
        y[big] >>= np.uint64(shift)
    return n + (y > 0)


def register_values(regs: Registers) -> np.ndarray:
    """HyperLogLog registers derived from stored bucket maxima.

    For a filled slot with maximal hash h the register is
    ``1 + floor(-log2(1 - h))``, i.e. one plus the number of leading one bits
    of the raw hash. Since ``1 - h`` is uniform whenever ``h`` is, this has the
    distribution of the usual leftmost-one-bit position of the minimum hash.
    Empty slots give 0; values are capped at 64.
    """
    leading_ones = 64 - _bit_length_u64(~regs.raw)
    values = np.minimum(leading_ones + 1, MAX_REGISTER)
    return np.where(regs.filled, values, 0)


def register_value(slot) -> int:
    """Scalar form of :func:`register_values` for a :class:`UnitHash` or None."""
    if slot is None:
        return 0
    complement = ((1 << 64) - 1) ^ slot.raw
    return min(64 - complement.bit_length() + 1, MAX_REGISTER)


def hll_estimate(regs: Registers, small_range_correction: bool = False) -> float:
    """Raw HyperLogLog estimate ``alpha_m * m**2 / sum(2**-C_j)``.

    With ``small_range_correction`` the linear-counting estimate
    ``m * ln(m / V)`` replaces the raw one when the raw estimate is at most
    ``2.5 m`` and ``V`` buckets are empty.
    """
    m = regs.m
    c = register_values(regs)
    estimate = alpha_m(m) * m * m / float(np.sum(np.ldexp(1.0, -c)))
    if small_range_correction and estimate <= 2.5 * m:
        empty = int(np.count_nonzero(c == 0))
        if empty:
            return m * math.log(m / empty)
    return estimate


def good_turing(sub: BottomUSample) -> GoodTuringStats:
    """Singleton fraction of the subsample window: ``|U1| / l``."""
    if len(sub) == 0:
        raise EmptySketch("subsample is empty")
    singletons = int(np.count_nonzero(sub.counts == 1))
    total = int(sub.counts.sum())
    return GoodTuringStats(singletons, total, singletons / total, 1, len(sub))


def scale_factor(p0_hat: float) -> float:
    if p0_hat >= 1.0:
        raise SampleTooSparse("estimated unseen fraction is 1; no correction possible")
    return 1.0 / (1.0 - p0_hat)


def _require_data(sketch: MtsSketch):
    if sketch.is_empty or len(sketch.subsample) == 0:
        raise EmptySketch("sketch has no insertions")


def estimate_single(sketch: MtsSketch, small_range_correction: bool = False) -> EstimateReport:
    """Distinct count of the full stream from a sketch of its sample."""
    _require_data(sketch)
    n_s_hat = hll_estimate(sketch.registers, small_range_correction)
    gt = good_turing(sketch.subsample)
    scale = scale_factor(gt.p0_hat)
    return EstimateReport(
        value=n_s_hat * scale,
        algorithm="single",
        components={
            "n_s_hat": n_s_hat,
            "p0_hat": gt.p0_hat,
            "singletons": gt.singletons,
            "total_occurrences": gt.total_occurrences,
            "scale": scale,
        },
    )


def estimate_union(a: MtsSketch, b: MtsSketch, small_range_correction: bool = False) -> EstimateReport:
    report = estimate_single(merge_all([a, b]), small_range_correction)
    report.algorithm = "union"
    return report


def estimate_d(target: BottomUSample, merged: BottomUSample) -> float:
    """Fraction of the merged window's distinct elements retained by ``target``.

    Every element below the merged threshold that occurs in the target's
    sampled stream is retained by the target, so presence is exact membership.
    """
    if len(merged) == 0:
        raise EmptySketch("merged subsample is empty")
    return int(np.count_nonzero(target.contains_many(merged.ids))) / len(merged)


def _retention_ratio(p0_side: float, p0_union: float) -> float:
    # (1 - p0_union) / (1 - p0_side); division keeps identical inputs exactly 1
    scale_factor(p0_side)
    return (1.0 - p0_union) / (1.0 - p0_side)


def jaccard_from_components(p0_a, p0_b, p0_union, d_a, d_b) -> float:
    """``(d_A / (1 - P0_A) + d_B / (1 - P0_B)) * (1 - P0_union) - 1``."""
    return (d_a * _retention_ratio(p0_a, p0_union)
            + d_b * _retention_ratio(p0_b, p0_union) - 1.0)


def rho_gt_from_components(p0_b, p0_union, d_b) -> float:
    """``1 - d_B / (1 - P0_B) * (1 - P0_union)``: share of A \\ B in the union."""
    return 1.0 - d_b * _retention_ratio(p0_b, p0_union)


def _pair_components(a, b, small_range_correction=False):
    check_compatible([a, b])
    _require_data(a)
    _require_data(b)
    merged = merge_all([a, b])
    gt_a, gt_b = good_turing(a.subsample), good_turing(b.subsample)
    gt_u = good_turing(merged.subsample)
    return merged, {
        "p0_a": gt_a.p0_hat,
        "p0_b": gt_b.p0_hat,
        "p0_union": gt_u.p0_hat,
        "d_a": estimate_d(a.subsample, merged.subsample),
        "d_b": estimate_d(b.subsample, merged.subsample),
        "f": len(merged.subsample),
    }


def estimate_jaccard_pair(a: MtsSketch, b: MtsSketch) -> float:
    _, c = _pair_components(a, b)
    return jaccard_from_components(c["p0_a"], c["p0_b"], c["p0_union"], c["d_a"], c["d_b"])


def estimate_rho_gt(a: MtsSketch, b: MtsSketch) -> float:
    _, c = _pair_components(a, b)
    return rho_gt_from_components(c["p0_b"], c["p0_union"], c["d_b"])


def _pair_report(a, b, algorithm, small_range_correction):
    merged, comps = _pair_components(a, b)
    union = estimate_single(merged, small_range_correction)
    if algorithm == "intersection":
        rho = jaccard_from_components(
            comps["p0_a"], comps["p0_b"], comps["p0_union"], comps["d_a"], comps["d_b"])
        comps["rho_hat"] = rho
    else:
        rho = rho_gt_from_components(comps["p0_b"], comps["p0_union"], comps["d_b"])
        comps["rho_gt_hat"] = rho
    comps["union_hat"] = union.value
    comps["n_s_union_hat"] = union.components["n_s_hat"]
    comps["scale_union"] = union.components["scale"]
    return EstimateReport(value=union.value * rho, algorithm=algorithm, components=comps)


def estimate_intersection(a: MtsSketch, b: MtsSketch,
                          small_range_correction: bool = False) -> EstimateReport:
    """``|A ∪ B|`` estimate times the sampled-Jaccard estimate."""
    return _pair_report(a, b, "intersection", small_range_correction)


def estimate_difference(a: MtsSketch, b: MtsSketch,
                        small_range_correction: bool = False) -> EstimateReport:
    """``|A \\ B|``: union estimate times the estimated share of A-only elements."""
    return _pair_report(a, b, "difference", small_range_correction)


def bucket_indicators(register_sets, expr: SetExpr):
    """Per-bucket expression indicators and the mask of counted buckets.

    In each bucket, stream i "owns" the maximum if its slot is filled and
    equals the largest filled slot across streams. The indicator is the
    expression evaluated on that ownership vector. Buckets empty in every
    stream are not counted.
    """
    raws = np.stack([r.raw for r in register_sets])
    filled = np.stack([r.filled for r in register_sets])
    if arity(expr) > len(register_sets):
        raise BindingError(f"expression needs {arity(expr)} streams, got {len(register_sets)}")
    top = np.where(filled, raws, np.uint64(0)).max(axis=0)
    owns = filled & (raws == top)
    counted = filled.any(axis=0)
    return membership_mask(expr, owns) & counted, counted


def rho_g(register_sets, expr: SetExpr) -> float:
    """Fraction of non-empty buckets whose maximal element satisfies ``expr``."""
    register_sets = list(register_sets)
    if len({r.m for r in register_sets}) != 1:
        raise ValueError("register sets differ in size")
    indicators, counted = bucket_indicators(register_sets, expr)
    n_counted = int(np.count_nonzero(counted))
    if n_counted == 0:
        raise EmptySketch("all buckets are empty in every stream")
    return int(np.count_nonzero(indicators)) / n_counted


def expression_window(subsamples, expr: SetExpr):
    """Merged k-way window and the boolean mask of its elements satisfying expr."""
    subsamples = list(subsamples)
    merged = merge_bottom_u(subsamples)
    present = np.stack([s.contains_many(merged.ids) for s in subsamples])
    return merged, membership_mask(expr, present)


def estimate_p0_expression(subsamples, expr: SetExpr) -> GoodTuringStats:
    """Good-Turing unseen fraction restricted to the expression's elements.

    The k subsamples are merged into one bottom-u window. Elements whose
    per-stream presence satisfies ``expr`` form ``U_X``; an element's
    frequency is its merged count. With ``f1`` the smallest such frequency,
    the estimate is ``#{freq == f1} / sum(freq)``.
    """
    subsamples = list(subsamples)
    if arity(expr) > len(subsamples):
        raise BindingError(f"expression needs {arity(expr)} streams, got {len(subsamples)}")
    merged, mask = expression_window(subsamples, expr)
    freqs = merged.counts[mask]
    if len(freqs) == 0:
        raise ExpressionSampleEmpty("no subsample element satisfies the expression")
    f1 = int(freqs.min())
    at_min = int(np.count_nonzero(freqs == f1))
    total = int(freqs.sum())
    return GoodTuringStats(at_min, total, at_min / total, f1, len(freqs))


def estimate_expression(sketches, expr: SetExpr,
                        small_range_correction: bool = False) -> EstimateReport:
    """Any set expression over k sketches: rho_G * |S_union| * 1/(1 - P0_X).

    An empty expression window yields an estimate of 0 with a warning.
    """
    sketches = list(sketches)
    check_compatible(sketches)
    if arity(expr) > len(sketches):
        raise BindingError(f"expression needs {arity(expr)} streams, got {len(sketches)}")
    for s in sketches:
        _require_data(s)
    merged = merge_all(sketches)
    rho = rho_g([s.registers for s in sketches], expr)
    n_s_union = hll_estimate(merged.registers, small_range_correction)
    comps = {"rho_g_hat": rho, "n_s_union_hat": n_s_union}
    try:
        gt = estimate_p0_expression([s.subsample for s in sketches], expr)
    except ExpressionSampleEmpty as exc:
        comps.update(p0_x_hat=None, scale=None, x_distinct=0)
        return EstimateReport(0.0, "expression", comps, [f"ExpressionSampleEmpty: {exc}"])
    scale = scale_factor(gt.p0_hat)
    comps.update(
        p0_x_hat=gt.p0_hat,
        x_min_frequency=gt.min_frequency,
        x_at_min=gt.singletons,
        x_total_occurrences=gt.total_occurrences,
        x_distinct=gt.distinct,
        scale=scale,
    )
    return EstimateReport(rho * n_s_union * scale, "expression", comps)


def estimate(sketches, expr: SetExpr, small_range_correction: bool = False) -> EstimateReport:
    """Dispatch to the specialised estimator when the expression has one.

    One leaf uses the single-stream estimator; ``A | B``, ``A & B`` and
    ``A - B`` over two distinct streams use the two-stream estimators;
    everything else uses the general k-stream estimator.
    """
    sketches = list(sketches)
    if isinstance(expr, Leaf):
        return estimate_single(sketches[expr.index], small_range_correction)
    if (isinstance(expr.left, Leaf) and isinstance(expr.right, Leaf)
            and expr.left.index != expr.right.index):
        a, b = sketches[expr.left.index], sketches[expr.right.index]
        op = expr.op.name
        if op == "UNION":
            return estimate_union(a, b, small_range_correction)
        if op == "INTERSECT":
            return estimate_intersection(a, b, small_range_correction)
        return estimate_difference(a, b, small_range_correction)
    return estimate_expression(sketches, expr, small_range_correction)
