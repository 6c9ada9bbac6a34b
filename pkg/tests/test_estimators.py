import math

import mpmath
import numpy as np
import pytest

from mtsketch.errors import (
    BindingError,
    EmptySketch,
    IncompatibleSketches,
    SampleTooSparse,
)
from mtsketch.estimators import (
    alpha_m,
    bucket_indicators,
    estimate,
    estimate_difference,
    estimate_expression,
    estimate_intersection,
    estimate_jaccard_pair,
    estimate_p0_expression,
    estimate_rho_gt,
    estimate_single,
    estimate_union,
    good_turing,
    hll_estimate,
    jaccard_from_components,
    register_value,
    register_values,
    rho_g,
    rho_gt_from_components,
    scale_factor,
)
from mtsketch.expr import Leaf, parse
from mtsketch.hashing import SeedSet, UnitHash
from mtsketch.sketch import MtsSketch, Registers, SketchConfig

CONFIG = SketchConfig(m=64, u=200)


def sketch_of(ids, counts=None, config=CONFIG):
    s = MtsSketch(config)
    ids = np.asarray(ids, dtype=np.uint64)
    s.update_counts(ids, np.ones(len(ids), dtype=np.int64) if counts is None else counts)
    return s


def alpha_oracle(m):
    mpmath.mp.dps = 30
    integral = mpmath.quad(lambda u: mpmath.log((2 + u) / (1 + u), 2) ** m, [0, 1, 10, mpmath.inf])
    return float(1 / (m * integral))


@pytest.mark.parametrize("m", [16, 32, 64, 100, 128, 256, 1024, 4096])
def test_alpha_m_matches_adaptive_oracle(m):
    assert alpha_m(m) == pytest.approx(alpha_oracle(m), abs=1e-6)


def test_alpha_16():
    assert abs(alpha_m(16) - 0.673) < 1e-3
    # large-m limit 1 / (2 ln 2)
    assert alpha_m(1 << 16) == pytest.approx(1 / (2 * math.log(2)), abs=2e-5)


def test_register_values():
    assert register_value(None) == 0
    assert register_value(UnitHash(0)) == 1
    assert register_value(UnitHash(1 << 63)) == 2  # h = 0.5
    assert register_value(UnitHash(3 << 62)) == 3  # h = 0.75
    assert register_value(UnitHash((1 << 64) - 1)) == 64
    regs = Registers(16)
    raws = [0, 1 << 63, 3 << 62, (1 << 64) - 1, (1 << 64) - 2]
    regs.observe(np.arange(5), np.array(raws, dtype=np.uint64))
    assert register_values(regs).tolist() == [1, 2, 3, 64, 64] + [0] * 11


def test_register_values_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    regs = Registers(1024)
    raws = rng.integers(0, 2**64, size=1024, dtype=np.uint64)
    raws[:10] = np.uint64(2**64 - 1) - np.arange(10, dtype=np.uint64) * np.uint64(2**40)
    regs.observe(np.arange(1024), raws)
    assert register_values(regs).tolist() == [register_value(regs.slot(j)) for j in range(1024)]


def test_hll_unsampled_accuracy():
    rng = np.random.default_rng(3)
    errs = []
    for _ in range(30):
        ids = rng.integers(0, 2**64, size=20_000, dtype=np.uint64)
        s = sketch_of(ids, config=SketchConfig(256, 100))
        errs.append(hll_estimate(s.registers) / 20_000 - 1)
    assert abs(np.mean(errs)) < 0.03
    assert np.std(errs) < 2 * 1.04 / 16


def test_small_range_correction_only_when_asked():
    s = sketch_of(np.arange(10), config=SketchConfig(256, 100))
    raw = hll_estimate(s.registers)
    corrected = hll_estimate(s.registers, small_range_correction=True)
    assert corrected != raw
    assert abs(corrected - 10) < 1.0


def test_good_turing_examples():
    s = sketch_of([1, 2, 3, 4], [1, 1, 2, 4])
    gt = good_turing(s.subsample)
    assert gt.singletons == 2 and gt.total_occurrences == 8
    assert gt.p0_hat == 0.25
    assert scale_factor(0.25) == pytest.approx(4 / 3)


def test_all_singletons_is_too_sparse():
    s = sketch_of([1, 2, 3])
    with pytest.raises(SampleTooSparse):
        estimate_single(s)


def test_empty_sketch():
    with pytest.raises(EmptySketch):
        estimate_single(MtsSketch(CONFIG))
    with pytest.raises(EmptySketch):
        estimate_intersection(MtsSketch(CONFIG), sketch_of([1, 2], [2, 2]))


def test_incompatible_pair():
    a = sketch_of([1, 2], [2, 2])
    b = sketch_of([1, 2], [2, 2], SketchConfig(64, 200, SeedSet(1, 1)))
    with pytest.raises(IncompatibleSketches):
        estimate_intersection(a, b)


def test_no_singletons_means_no_correction():
    ids = np.arange(5000, dtype=np.uint64)
    s = sketch_of(ids, np.full(5000, 3), SketchConfig(256, 500))
    rep = estimate_single(s)
    assert rep.components["p0_hat"] == 0.0
    assert rep.components["scale"] == 1.0
    assert rep.value == rep.components["n_s_hat"]


def test_single_estimate_close_on_sampled_stream():
    rng = np.random.default_rng(5)
    vals = []
    for _ in range(20):
        ids = rng.integers(0, 2**64, size=10_000, dtype=np.uint64)
        counts = rng.binomial(rng.integers(10, 101, size=10_000), 0.1)
        vals.append(estimate_single(sketch_of(ids, counts, SketchConfig(100, 1000))).value)
    # Good-Turing under-corrects by a few percent here (occurrence-weighted mass)
    assert 0.9 < np.mean(vals) / 10_000 < 1.02


def test_component_identities_are_exact():
    for p0 in (0.0, 0.013, 0.3, 0.77):
        assert jaccard_from_components(p0, p0, p0, 1.0, 1.0) == 1.0
        assert rho_gt_from_components(p0, p0, 1.0) == 0.0
    # disjoint streams with equal unseen fractions
    assert jaccard_from_components(0.1, 0.1, 0.1, 0.5, 0.5) == 0.0


def test_identical_sketches_without_singletons_give_exact_jaccard():
    ids = np.arange(3000, dtype=np.uint64)
    s = sketch_of(ids, np.full(3000, 2))
    t = sketch_of(ids, np.full(3000, 2))
    assert estimate_jaccard_pair(s, t) == 1.0
    assert estimate_rho_gt(s, t) == 0.0


def test_intersection_and_difference_report_components():
    rng = np.random.default_rng(8)
    ids = rng.integers(0, 2**64, size=6000, dtype=np.uint64)
    a_ids, b_ids = ids[:4000], ids[2000:]
    a = sketch_of(a_ids, rng.integers(1, 5, size=4000))
    b = sketch_of(b_ids, rng.integers(1, 5, size=4000))
    inter = estimate_intersection(a, b)
    diff = estimate_difference(a, b)
    union = estimate_union(a, b)
    assert inter.value == pytest.approx(union.value * inter.components["rho_hat"])
    assert diff.value == pytest.approx(union.value * diff.components["rho_gt_hat"])
    for key in ("p0_a", "p0_b", "p0_union", "d_a", "d_b", "f"):
        assert key in inter.components
    assert inter.to_dict()["value"] == inter.value
    assert '"algorithm": "intersection"' in inter.to_json()


def test_rho_g_and_bucket_indicators():
    config = SketchConfig(16, 8)
    a = sketch_of(np.arange(100), config=config)
    b = sketch_of(np.arange(100), config=config)
    regs = [a.registers, b.registers]
    assert rho_g(regs, parse("A & B")) == 1.0
    assert rho_g(regs, parse("A - B")) == 0.0
    empty = Registers(16)
    ind, counted = bucket_indicators([a.registers, empty], parse("A - B"))
    assert ind.tolist() == counted.tolist()
    with pytest.raises(EmptySketch):
        rho_g([Registers(16), Registers(16)], parse("A | B"))
    with pytest.raises(BindingError):
        rho_g(regs, parse("A & C", ["A", "B", "C"]))


def test_k1_expression_equals_single_components():
    rng = np.random.default_rng(2)
    ids = rng.integers(0, 2**64, size=5000, dtype=np.uint64)
    s = sketch_of(ids, rng.integers(1, 4, size=5000))
    one = estimate_single(s)
    gen = estimate_expression([s], Leaf(0))
    assert gen.components["rho_g_hat"] == 1.0
    assert gen.components["n_s_union_hat"] == one.components["n_s_hat"]
    assert gen.components["p0_x_hat"] == one.components["p0_hat"]
    assert gen.value == one.value


def test_p0_expression_min_frequency_rule():
    config = SketchConfig(16, 100)
    a = sketch_of([1, 2, 3], [2, 3, 2], config)
    b = sketch_of([1, 2, 4], [2, 3, 5], config)
    gt = estimate_p0_expression([a.subsample, b.subsample], parse("A & B"))
    # merged frequencies of {1, 2} are 4 and 6
    assert (gt.min_frequency, gt.singletons, gt.total_occurrences) == (4, 1, 10)


def test_expression_sample_empty_gives_zero_with_warning():
    config = SketchConfig(16, 100)
    a = sketch_of([1, 2, 3], [2, 2, 2], config)
    b = sketch_of([4, 5, 6], [2, 2, 2], config)
    c = sketch_of([7], [2], config)
    rep = estimate_expression([a, b, c], parse("(A & B) - C"))
    assert rep.value == 0.0
    assert rep.warnings and rep.warnings[0].startswith("ExpressionSampleEmpty")


def test_dispatch():
    rng = np.random.default_rng(4)
    ids = rng.integers(0, 2**64, size=3000, dtype=np.uint64)
    sk = [sketch_of(ids[i * 1000:(i + 2) * 1000], rng.integers(1, 4, size=2000))
          for i in range(2)]
    sk.append(sketch_of(ids[:500], rng.integers(1, 4, size=500)))
    assert estimate(sk, parse("A")).algorithm == "single"
    assert estimate(sk, parse("A | B")).algorithm == "union"
    assert estimate(sk, parse("A & B")).algorithm == "intersection"
    assert estimate(sk, parse("A - B")).algorithm == "difference"
    assert estimate(sk, parse("(A & B) - C")).algorithm == "expression"
    assert estimate(sk, parse("A & A")).algorithm == "expression"
