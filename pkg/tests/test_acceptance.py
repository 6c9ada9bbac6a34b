"""Acceptance gate: every criterion at its stated tolerance.

Each test records a one-line verdict that ``conftest.py`` prints after the
run. The Monte Carlo criteria take a few minutes on one core.
"""

import math
import random

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE
from mtsketch.analysis import (
    AnalysisInputs,
    expected_p0,
    expected_p1,
    p01,
    var_difference,
    var_difference_composed,
    var_expression,
    var_expression_composed,
    var_intersection,
    var_intersection_composed,
)
from mtsketch.errors import EmptySketch, SampleTooSparse
from mtsketch.estimators import (
    alpha_m,
    estimate_expression,
    estimate_jaccard_pair,
    estimate_rho_gt,
    estimate_single,
    hll_estimate,
)
from mtsketch.experiment import ExperimentSpec, run_experiment
from mtsketch.expr import Leaf, Node, Op, exact_eval, format_expr, membership_eval, parse
from mtsketch.hashing import value_hash
from mtsketch.sketch import MtsSketch, SketchConfig, deserialize, merge, serialize
from mtsketch.workload import WorkloadSpec, generate, oracle_quantities, sample_counts

pytestmark = pytest.mark.slow

ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)
FAST = SketchConfig(100, 1000)


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    return ok


def by_alpha(rows, algorithm):
    return {r.alpha: r for r in rows if r.algorithm == algorithm}


@pytest.fixture(scope="module")
def table3_4_rows():
    return run_experiment(ExperimentSpec(runs=1000, seed=1003))


# -- 1 ---------------------------------------------------------------------


def test_c1_unbiasedness():
    rows = run_experiment(ExperimentSpec(runs=200, seed=1001))
    bad = []
    for r in rows:
        tol = max(0.05, 3 * math.sqrt(r.relative_variance_analysis / r.runs))
        if not r.relative_bias <= tol:
            bad.append(f"{r.algorithm} a={r.alpha} bias={r.relative_bias:.4f} tol={tol:.4f}")
    worst = max(rows, key=lambda r: r.relative_bias)
    record("1", not bad, "; ".join(bad) or
           f"max bias {worst.relative_bias:.4f} ({worst.algorithm} a={worst.alpha})")
    assert not bad, bad


# -- 2, 3 ------------------------------------------------------------------


def _variance_check(rows, algorithm, spots, emp_tol, spot_tol=0.15):
    table = by_alpha(rows, algorithm)
    problems = []
    for alpha in ALPHAS:
        r = table[alpha]
        if not r.rel_err_between_them <= emp_tol:
            problems.append(f"a={alpha} emp={r.relative_variance_empirical:.4f} "
                            f"ana={r.relative_variance_analysis:.4f}")
    for alpha, reference in spots.items():
        ana = table[alpha].relative_variance_analysis
        if not abs(ana / reference - 1) <= spot_tol:
            problems.append(f"spot a={alpha} ana={ana:.4f} vs {reference}")
    summary = ", ".join(f"a={a}: {table[a].relative_variance_empirical:.4f}/"
                        f"{table[a].relative_variance_analysis:.4f}" for a in ALPHAS)
    return problems, summary


def test_c2_intersection_variance(table3_4_rows):
    problems, summary = _variance_check(table3_4_rows, "intersection", {0.1: 0.1030, 0.9: 0.0128}, 0.30)
    record("2", not problems, "; ".join(problems) or f"emp/ana {summary}")
    assert not problems, problems


def test_c3_difference_variance(table3_4_rows):
    problems, summary = _variance_check(table3_4_rows, "difference", {0.1: 0.0170, 0.9: 0.1481}, 0.30)
    record("3", not problems, "; ".join(problems) or f"emp/ana {summary}")
    assert not problems, problems


# -- 4 ---------------------------------------------------------------------


def test_c4_size_ratio_three():
    rows = run_experiment(ExperimentSpec(runs=500, ratio=3.0, seed=1004))
    problems = [f"{r.algorithm} a={r.alpha} rel_err={r.rel_err_between_them:.3f}"
                for r in rows if not r.rel_err_between_them <= 0.35]
    worst = max(rows, key=lambda r: r.rel_err_between_them)
    record("4", not problems, "; ".join(problems) or
           f"max rel err {worst.rel_err_between_them:.3f} ({worst.algorithm} a={worst.alpha})")
    assert not problems, problems


# -- 5 ---------------------------------------------------------------------


def test_c5_three_stream_expression():
    spec = ExperimentSpec(scenario="three_stream", runs=500, algorithms=("expression",),
                          seed=1005)
    rows = run_experiment(spec)
    table = {int(r.alpha): r for r in rows}
    problems = []
    for ab, reference in ((2000, 0.2501), (8500, 0.0247)):
        ana = table[ab].relative_variance_analysis
        if not abs(ana / reference - 1) <= 0.15:
            problems.append(f"spot |AB|={ab} ana={ana:.4f} vs {reference}")
    for r in rows:
        if not r.rel_err_between_them <= 0.30:
            problems.append(f"|AB|={int(r.alpha)} rel_err={r.rel_err_between_them:.3f}")
    emp = [r.relative_variance_empirical for r in rows]
    if not all(x > y for x, y in zip(emp, emp[1:])):
        problems.append("empirical variance not strictly decreasing: "
                        + ", ".join(f"{v:.4f}" for v in emp))
    record("5", not problems, "; ".join(problems) or
           "emp/ana " + ", ".join(f"{int(r.alpha)}: {r.relative_variance_empirical:.4f}/"
                                  f"{r.relative_variance_analysis:.4f}" for r in rows))
    assert not problems, problems


# -- 6 ---------------------------------------------------------------------


def test_c6_hyperloglog_standard_error():
    rng = np.random.default_rng(1006)
    config = SketchConfig(256, 100)
    errs = []
    for _ in range(300):
        s = MtsSketch(config)
        s.update(rng.integers(0, 2**64, size=100_000, dtype=np.uint64))
        errs.append(hll_estimate(s.registers) / 100_000 - 1)
    sd = float(np.std(errs))
    target = 1.04 / math.sqrt(256)
    ok = 0.75 * target <= sd <= 1.35 * target
    record("6", ok, f"sd {sd:.4f} vs 1.04/sqrt(256) = {target:.4f} (mean err {np.mean(errs):+.4f})")
    assert ok


# -- 7 ---------------------------------------------------------------------


def test_c7_good_turing_formulas():
    spec = WorkloadSpec.two_stream(10_000, 1.0, 0.5, master_seed=1007)
    d0, d1 = [], []
    for run in range(200):
        w = generate(spec, run)
        x = oracle_quantities(w, sample_counts(w), FAST)
        freqs = w.freqs[w.membership[0]]
        d0.append(x.p0_a - expected_p0(freqs, 0.1))
        d1.append(x.p1_a - expected_p1(freqs, 0.1))
    m0, m1 = abs(np.mean(d0)), abs(np.mean(d1))
    ok = m0 <= 0.01 and m1 <= 0.01
    record("7", ok, f"|mean P0 gap| {m0:.5f}, |mean P1 gap| {m1:.5f}")
    assert ok


# -- 8 ---------------------------------------------------------------------


def _random_expr(rnd, leaves):
    if leaves == 1:
        return Leaf(rnd.randrange(4))
    left = rnd.randrange(1, leaves)
    return Node(rnd.choice(list(Op)), _random_expr(rnd, left), _random_expr(rnd, leaves - left))


def _naive_window(stream, config):
    key = lambda e: (value_hash(config.seeds, e).raw, e)
    out = {}
    for e in sorted(stream, key=key)[:config.u]:
        out[e] = out.get(e, 0) + 1
    return out


def test_c8_property_suite():
    rnd = random.Random(1008)
    failures = []
    small = SketchConfig(16, 8)

    def build(stream, config=small):
        s = MtsSketch(config)
        s.update(stream)
        return s

    def stream():
        return [rnd.randrange(60) for _ in range(rnd.randrange(120))]

    for _ in range(1000):
        a, b = stream(), stream()
        if merge(build(a), build(b)) != build(a + b):
            failures.append("merge != concatenation")
            break
    for _ in range(200):
        a, b, c = stream(), stream(), stream()
        sa, sb, sc = build(a), build(b), build(c)
        shuffled = a[:]
        rnd.shuffle(shuffled)
        if build(shuffled) != sa:
            failures.append("order dependence")
        if merge(sa, sb) != merge(sb, sa) or merge(merge(sa, sb), sc) != merge(sa, merge(sb, sc)):
            failures.append("merge not commutative/associative")
        got = {e: n for e, (_, n) in sa.subsample.entries.items()}
        if got != _naive_window(a, small):
            failures.append("bottom-u != naive oracle")
        if deserialize(serialize(sa)) != sa:
            failures.append("serialization round trip")
    for _ in range(500):
        sets = [set(rnd.sample(range(100), rnd.randrange(101))) for _ in range(4)]
        e = _random_expr(rnd, rnd.randrange(1, 8))
        universe = set().union(*sets)
        if exact_eval(e, sets) != {x for x in universe
                                   if membership_eval(e, [x in s for s in sets])}:
            failures.append("exact_eval != membership filter")
    names = ("A", "B", "C", "D")
    for i in range(10_000):
        e = _random_expr(rnd, rnd.randrange(1, 10))
        if parse(format_expr(e, names, unicode=i % 2 == 1), names) != e:
            failures.append("parser round trip")
            break
    for _ in range(300):
        a, b = rnd.uniform(100, 1e6), rnd.uniform(100, 1e6)
        inter = rnd.uniform(0.01, 0.99) * min(a, b)
        p0a, p0b, p0u, p1 = (rnd.uniform(0, 0.6) for _ in range(4))
        union = a + b - inter
        sa, sb, su = a * (1 - p0a), b * (1 - p0b), union * (1 - p0u)
        x = AnalysisInputs(m=100, u=1000, card_a=a, card_b=b, card_union=union,
                           s_a=sa, s_b=sb, s_union=su, s_inter=sa + sb - su,
                           p0_a=p0a, p0_b=p0b, p0_union=p0u, p1_a=p1, p1_b=p1, p1_union=p1,
                           window_distinct=rnd.randrange(10, 2000),
                           window_length=rnd.randrange(10, 5000))
        g, m = rnd.uniform(1, 1e4), rnd.randrange(16, 4096)
        args = (a, g, m, p0a, p01(p0a, p1), a * (1 - p0a) * rnd.uniform(1.01, 50))
        for closed, composed in ((var_intersection(x), var_intersection_composed(x)),
                                 (var_difference(x), var_difference_composed(x)),
                                 (var_expression(*args), var_expression_composed(*args))):
            if abs(closed - composed) > 1e-9 * abs(composed):
                failures.append("closed form != composition")
    mpmath.mp.dps = 30
    for m in (16, 64, 100, 256, 1024):
        oracle = 1 / (m * mpmath.quad(lambda u: mpmath.log((2 + u) / (1 + u), 2) ** m,
                                      [0, 1, 10, mpmath.inf]))
        if abs(alpha_m(m) - float(oracle)) > 1e-6:
            failures.append(f"alpha_{m} quadrature")
    if abs(alpha_m(16) - 0.673) > 1e-3:
        failures.append("alpha_16")
    failures = sorted(set(failures))
    record("8", not failures, "; ".join(failures) or "all properties hold")
    assert not failures, failures


# -- 9 ---------------------------------------------------------------------


def _fast_sketch(seed):
    w = generate(WorkloadSpec.two_stream(10_000, 1.0, 1.0, master_seed=seed))
    s = MtsSketch(FAST)
    s.update_counts(w.ids, sample_counts(w)[0])
    return s


def test_c9_degenerate_inputs():
    problems = []
    singles = MtsSketch(FAST)
    singles.update(np.arange(500, dtype=np.uint64))
    try:
        estimate_single(singles)
        problems.append("P0_hat = 1 did not raise SampleTooSparse")
    except SampleTooSparse:
        pass
    try:
        estimate_single(MtsSketch(FAST))
        problems.append("empty sketch did not raise EmptySketch")
    except EmptySketch:
        pass
    s = _fast_sketch(1009)
    one, gen = estimate_single(s), estimate_expression([s], Leaf(0))
    if (gen.value != one.value or gen.components["p0_x_hat"] != one.components["p0_hat"]
            or gen.components["n_s_union_hat"] != one.components["n_s_hat"]):
        problems.append("k=1 expression differs from single-stream estimate")
    rho, rho_gt = estimate_jaccard_pair(s, s.copy()), estimate_rho_gt(s, s.copy())
    if rho != 1.0 or rho_gt != 0.0:
        problems.append(f"identical streams: rho_hat={rho!r}, rho_gt_hat={rho_gt!r}")
    record("9", not problems, "; ".join(problems) or "all degenerate cases exact")
    assert not problems, problems


# -- Pareto self-consistency -------------------------------------------------


def test_pareto_self_consistency():
    rows = run_experiment(ExperimentSpec(runs=500, dist="pareto", pareto_shape=1.5,
                                         pareto_scale=50, seed=1010))
    problems = [f"{r.algorithm} a={r.alpha} rel_err={r.rel_err_between_them:.3f}"
                for r in rows if not r.rel_err_between_them <= 0.35]
    worst = max(rows, key=lambda r: r.rel_err_between_them)
    record("pareto", not problems, "; ".join(problems) or
           f"max rel err {worst.rel_err_between_them:.3f} ({worst.algorithm} a={worst.alpha})")
    assert not problems, problems
