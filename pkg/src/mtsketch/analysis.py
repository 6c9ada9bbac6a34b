"""Asymptotic means and variances of the MTS estimators.

Closed forms are evaluated on *realized* quantities (exact unseen fractions,
sampled distinct counts, window occupancy) as produced by
:func:`mtsketch.workload.oracle_quantities`. Each two-stream and k-stream
variance also has a ``*_composed`` twin that rebuilds it from the
component distributions (Good-Turing scale, d-ratios and their covariance,
Jaccard indicators, HyperLogLog) via the normal product rule; the two routes
must agree to rounding error whenever the inputs are realizable.

All variances are of raw estimates; divide by ``n**2`` for the relative
variance that the simulation tables report.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AnalysisInputs:
    """Realized quantities of one two- or k-stream scenario.

    ``window_distinct`` is the number of distinct elements in the merged
    bottom-u window (f); ``window_length`` its occurrence count. ``x_*``
    fields describe the expression target of the k-stream estimator, with
    ``x_window_length`` the size of the expression's window (g).
    """

    m: int
    u: int
    card_a: float = 0.0
    card_b: float = 0.0
    card_union: float = 0.0
    s_a: float = 0.0
    s_b: float = 0.0
    s_union: float = 0.0
    s_inter: float = 0.0
    p0_a: float = 0.0
    p0_b: float = 0.0
    p0_union: float = 0.0
    p1_a: float = 0.0
    p1_b: float = 0.0
    p1_union: float = 0.0
    window_distinct: float = 0.0
    window_length: float = 0.0
    # k-stream expression target
    n_x: float = 0.0
    s_x: float = 0.0
    p0_x: float = 0.0
    p1_x: float = 0.0
    x_window_length: float = 0.0
    s_union_all: float = 0.0

    def __post_init__(self):
        if self.window_length == 0:
            self.window_length = self.u

    @property
    def card_inter(self) -> float:
        return self.card_a + self.card_b - self.card_union

    @property
    def card_diff(self) -> float:
        return self.card_union - self.card_b


def expected_p0(freqs, P: float) -> float:
    """Expected unseen fraction under per-occurrence sampling at rate P."""
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size == 0:
        raise ValueError("freqs must be non-empty")
    if not 0 < P <= 1:
        raise ValueError("P must lie in (0, 1]")
    return float(np.mean(np.exp(-P * freqs)))


def expected_p1(freqs, P: float) -> float:
    """Expected fraction of distinct elements sampled exactly once."""
    freqs = np.asarray(freqs, dtype=float)
    if freqs.size == 0:
        raise ValueError("freqs must be non-empty")
    if not 0 < P <= 1:
        raise ValueError("P must lie in (0, 1]")
    return float(np.mean(P * freqs * np.exp(-P * freqs)))


def p01(p0: float, p1: float) -> float:
    return 2.0 * p0 * (1.0 - p0) + p1


def var_single(n, m, u, p0, p01_value) -> float:
    """Variance of the single-stream (and union) estimator."""
    return n * n / u * p01_value / (1.0 - p0) ** 2 + n * n / m


var_union = var_single


def var_jaccard(rho: float, m: int) -> float:
    """Variance of the mean of m Bernoulli(rho) bucket indicators."""
    return rho * (1.0 - rho) / m


def var_scale(p0: float, p01_value: float, length: float) -> float:
    """Variance of the Good-Turing scale 1/(1 - P0_hat) from a window of ``length``."""
    return p01_value / (length * (1.0 - p0) ** 4)


def var_d(d: float, f: float) -> float:
    """Variance of a d-ratio estimated from f distinct window elements."""
    return d * (1.0 - d) / f


def product_normal(mu_x, var_x, mu_y, var_y):
    """Mean and variance of the product of two uncorrelated normals."""
    return mu_x * mu_y, mu_y * mu_y * var_x + mu_x * mu_x * var_y


def _union_variance(x: AnalysisInputs, n: float) -> float:
    return (n * n / x.m
            + n * n / x.window_length * p01(x.p0_union, x.p1_union) / (1.0 - x.p0_union) ** 2)


def var_intersection(x: AnalysisInputs) -> float:
    """Closed-form variance of the intersection estimator."""
    n, f = x.card_inter, x.window_distinct
    if f <= 0:
        raise ValueError("window_distinct must be positive")
    return (_union_variance(x, n)
            - (n + x.card_union) ** 2 / f
            + (x.card_a * x.s_union / (1.0 - x.p0_a)
               + x.card_b * x.s_union / (1.0 - x.p0_b)
               + 2.0 * x.s_inter * x.s_union / ((1.0 - x.p0_a) * (1.0 - x.p0_b))) / f)


def var_difference(x: AnalysisInputs) -> float:
    """Closed-form variance of the difference (A minus B) estimator."""
    n, f = x.card_diff, x.window_distinct
    if f <= 0:
        raise ValueError("window_distinct must be positive")
    return (_union_variance(x, n)
            + (x.card_b * x.s_union / (1.0 - x.p0_b) - x.card_b ** 2) / f)


def var_expression(n, g, m, p0x, p01x, s_union) -> float:
    """Variance of the k-stream expression estimator."""
    if g <= 0:
        raise ValueError("g must be positive")
    return n * n / g * p01x / (1.0 - p0x) ** 2 + n * s_union / (m * (1.0 - p0x))


# -- composition from component distributions ----------------------------


def _side_variance(x: AnalysisInputs, s_side: float, p0_side: float) -> float:
    d = s_side / x.s_union
    return ((1.0 - x.p0_union) / (1.0 - p0_side)) ** 2 * var_d(d, x.window_distinct)


def cov_sides(x: AnalysisInputs) -> float:
    """Covariance of the A-side and B-side terms of the Jaccard estimator."""
    f = x.window_distinct
    cov_d = (x.s_inter / x.s_union - x.s_a * x.s_b / x.s_union ** 2) / f
    return (1.0 - x.p0_union) ** 2 / ((1.0 - x.p0_a) * (1.0 - x.p0_b)) * cov_d


def var_rho(x: AnalysisInputs) -> float:
    return (_side_variance(x, x.s_a, x.p0_a) + _side_variance(x, x.s_b, x.p0_b)
            + 2.0 * cov_sides(x))


def var_intersection_composed(x: AnalysisInputs) -> float:
    union_var = var_single(x.card_union, x.m, x.window_length, x.p0_union,
                           p01(x.p0_union, x.p1_union))
    _, v = product_normal(x.card_inter / x.card_union, var_rho(x), x.card_union, union_var)
    return v


def var_difference_composed(x: AnalysisInputs) -> float:
    union_var = var_single(x.card_union, x.m, x.window_length, x.p0_union,
                           p01(x.p0_union, x.p1_union))
    _, v = product_normal(x.card_diff / x.card_union, _side_variance(x, x.s_b, x.p0_b),
                          x.card_union, union_var)
    return v


def var_expression_composed(n, g, m, p0x, p01x, s_union) -> float:
    n_s = n * (1.0 - p0x)
    rho_g = n_s / s_union
    t_mean, t_var = product_normal(rho_g, var_jaccard(rho_g, m), s_union, s_union ** 2 / m)
    _, v = product_normal(t_mean, t_var, 1.0 / (1.0 - p0x), var_scale(p0x, p01x, g))
    return v


def relative_variances(x: AnalysisInputs) -> dict:
    """Relative (n-normalized) analysis variances available for ``x``."""
    out = {}
    if x.card_union > 0 and x.window_distinct > 0:
        out["union"] = _union_variance(x, x.card_union) / x.card_union ** 2
        if x.card_inter > 0:
            out["intersection"] = var_intersection(x) / x.card_inter ** 2
        if x.card_diff > 0:
            out["difference"] = var_difference(x) / x.card_diff ** 2
    if x.card_a > 0 and x.s_a > 0:
        out["single"] = var_single(x.card_a, x.m, x.u, x.p0_a, p01(x.p0_a, x.p1_a)) / x.card_a ** 2
    if x.n_x > 0 and x.x_window_length > 0 and x.p0_x < 1:
        out["expression"] = var_expression(
            x.n_x, x.x_window_length, x.m, x.p0_x, p01(x.p0_x, x.p1_x),
            x.s_union_all) / x.n_x ** 2
    return out
