"""Synthetic overlapping streams, Bernoulli sampling and exact oracles.

A workload is described by the sizes of its Venn regions. Every distinct
element draws one frequency, shared by all streams that contain it, and each
stream consists of its elements repeated that many times. Sampling thins
every occurrence independently with probability ``P``.

Randomness is derived from ``numpy.random.SeedSequence`` keyed on
``(master_seed, run_index, purpose)`` so that any run can be regenerated in
isolation, in any process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .analysis import AnalysisInputs
from .errors import SpecificationError
from .expr import SetExpr, exact_eval, membership_mask
from .hashing import SeedSet, value_hashes
from .sketch import SketchConfig

# SeedSequence purposes
GENERATE, SAMPLE, SHUFFLE = 0, 1, 2

DEFAULT_NAMES = ("A", "B", "C", "D", "E", "F", "G", "H")


def run_rng(master_seed: int, run_index: int, purpose: int, *extra: int) -> np.random.Generator:
    seq = np.random.SeedSequence([master_seed & (2**64 - 1), run_index, purpose, *extra])
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class Uniform:
    """Integer frequencies uniform on ``[lo, hi]``."""

    lo: int
    hi: int

    def __post_init__(self):
        if not 1 <= self.lo <= self.hi:
            raise SpecificationError(f"need 1 <= lo <= hi, got lo={self.lo} hi={self.hi}")

    def draw(self, rng, size):
        return rng.integers(self.lo, self.hi, size=size, endpoint=True)

    @property
    def mean(self):
        return (self.lo + self.hi) / 2


@dataclass(frozen=True)
class Pareto:
    """Heavy-tailed frequencies ``ceil(scale * Z**(-1/shape))``, Z ~ U(0, 1)."""

    shape: float
    scale: int

    def __post_init__(self):
        if self.shape <= 0 or self.scale < 1:
            raise SpecificationError(
                f"need shape > 0 and scale >= 1, got shape={self.shape} scale={self.scale}")

    def draw(self, rng, size):
        z = 1.0 - rng.random(size)  # in (0, 1]
        return np.ceil(self.scale * z ** (-1.0 / self.shape)).astype(np.int64)

    def cdf(self, k):
        """P(frequency <= k) of the rounded-up distribution."""
        k = np.floor(np.asarray(k, dtype=float))
        return np.where(k < self.scale, 0.0, 1.0 - (self.scale / np.maximum(k, 1)) ** self.shape)


@dataclass
class WorkloadSpec:
    """Venn-region sizes of k streams plus frequency and sampling models.

    ``region_cards`` maps a frozenset of stream indices to the number of
    distinct elements that belong to exactly those streams.
    """

    k: int
    region_cards: dict
    freq_model: object = field(default_factory=lambda: Uniform(10, 100))
    sampling_rate: float = 0.1
    master_seed: int = 0
    names: tuple = ()

    def __post_init__(self):
        self.region_cards = {frozenset(key): int(v) for key, v in self.region_cards.items()}
        if not self.names:
            self.names = DEFAULT_NAMES[:self.k]
        for key, v in self.region_cards.items():
            if not key or not all(0 <= i < self.k for i in key):
                raise SpecificationError(f"invalid region {sorted(key)} for k={self.k}")
            if v < 0:
                raise SpecificationError(f"region {sorted(key)} has negative size {v}")
        if not 0 < self.sampling_rate <= 1:
            raise SpecificationError(f"sampling rate must lie in (0, 1], got {self.sampling_rate}")

    @property
    def regions(self):
        """Regions in a fixed order: by size of the subset, then lexicographically."""
        out = []
        for size in range(1, self.k + 1):
            for combo in combinations(range(self.k), size):
                key = frozenset(combo)
                if self.region_cards.get(key, 0):
                    out.append(key)
        return out

    def stream_cards(self):
        return [sum(v for key, v in self.region_cards.items() if i in key) for i in range(self.k)]

    @classmethod
    def two_stream(cls, a: int, size_ratio: float = 1.0, alpha: float = 0.5,
                   freq_model=None, sampling_rate: float = 0.1, master_seed: int = 0):
        """``|A| = a``, ``|B| = a * size_ratio``, ``|A ∩ B| = a * alpha``."""
        inter = int(round(a * alpha))
        b = int(round(a * size_ratio))
        if not 0 <= alpha <= 1 or inter > b:
            raise SpecificationError(
                f"alpha={alpha} inconsistent with |A|={a}, |B|={b}")
        regions = {frozenset({0}): a - inter, frozenset({1}): b - inter,
                   frozenset({0, 1}): inter}
        return cls(2, regions, freq_model or Uniform(10, 100), sampling_rate, master_seed)

    @classmethod
    def three_stream(cls, ab: int, a: int = 10_000, b: int = 10_000, c: int = 10_000,
                     ac: int = 2_000, bc: int = 2_000, abc: int = 1_000,
                     freq_model=None, sampling_rate: float = 0.1, master_seed: int = 0):
        """Three streams with given pairwise and triple overlaps."""
        regions = {
            frozenset({0, 1, 2}): abc,
            frozenset({0, 1}): ab - abc,
            frozenset({0, 2}): ac - abc,
            frozenset({1, 2}): bc - abc,
            frozenset({0}): a - ab - ac + abc,
            frozenset({1}): b - ab - bc + abc,
            frozenset({2}): c - ac - bc + abc,
        }
        bad = {tuple(sorted(key)): v for key, v in regions.items() if v < 0}
        if bad:
            raise SpecificationError(f"inconsistent overlaps, negative regions {bad}")
        return cls(3, regions, freq_model or Uniform(10, 100), sampling_rate, master_seed)


@dataclass
class GeneratedWorkload:
    """Concrete elements of one run.

    ``membership[i, j]`` says whether element ``ids[j]`` belongs to stream i;
    ``freqs[j]`` is its occurrence count in every stream containing it.
    """

    spec: WorkloadSpec
    run_index: int
    ids: np.ndarray
    freqs: np.ndarray
    membership: np.ndarray
    region_of: np.ndarray

    @property
    def k(self):
        return self.spec.k

    def distinct_sets(self):
        return [set(self.ids[self.membership[i]].tolist()) for i in range(self.k)]

    def stream(self, i: int) -> np.ndarray:
        """Occurrence sequence of stream i in a deterministic shuffled order."""
        sel = self.membership[i]
        seq = np.repeat(self.ids[sel], self.freqs[sel])
        run_rng(self.spec.master_seed, self.run_index, SHUFFLE, i).shuffle(seq)
        return seq

    def streams(self):
        return [self.stream(i) for i in range(self.k)]

    def true_cardinality(self, expr: SetExpr) -> int:
        return int(np.count_nonzero(membership_mask(expr, self.membership)))


def _distinct_ids(rng, size):
    ids = rng.integers(0, 2**64, size=size, dtype=np.uint64)
    while len(np.unique(ids)) != size:
        ids = rng.integers(0, 2**64, size=size, dtype=np.uint64)
    return ids


def generate(spec: WorkloadSpec, run_index: int = 0) -> GeneratedWorkload:
    """Draw fresh element ids and frequencies for one run."""
    regions = spec.regions
    sizes = [spec.region_cards[r] for r in regions]
    total = sum(sizes)
    rng = run_rng(spec.master_seed, run_index, GENERATE)
    ids = _distinct_ids(rng, total)
    freqs = np.asarray(spec.freq_model.draw(rng, total), dtype=np.int64)
    region_of = np.repeat(np.arange(len(regions)), sizes)
    membership = np.zeros((spec.k, total), dtype=bool)
    for r, key in enumerate(regions):
        for i in key:
            membership[i, region_of == r] = True
    return GeneratedWorkload(spec, run_index, ids, freqs, membership, region_of)


def bernoulli_sample(stream: np.ndarray, P: float, seed) -> np.ndarray:
    """Keep each occurrence independently with probability P."""
    if not 0 < P <= 1:
        raise SpecificationError(f"P must lie in (0, 1], got {P}")
    stream = np.asarray(stream)
    if P == 1:
        return stream.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return stream[rng.random(len(stream)) < P]


def sample_counts(workload: GeneratedWorkload, P: float = None) -> np.ndarray:
    """Per-stream sampled occurrence counts, shape (k, N).

    Binomial thinning of each element's occurrences; identical in
    distribution to :func:`bernoulli_sample` on the occurrence sequence.
    """
    P = workload.spec.sampling_rate if P is None else P
    rng = run_rng(workload.spec.master_seed, workload.run_index, SAMPLE)
    counts = np.zeros(workload.membership.shape, dtype=np.int64)
    for i in range(workload.k):
        sel = workload.membership[i]
        counts[i, sel] = rng.binomial(workload.freqs[sel], P)
    return counts


def oracle_exact(streams: Sequence, expr: SetExpr) -> int:
    """Exact distinct count of ``expr`` over explicit streams (any iterables)."""
    return len(exact_eval(expr, [set(np.asarray(s).tolist()) for s in streams]))


def _window(ids, counts, seeds, u, mode):
    """Merged bottom-u window of ``counts > 0`` elements.

    Returns the positions of the window elements in ``ids`` (ascending hash)
    and their counts inside the window, the boundary element's count cut so
    that an occurrence window holds at most u occurrences.
    """
    live = np.flatnonzero(counts > 0)
    order = live[np.lexsort((ids[live], value_hashes(seeds, ids[live])))]
    kept = counts[order].astype(np.int64)
    if mode == "distinct":
        return order[:u], kept[:u]
    cum = np.cumsum(kept)
    n_in = min(int(np.searchsorted(cum, u, side="left")) + 1, len(kept))
    kept = kept[:n_in].copy()
    if n_in and cum[n_in - 1] > u:
        kept[-1] -= cum[n_in - 1] - u
    return order[:n_in], kept


def oracle_quantities(workload: GeneratedWorkload, counts: np.ndarray,
                      config: SketchConfig, expr: SetExpr = None) -> AnalysisInputs:
    """Realized inputs of the variance formulas, computed from explicit samples.

    Streams 0 and 1 play the roles of A and B. When ``expr`` is given, the
    k-stream fields describe it over all streams.
    """
    mem, freqs_sampled = workload.membership, counts
    seen = counts > 0
    u, mode, seeds = config.u, config.subsample, config.seeds
    x = AnalysisInputs(m=config.m, u=u)
    if workload.k >= 2:
        in_union = mem[0] | mem[1]
        pair_counts = counts[0] + counts[1]
        x.card_a, x.card_b = int(mem[0].sum()), int(mem[1].sum())
        x.card_union = int(in_union.sum())
        x.s_a, x.s_b = int(seen[0].sum()), int(seen[1].sum())
        x.s_union = int((seen[0] | seen[1]).sum())
        x.s_inter = int((seen[0] & seen[1]).sum())
        x.p0_a = (x.card_a - x.s_a) / x.card_a
        x.p0_b = (x.card_b - x.s_b) / x.card_b if x.card_b else 0.0
        x.p0_union = (x.card_union - x.s_union) / x.card_union
        x.p1_a = int((counts[0][mem[0]] == 1).sum()) / x.card_a
        x.p1_b = int((counts[1][mem[1]] == 1).sum()) / x.card_b if x.card_b else 0.0
        x.p1_union = int((pair_counts[in_union] == 1).sum()) / x.card_union
        pos, kept = _window(workload.ids, pair_counts, seeds, u, mode)
        x.window_distinct, x.window_length = len(pos), int(kept.sum())
    else:
        x.card_a = int(mem[0].sum())
        x.s_a = int(seen[0].sum())
        x.p0_a = (x.card_a - x.s_a) / x.card_a
        x.p1_a = int((counts[0][mem[0]] == 1).sum()) / x.card_a
    if expr is not None:
        in_x = membership_mask(expr, mem)
        total = freqs_sampled.sum(axis=0)
        x.n_x = int(in_x.sum())
        x.s_x = int(membership_mask(expr, seen).sum())
        x.s_union_all = int(seen.any(axis=0).sum())
        if x.n_x:
            x.p0_x = (x.n_x - x.s_x) / x.n_x
            x.p1_x = int((total[in_x] == 1).sum()) / x.n_x
        pos, kept = _window(workload.ids, total, seeds, u, mode)
        x.x_window_length = int(kept[membership_mask(expr, seen[:, pos])].sum())
    return x


def ks_distance_pareto(draws, model: Pareto) -> float:
    """Kolmogorov-Smirnov distance between integer draws and the model CDF."""
    draws = np.sort(np.asarray(draws))
    values, counts = np.unique(draws, return_counts=True)
    ecdf = np.cumsum(counts) / len(draws)
    ecdf_before = np.concatenate([[0.0], ecdf[:-1]])
    model_at = model.cdf(values)
    model_before = model.cdf(values - 1)
    return float(max(np.max(np.abs(ecdf - model_at)), np.max(np.abs(ecdf_before - model_before))))


def expected_mean_uniform(model: Uniform) -> float:
    return model.mean


def pareto_mean(model: Pareto) -> float:
    return math.inf if model.shape <= 1 else model.scale * model.shape / (model.shape - 1)
