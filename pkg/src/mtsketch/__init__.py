"""Distinct counting over set expressions of Bernoulli-sampled streams.

An :class:`MtsSketch` keeps per-bucket maximal hashes (for HyperLogLog and
Jaccard-style bucket indicators) together with a bottom-u subsample with
occurrence counts (for Good-Turing estimates of the unseen fraction).
Sketches built under the same :class:`SketchConfig` merge exactly.
"""

from .errors import (
    BindingError,
    ConfigurationError,
    CorruptSketch,
    EmptySketch,
    ExprSyntaxError,
    ExpressionSampleEmpty,
    IncompatibleSketches,
    MtsError,
    SampleTooSparse,
    SpecificationError,
)
from .estimators import (
    EstimateReport,
    alpha_m,
    estimate,
    estimate_difference,
    estimate_expression,
    estimate_intersection,
    estimate_single,
    estimate_union,
    good_turing,
    hll_estimate,
    rho_g,
)
from .expr import Leaf, Node, Op, exact_eval, format_expr, parse
from .hashing import SeedSet, UnitHash, bucket_of, value_hash
from .sketch import (
    BottomUSample,
    MtsSketch,
    Registers,
    SketchConfig,
    deserialize,
    merge,
    merge_all,
    new_sketch,
    serialize,
)

__version__ = "0.1.0"
