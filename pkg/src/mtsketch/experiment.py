"""Monte Carlo harness: generate, sample, sketch, estimate, compare with analysis.

Each grid point (an overlap fraction, or ``|A ∩ B|`` for the three-stream
scenario) is repeated ``runs`` times with fresh elements, frequencies and
samples. A row reports the empirical bias and relative variance of the
estimates next to the mean analysis variance over the same runs.

Config files are flat ``key = value`` text. Recognised keys::

    scenario      two_stream | three_stream        (two_stream)
    a             distinct elements of A            (10000)
    ratio         |B| / |A|                         (1)
    alpha_list    comma-separated overlaps          (0.1,0.3,0.5,0.7,0.9)
    ab_list       |A ∩ B| grid, three_stream only   (1500,2000,...,8500)   
    dist          uniform | pareto                  (uniform)
    uniform_lo, uniform_hi                          (10, 100)
    pareto_shape, pareto_scale                      (1.5, 50)
    P             sampling rate                     (0.1)
    m, u          sketch size                       (100, 1000)
    subsample     occurrences | distinct            (occurrences)
    runs          repetitions per grid point, >= 2  (200)
    seed          master seed                       (0)
    expr          expression for "expression"       ((A & B) - C)
    algorithms    comma-separated list              (intersection,difference)
    workers       worker processes                  (1)

Algorithm names are ``single``, ``union``, ``intersection``, ``difference``
and ``expression``; ``alg1`` to ``alg5`` are accepted as aliases.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import estimators as est
from .analysis import relative_variances
from .errors import MtsError, SpecificationError
from .expr import format_expr, parse
from .sketch import MtsSketch, SketchConfig
from .workload import Pareto, Uniform, WorkloadSpec, generate, oracle_quantities, sample_counts

ALGORITHMS = ("single", "union", "intersection", "difference", "expression")
_ALIASES = {f"alg{i + 1}": name for i, name in enumerate(ALGORITHMS)}
_PAIR_EXPR = {"single": "A", "union": "A | B", "intersection": "A & B", "difference": "A - B"}


@dataclass
class ExperimentSpec:
    scenario: str = "two_stream"
    a: int = 10_000
    ratio: float = 1.0
    alpha_list: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    ab_list: tuple = (1500, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 8500)
    dist: str = "uniform"
    uniform_lo: int = 10
    uniform_hi: int = 100
    pareto_shape: float = 1.5
    pareto_scale: int = 50
    P: float = 0.1
    m: int = 100
    u: int = 1000
    subsample: str = "occurrences"
    runs: int = 200
    seed: int = 0
    expr: str = "(A & B) - C"
    algorithms: tuple = ("intersection", "difference")
    workers: int = 1

    def __post_init__(self):
        self.algorithms = tuple(_ALIASES.get(a, a) for a in self.algorithms)
        self.validate()

    def validate(self):
        if self.scenario not in ("two_stream", "three_stream"):
            raise SpecificationError(f"unknown scenario {self.scenario!r}")
        if self.runs < 2:
            raise SpecificationError(f"runs must be >= 2, got {self.runs}")
        if not self.grid:
            raise SpecificationError("empty parameter grid")
        if not self.algorithms:
            raise SpecificationError("no algorithms requested")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise SpecificationError(f"unknown algorithm {name!r}")
        if self.dist not in ("uniform", "pareto"):
            raise SpecificationError(f"unknown dist {self.dist!r}")
        if self.workers < 1:
            raise SpecificationError("workers must be >= 1")
        self.sketch_config  # validates m, u, subsample
        self.freq_model
        if "expression" in self.algorithms:
            try:
                parse(self.expr, self.stream_names)
            except ValueError as exc:
                raise SpecificationError(f"expr: {exc}") from None
        grid_key = "ab_list" if self.scenario == "three_stream" else "alpha_list"
        for g in range(len(self.grid)):
            try:
                self.workload(g)
            except SpecificationError as exc:
                raise SpecificationError(f"{grid_key}: {exc}") from None

    @property
    def grid(self):
        return tuple(self.ab_list if self.scenario == "three_stream" else self.alpha_list)

    @property
    def stream_names(self):
        return ("A", "B", "C") if self.scenario == "three_stream" else ("A", "B")

    @property
    def freq_model(self):
        if self.dist == "uniform":
            return Uniform(self.uniform_lo, self.uniform_hi)
        return Pareto(self.pareto_shape, self.pareto_scale)

    @property
    def sketch_config(self):
        try:
            return SketchConfig(self.m, self.u, subsample=self.subsample)
        except ValueError as exc:
            raise SpecificationError(str(exc)) from None

    def workload(self, grid_index: int) -> WorkloadSpec:
        param = self.grid[grid_index]
        seed = int(np.random.SeedSequence([self.seed, grid_index]).generate_state(1, np.uint64)[0])
        if self.scenario == "three_stream":
            return WorkloadSpec.three_stream(int(param), a=self.a, b=self.a, c=self.a,
                                             freq_model=self.freq_model,
                                             sampling_rate=self.P, master_seed=seed)
        return WorkloadSpec.two_stream(self.a, self.ratio, float(param), self.freq_model,
                                       self.P, seed)

    def expr_text(self, algorithm: str) -> str:
        if algorithm == "expression":
            return format_expr(parse(self.expr, self.stream_names), self.stream_names)
        return _PAIR_EXPR[algorithm]


@dataclass
class ExperimentRow:
    algorithm: str
    expr: str
    alpha: float
    runs: int
    true_n: int
    mean_estimate: float
    relative_bias: float
    relative_variance_empirical: float
    relative_variance_analysis: float
    rel_err_between_them: float


CSV_COLUMNS = tuple(f.name for f in fields(ExperimentRow))

# ---------------------------------------------------------------- config


def _line_of(text: str, key: str):
    for number, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return number
    return None


def _list(value, cast):
    return tuple(cast(v.strip()) for v in value.split(",") if v.strip())


_CASTS = {
    "scenario": str, "a": int, "ratio": float,
    "alpha_list": lambda v: _list(v, float), "ab_list": lambda v: _list(v, int),
    "dist": str, "uniform_lo": int, "uniform_hi": int,
    "pareto_shape": float, "pareto_scale": int,
    "P": float, "m": int, "u": int, "subsample": str, "runs": int, "seed": int,
    "expr": str, "algorithms": lambda v: _list(v, str), "workers": int,
}


def parse_experiment_spec(text: str, **overrides) -> ExperimentSpec:
    """Parse a flat ``key = value`` experiment config; errors name the line."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"),
                                       comment_prefixes=("#", ";"))
    parser.optionxform = str
    body = text if text.lstrip().startswith("[") else "[experiment]\n" + text
    offset = 0 if body is text else 1
    try:
        parser.read_string(body)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise SpecificationError(f"malformed config: {exc.message.splitlines()[0]}",
                                 None if line is None else line - offset) from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            line = _line_of(text, key)
            if key not in _CASTS:
                raise SpecificationError(f"unknown key {key!r}", line)
            try:
                values[key] = _CASTS[key](raw)
            except ValueError:
                raise SpecificationError(f"bad value {raw!r} for {key!r}", line) from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentSpec(**values)
    except SpecificationError as exc:
        if exc.line is not None:
            raise
        # blame the longest config key named in the message
        named = [k for k in values if re.search(rf"\b{re.escape(k)}\b", str(exc))]
        culprit = max(named, key=len, default=None)
        line = _line_of(text, culprit) if culprit else None
        raise SpecificationError(str(exc), line) from None
    except ValueError as exc:
        raise SpecificationError(str(exc)) from None


def load_experiment_spec(path, **overrides) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_experiment_spec(fh.read(), **overrides)

# ---------------------------------------------------------------- runs


def _estimate(algorithm, sketches, expr):
    if algorithm == "single":
        return est.estimate_single(sketches[0])
    if algorithm == "union":
        return est.estimate_union(sketches[0], sketches[1])
    if algorithm == "intersection":
        return est.estimate_intersection(sketches[0], sketches[1])
    if algorithm == "difference":
        return est.estimate_difference(sketches[0], sketches[1])
    return est.estimate_expression(sketches, expr)


def _true_n(algorithm, workload, expr):
    return workload.true_cardinality(parse(_PAIR_EXPR[algorithm], ("A", "B"))
                                     if algorithm != "expression" else expr)


def run_once(spec: ExperimentSpec, grid_index: int, run_index: int) -> dict:
    """One generate, sample, sketch, estimate cycle. Returns a JSON-able record."""
    wspec = spec.workload(grid_index)
    config = spec.sketch_config
    workload = generate(wspec, run_index)
    counts = sample_counts(workload)
    sketches = []
    for i in range(workload.k):
        sk = MtsSketch(config)
        sk.update_counts(workload.ids, counts[i])
        sketches.append(sk)
    expr = parse(spec.expr, spec.stream_names) if "expression" in spec.algorithms else None
    quantities = oracle_quantities(workload, counts, config, expr)
    try:
        analysis = relative_variances(quantities)
    except (ValueError, ZeroDivisionError):
        analysis = {}
    record = {"grid_index": grid_index, "param": spec.grid[grid_index], "run": run_index,
              "results": {}}
    for algorithm in spec.algorithms:
        entry = {"true_n": _true_n(algorithm, workload, expr),
                 "analysis_relative_variance": analysis.get(algorithm)}
        try:
            report = _estimate(algorithm, sketches, expr)
            entry["estimate"] = report.value
            entry["warnings"] = report.warnings
        except MtsError as exc:
            entry["estimate"] = None
            entry["error"] = f"{type(exc).__name__}: {exc}"
        record["results"][algorithm] = entry
    return record


def _task(args):
    return run_once(*args)


def run_records(spec: ExperimentSpec, workers: int = None):
    """All per-run records, ordered by (grid index, run index)."""
    tasks = [(spec, g, r) for g in range(len(spec.grid)) for r in range(spec.runs)]
    workers = spec.workers if workers is None else workers
    if workers <= 1:
        return [_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def summarize(spec: ExperimentSpec, records) -> list:
    """Collapse per-run records into one row per (algorithm, grid point).

    Runs whose estimator raised are left out of every statistic.
    """
    rows = []
    for algorithm in spec.algorithms:
        for g, param in enumerate(spec.grid):
            entries = [r["results"][algorithm] for r in records if r["grid_index"] == g]
            good = [e for e in entries if e["estimate"] is not None]
            true_n = entries[0]["true_n"] if entries else 0
            values = np.array([e["estimate"] for e in good], dtype=float)
            analysis = [e["analysis_relative_variance"] for e in good
                        if e["analysis_relative_variance"] is not None]
            nan = float("nan")
            if len(values) and true_n:
                mean = float(values.mean())
                bias = abs(mean / true_n - 1.0)
                emp = float(np.mean((values / true_n - mean / true_n) ** 2))
            else:
                mean, bias, emp = (float(values.mean()) if len(values) else nan), nan, nan
            ana = float(np.mean(analysis)) if analysis else nan
            rel = abs(emp - ana) / ana if ana and not math.isnan(ana) else nan
            rows.append(ExperimentRow(algorithm, spec.expr_text(algorithm), param, len(good),
                                      int(true_n), mean, bias, emp, ana, rel))
    return rows


def run_experiment(spec: ExperimentSpec, log=None, workers: int = None) -> list:
    """Run the whole grid. ``log`` receives one JSON object per run if given."""
    records = run_records(spec, workers)
    if log is not None:
        for record in records:
            log.write(json.dumps(record, sort_keys=True) + "\n")
    return summarize(spec, records)


def write_csv(rows, out=None) -> str:
    """Write rows with the fixed column order; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in asdict(row).values()])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def read_csv(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise SpecificationError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for raw in reader:
        out.append(ExperimentRow(
            raw["algorithm"], raw["expr"], float(raw["alpha"]), int(raw["runs"]),
            int(raw["true_n"]), *(float(raw[c]) for c in CSV_COLUMNS[5:])))
    return out
