"""``mts`` command line: build, merge and query sketch files; run experiments.

Exit codes: 0 success, 2 bad input or data (including empty sketches),
3 incompatible sketches, 4 degenerate estimate (sample too sparse, or no
subsample element satisfies the expression).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import (
    EmptySketch,
    ExpressionSampleEmpty,
    IncompatibleSketches,
    MtsError,
    SampleTooSparse,
)
from .estimators import estimate
from .experiment import load_experiment_spec, run_experiment, write_csv
from .expr import arity, parse_with_names
from .hashing import DEFAULT_BUCKET_SEED, DEFAULT_VALUE_SEED, SeedSet, ingest_id
from .sketch import SUBSAMPLE_MODES, MtsSketch, SketchConfig, deserialize, merge_all, serialize
from .workload import generate, sample_counts

EXIT_OK, EXIT_DATA, EXIT_INCOMPATIBLE, EXIT_DEGENERATE = 0, 2, 3, 4


def read_ids(path, strings=False, seed=0) -> np.ndarray:
    """Newline-delimited unsigned 64-bit ids (or arbitrary tokens with ``strings``)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, 1):
            token = line.strip()
            if not token:
                continue
            if strings:
                out.append(ingest_id(token, seed))
                continue
            try:
                value = int(token, 0)
            except ValueError:
                raise MtsError(f"{path}:{number}: not an integer id: {token!r}") from None
            if not 0 <= value < 2**64:
                raise MtsError(f"{path}:{number}: id out of 64-bit range")
            out.append(value)
    return np.array(out, dtype=np.uint64)


def write_ids(path, ids) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{int(i)}\n" for i in ids)


def _load(path) -> MtsSketch:
    with open(path, "rb") as fh:
        return deserialize(fh.read())


def _save(path, sketch) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(sketch))


def cmd_sketch_build(args) -> int:
    config = SketchConfig(args.m, args.u, SeedSet(args.value_seed, args.bucket_seed),
                          args.subsample)
    ids = read_ids(args.input, args.strings)
    if len(ids) == 0:
        raise EmptySketch(f"{args.input}: no ids")
    sketch = MtsSketch(config)
    sketch.update(ids)
    _save(args.output, sketch)
    return EXIT_OK


def cmd_merge(args) -> int:
    _save(args.output, merge_all([_load(p) for p in args.sketches]))
    return EXIT_OK


def _display(report) -> dict:
    out = report.to_dict()
    out["display_value"] = max(0.0, report.value)
    for key in ("rho_hat", "rho_gt_hat", "rho_g_hat"):
        if out.get(key) is not None:
            out[key + "_clamped"] = min(1.0, max(0.0, out[key]))
    return out


def cmd_estimate(args) -> int:
    sketches = [_load(p) for p in args.sketches]
    names = args.names.split(",") if args.names else None
    expr, bound = parse_with_names(args.expr, names)
    if arity(expr) > len(sketches):
        raise MtsError(f"expression uses {len(bound)} streams but {len(sketches)} sketches given")
    report = estimate(sketches, expr, args.small_range_correction)
    print(json.dumps(_display(report), sort_keys=True))
    if any(w.startswith("ExpressionSampleEmpty") for w in report.warnings):
        return EXIT_DEGENERATE
    return EXIT_OK


def cmd_experiment(args) -> int:
    spec = load_experiment_spec(args.spec, runs=args.runs, seed=args.seed, workers=args.workers)
    log = open(args.log_runs, "w", encoding="utf-8") if args.log_runs else None
    try:
        rows = run_experiment(spec, log=log)
    finally:
        if log is not None:
            log.close()
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    return EXIT_OK


def cmd_export_streams(args) -> int:
    spec = load_experiment_spec(args.spec)
    workload = generate(spec.workload(args.grid_index), args.run)
    counts = sample_counts(workload) if args.sampled else None
    for i, name in enumerate(spec.stream_names):
        if counts is None:
            seq = workload.stream(i)
        else:
            seq = np.repeat(workload.ids, counts[i])
        write_ids(f"{args.prefix}{name}.txt", seq)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mts", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("sketch-build", help="sketch a newline-delimited id file")
    b.add_argument("input")
    b.add_argument("-o", "--output", required=True)
    b.add_argument("--m", type=int, default=256)
    b.add_argument("--u", type=int, default=1000)
    b.add_argument("--value-seed", type=int, default=DEFAULT_VALUE_SEED)
    b.add_argument("--bucket-seed", type=int, default=DEFAULT_BUCKET_SEED)
    b.add_argument("--subsample", choices=SUBSAMPLE_MODES, default="occurrences")
    b.add_argument("--strings", action="store_true", help="hash each line as an opaque token")
    b.set_defaults(func=cmd_sketch_build)

    mg = sub.add_parser("merge", help="merge sketch files")
    mg.add_argument("sketches", nargs="+")
    mg.add_argument("-o", "--output", required=True)
    mg.set_defaults(func=cmd_merge)

    e = sub.add_parser("estimate", help="estimate a set expression over sketch files")
    e.add_argument("sketches", nargs="+")
    e.add_argument("--expr", default="A")
    e.add_argument("--names", help="comma-separated stream names in file order")
    e.add_argument("--small-range-correction", action="store_true")
    e.set_defaults(func=cmd_estimate)

    x = sub.add_parser("experiment", help="run a simulation grid and print CSV")
    x.add_argument("spec")
    x.add_argument("-o", "--output")
    x.add_argument("--log-runs", help="write one JSON object per run to this file")
    x.add_argument("--runs", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--workers", type=int)
    x.set_defaults(func=cmd_experiment)

    s = sub.add_parser("export-streams", help="write one run's streams as id files")
    s.add_argument("spec")
    s.add_argument("--grid-index", type=int, default=0)
    s.add_argument("--run", type=int, default=0)
    s.add_argument("--sampled", action="store_true")
    s.add_argument("--prefix", default="stream_")
    s.set_defaults(func=cmd_export_streams)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IncompatibleSketches as exc:
        code, msg = EXIT_INCOMPATIBLE, exc
    except (SampleTooSparse, ExpressionSampleEmpty) as exc:
        code, msg = EXIT_DEGENERATE, exc
    except (MtsError, OSError, ValueError) as exc:
        code, msg = EXIT_DATA, exc
    print(f"mts: {type(msg).__name__}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
