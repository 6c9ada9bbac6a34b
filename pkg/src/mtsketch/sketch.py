"""The MTS sketch: per-bucket maximal hashes plus a bottom-u subsample.

An :class:`MtsSketch` holds two structures built from the same insertion
history:

* :class:`Registers` -- for each of ``m`` buckets, the largest raw value hash
  routed there (stochastic averaging with a separate bucket hash).
* :class:`BottomUSample` -- the elements with the smallest value hashes and
  their occurrence counts.

Two subsample modes exist. ``"occurrences"`` (default) keeps the ``u``
smallest *occurrences*: elements are taken in hash order with their full
counts until the window holds ``u`` occurrences, the boundary element keeping
only the occurrences that still fit. ``"distinct"`` keeps the ``u`` smallest
*distinct* elements with full counts. Both are pure functions of the
multiset of inserted occurrences, so insertion order never matters and
merging is exact: ``merge(sketch(X), sketch(Y)) == sketch(X + Y)``.

Ties between distinct elements with equal raw hashes are broken by the
smaller element id.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, CorruptSketch, IncompatibleSketches
from .hashing import (
    SeedSet,
    UnitHash,
    as_element_array,
    bucket_indices,
    value_hashes,
)

SUBSAMPLE_MODES = ("occurrences", "distinct")
MIN_BUCKETS = 16
MIN_CAPACITY = 8

MAGIC = b"MTS1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIQQQBQ")
_REGISTER_DTYPE = np.dtype([("flag", "u1"), ("raw", "<u8")])
_ENTRY_DTYPE = np.dtype([("id", "<u8"), ("raw", "<u8"), ("count", "<u8")])


@dataclass(frozen=True)
class SketchConfig:
    m: int
    u: int
    seeds: SeedSet = field(default_factory=SeedSet)
    subsample: str = "occurrences"

    def __post_init__(self):
        if int(self.m) < MIN_BUCKETS:
            raise ConfigurationError(f"m must be >= {MIN_BUCKETS}, got {self.m}")
        if int(self.m) >= 1 << 32:
            raise ConfigurationError("m must fit in 32 bits")
        if int(self.u) < MIN_CAPACITY:
            raise ConfigurationError(f"u must be >= {MIN_CAPACITY}, got {self.u}")
        if self.subsample not in SUBSAMPLE_MODES:
            raise ConfigurationError(
                f"subsample must be one of {SUBSAMPLE_MODES}, got {self.subsample!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "u", int(self.u))


class Registers:
    """Per-bucket maximal raw hashes. Empty slots hold raw 0 and ``filled`` False."""

    __slots__ = ("raw", "filled")

    def __init__(self, m: int):
        self.raw = np.zeros(m, dtype=np.uint64)
        self.filled = np.zeros(m, dtype=bool)

    @property
    def m(self) -> int:
        return len(self.raw)

    def slot(self, j: int):
        """The slot's :class:`UnitHash`, or ``None`` if the bucket is empty."""
        return UnitHash(int(self.raw[j])) if self.filled[j] else None

    def observe(self, buckets: np.ndarray, raws: np.ndarray) -> None:
        np.maximum.at(self.raw, buckets, raws)
        self.filled[buckets] = True

    def merged(self, other: "Registers") -> "Registers":
        out = Registers.__new__(Registers)
        out.raw = np.maximum(self.raw, other.raw)
        out.filled = self.filled | other.filled
        return out

    def copy(self) -> "Registers":
        out = Registers.__new__(Registers)
        out.raw = self.raw.copy()
        out.filled = self.filled.copy()
        return out

    def __eq__(self, other):
        if not isinstance(other, Registers):
            return NotImplemented
        return (np.array_equal(self.filled, other.filled)
                and np.array_equal(self.raw, other.raw))

    def __repr__(self):
        return f"Registers(m={self.m}, filled={int(self.filled.sum())})"


def _bottom_u(ids, raws, counts, capacity, mode):
    """Aggregate duplicate ids and keep the bottom-u window.

    Rows are ordered by (raw, id); equal ids always carry equal raws, so
    duplicates are adjacent after the sort.
    """
    if len(ids) == 0:
        return ids, raws, counts
    order = np.lexsort((ids, raws))
    ids, raws, counts = ids[order], raws[order], counts[order]
    if len(ids) > 1:
        first = np.ones(len(ids), dtype=bool)
        first[1:] = ids[1:] != ids[:-1]
        if not first.all():
            starts = np.flatnonzero(first)
            counts = np.add.reduceat(counts, starts)
            ids, raws = ids[starts], raws[starts]
    if mode == "distinct":
        return ids[:capacity], raws[:capacity], counts[:capacity]
    cum = np.cumsum(counts)
    k = int(np.searchsorted(cum, capacity, side="left"))
    if k >= len(ids):
        return ids, raws, counts
    ids, raws, counts = ids[:k + 1], raws[:k + 1], counts[:k + 1].copy()
    counts[k] -= cum[k] - capacity
    return ids, raws, counts


class BottomUSample:
    """Elements with the smallest value hashes and their occurrence counts.

    Arrays are kept sorted by ``(raw, id)``.
    """

    __slots__ = ("capacity", "mode", "ids", "raws", "counts")

    def __init__(self, capacity: int, mode: str = "occurrences"):
        self.capacity = capacity
        self.mode = mode
        self.ids = np.zeros(0, dtype=np.uint64)
        self.raws = np.zeros(0, dtype=np.uint64)
        self.counts = np.zeros(0, dtype=np.int64)

    def __len__(self):
        return len(self.ids)

    def __contains__(self, element):
        return bool(np.any(self.ids == np.uint64(element)))

    @property
    def total_occurrences(self) -> int:
        return int(self.counts.sum())

    @property
    def entries(self) -> dict:
        """``{element_id: (UnitHash, count)}``; convenient, not fast."""
        return {int(i): (UnitHash(int(r)), int(c))
                for i, r, c in zip(self.ids, self.raws, self.counts)}

    def contains_many(self, elements: np.ndarray) -> np.ndarray:
        return np.isin(elements, self.ids)

    def absorb(self, ids, raws, counts) -> None:
        self.ids, self.raws, self.counts = _bottom_u(
            np.concatenate([self.ids, ids]),
            np.concatenate([self.raws, raws]),
            np.concatenate([self.counts, counts]),
            self.capacity, self.mode)

    def merged(self, other: "BottomUSample") -> "BottomUSample":
        out = self.copy()
        out.absorb(other.ids, other.raws, other.counts)
        return out

    def copy(self) -> "BottomUSample":
        out = BottomUSample(self.capacity, self.mode)
        out.ids, out.raws, out.counts = self.ids.copy(), self.raws.copy(), self.counts.copy()
        return out

    def __eq__(self, other):
        if not isinstance(other, BottomUSample):
            return NotImplemented
        return (self.capacity == other.capacity and self.mode == other.mode
                and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.raws, other.raws)
                and np.array_equal(self.counts, other.counts))

    def __repr__(self):
        return (f"BottomUSample(capacity={self.capacity}, mode={self.mode!r}, "
                f"distinct={len(self)}, occurrences={self.total_occurrences})")


def merge_bottom_u(samples) -> BottomUSample:
    """k-way bottom-u merge of subsamples that share capacity and mode."""
    samples = list(samples)
    first = samples[0]
    out = BottomUSample(first.capacity, first.mode)
    out.ids, out.raws, out.counts = _bottom_u(
        np.concatenate([s.ids for s in samples]),
        np.concatenate([s.raws for s in samples]),
        np.concatenate([s.counts for s in samples]),
        first.capacity, first.mode)
    return out


class MtsSketch:
    """Single-writer MTS sketch over a (sampled) stream of 64-bit element ids.

    >>> s = MtsSketch(SketchConfig(m=16, u=8))
    >>> s.update([1, 2, 2, 3])
    >>> len(s.subsample), s.occurrences_seen
    (3, 4)
    """

    def __init__(self, config: SketchConfig):
        self.config = config
        self.registers = Registers(config.m)
        self.subsample = BottomUSample(config.u, config.subsample)
        self.occurrences_seen = 0

    @property
    def is_empty(self) -> bool:
        return self.occurrences_seen == 0

    def insert(self, element: int) -> None:
        self.update_counts(np.array([element], dtype=np.uint64), np.array([1]))

    def update(self, elements) -> None:
        """Insert every occurrence in ``elements`` (ids, repeats allowed)."""
        ids = as_element_array(elements)
        if len(ids) == 0:
            return
        uniq, counts = np.unique(ids, return_counts=True)
        self._absorb(uniq, counts.astype(np.int64))

    def update_counts(self, ids, counts) -> None:
        """Insert ``counts[i]`` occurrences of ``ids[i]``.

        Equivalent to :meth:`update` on the expanded occurrence sequence;
        zero counts are skipped.
        """
        ids = as_element_array(ids)
        counts = np.asarray(counts, dtype=np.int64)
        if ids.shape != counts.shape:
            raise ValueError("ids and counts must have the same shape")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        keep = counts > 0
        if not keep.all():
            ids, counts = ids[keep], counts[keep]
        if len(ids) == 0:
            return
        self._absorb(ids, counts)

    def _absorb(self, ids, counts):
        seeds = self.config.seeds
        raws = value_hashes(seeds, ids)
        self.registers.observe(bucket_indices(seeds, ids, self.config.m), raws)
        self.subsample.absorb(ids, raws, counts)
        self.occurrences_seen += int(counts.sum())

    def merge(self, other: "MtsSketch") -> "MtsSketch":
        return merge(self, other)

    def copy(self) -> "MtsSketch":
        out = MtsSketch(self.config)
        out.registers = self.registers.copy()
        out.subsample = self.subsample.copy()
        out.occurrences_seen = self.occurrences_seen
        return out

    def to_bytes(self) -> bytes:
        return serialize(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "MtsSketch":
        return deserialize(data)

    def __eq__(self, other):
        if not isinstance(other, MtsSketch):
            return NotImplemented
        return (self.config == other.config
                and self.occurrences_seen == other.occurrences_seen
                and self.registers == other.registers
                and self.subsample == other.subsample)

    def __repr__(self):
        return (f"MtsSketch(m={self.config.m}, u={self.config.u}, "
                f"occurrences_seen={self.occurrences_seen})")


def new_sketch(config: SketchConfig) -> MtsSketch:
    return MtsSketch(config)


def check_compatible(sketches) -> SketchConfig:
    sketches = list(sketches)
    if not sketches:
        raise ValueError("at least one sketch is required")
    config = sketches[0].config
    for s in sketches[1:]:
        if s.config != config:
            raise IncompatibleSketches(f"config mismatch: {config} vs {s.config}")
    return config


def merge(a: MtsSketch, b: MtsSketch) -> MtsSketch:
    """Union sketch: element-wise register max and bottom-u of both subsamples."""
    return merge_all([a, b])


def merge_all(sketches) -> MtsSketch:
    sketches = list(sketches)
    config = check_compatible(sketches)
    out = MtsSketch(config)
    registers = sketches[0].registers.copy()
    for s in sketches[1:]:
        registers = registers.merged(s.registers)
    out.registers = registers
    out.subsample = merge_bottom_u(s.subsample for s in sketches)
    out.occurrences_seen = sum(s.occurrences_seen for s in sketches)
    return out


def serialize(sketch: MtsSketch) -> bytes:
    """Little-endian binary encoding with a trailing CRC32.

    Layout: magic ``MTS1``, u16 version, u32 m, u64 u, u64 value_seed,
    u64 bucket_seed, u8 subsample mode, u64 occurrences_seen, m registers of
    (u8 flag, u64 raw), u64 entry count, entries of (u64 id, u64 raw,
    u64 count), u32 CRC32 of everything before it.
    """
    c = sketch.config
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, c.m, c.u, c.seeds.value_seed,
                          c.seeds.bucket_seed, SUBSAMPLE_MODES.index(c.subsample),
                          sketch.occurrences_seen)
    regs = np.empty(c.m, dtype=_REGISTER_DTYPE)
    regs["flag"] = sketch.registers.filled
    regs["raw"] = sketch.registers.raw
    sub = sketch.subsample
    entries = np.empty(len(sub), dtype=_ENTRY_DTYPE)
    entries["id"], entries["raw"], entries["count"] = sub.ids, sub.raws, sub.counts
    body = b"".join([header, regs.tobytes(), struct.pack("<Q", len(sub)), entries.tobytes()])
    return body + struct.pack("<I", zlib.crc32(body))


def deserialize(data: bytes) -> MtsSketch:
    data = bytes(data)
    if len(data) < _HEADER.size + 12:
        raise CorruptSketch("truncated sketch")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptSketch("checksum mismatch")
    magic, version, m, u, vseed, bseed, mode, seen = _HEADER.unpack_from(body, 0)
    if magic != MAGIC:
        raise CorruptSketch(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptSketch(f"unsupported format version {version}")
    if mode >= len(SUBSAMPLE_MODES):
        raise CorruptSketch(f"unknown subsample mode {mode}")
    try:
        config = SketchConfig(m, u, SeedSet(vseed, bseed), SUBSAMPLE_MODES[mode])
    except ConfigurationError as exc:
        raise CorruptSketch(f"invalid config: {exc}") from exc
    offset = _HEADER.size
    reg_end = offset + m * _REGISTER_DTYPE.itemsize
    if len(body) < reg_end + 8:
        raise CorruptSketch("truncated registers")
    regs = np.frombuffer(body, dtype=_REGISTER_DTYPE, count=m, offset=offset)
    (n_entries,) = struct.unpack_from("<Q", body, reg_end)
    if len(body) != reg_end + 8 + n_entries * _ENTRY_DTYPE.itemsize:
        raise CorruptSketch("entry section length mismatch")
    entries = np.frombuffer(body, dtype=_ENTRY_DTYPE, count=n_entries, offset=reg_end + 8)

    sketch = MtsSketch(config)
    if np.any(regs["flag"] > 1) or np.any(regs["raw"][regs["flag"] == 0] != 0):
        raise CorruptSketch("malformed register slots")
    sketch.registers.filled = regs["flag"].astype(bool)
    sketch.registers.raw = regs["raw"].astype(np.uint64)
    ids = entries["id"].astype(np.uint64)
    raws = entries["raw"].astype(np.uint64)
    counts = entries["count"].astype(np.int64)
    if np.any(counts <= 0) or not np.array_equal(raws, value_hashes(config.seeds, ids)):
        raise CorruptSketch("subsample entries inconsistent with seeds")
    sub = BottomUSample(config.u, config.subsample)
    sub.ids, sub.raws, sub.counts = _bottom_u(ids, raws, counts, config.u, config.subsample)
    if not (np.array_equal(sub.ids, ids) and np.array_equal(sub.counts, counts)):
        raise CorruptSketch("subsample entries are not a valid bottom-u window")
    sketch.subsample = sub
    sketch.occurrences_seen = int(seen)
    return sketch
