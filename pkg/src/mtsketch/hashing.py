"""Seeded, coordinated 64-bit hashing.

Every element identifier is a 64-bit unsigned integer. Two independent keyed
hashes are derived from a :class:`SeedSet`: a *value* hash whose raw 64-bit
output is mapped into the open unit interval, and a *bucket* hash used for
stochastic averaging. Sketches that share a ``SeedSet`` see bit-identical
hashes for the same element, which is what makes cross-stream comparison of
register maxima meaningful.

The mixing function is the splitmix64 finalizer applied to ``element ^ key``.
A pure-integer path (:func:`value_hash`, :func:`bucket_of`) and a numpy path
(:func:`value_hashes`, :func:`bucket_indices`) are provided; both are pinned
by golden vectors in the test suite.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

MASK64 = (1 << 64) - 1
TWO64 = float(1 << 64)
_TWO52 = float(1 << 52)

_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
# domain separation so equal value/bucket seeds still give independent hashes
_VALUE_DOMAIN = 0x76616C7565000001
_BUCKET_DOMAIN = 0x6275636B65000002

DEFAULT_VALUE_SEED = 0x4D54535F56414C31
DEFAULT_BUCKET_SEED = 0x4D54535F42554B31


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = np.array(z, dtype=np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_M1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_M2)
    z ^= z >> np.uint64(31)
    return z


def _check_u64(name: str, value: int) -> int:
    value = int(value)
    if not 0 <= value <= MASK64:
        raise ConfigurationError(f"{name} must fit in 64 unsigned bits, got {value}")
    return value


@dataclass(frozen=True)
class SeedSet:
    """Seeds of the value hash and the bucket hash.

    Sketches are compatible only if both seeds are equal.
    """

    value_seed: int = DEFAULT_VALUE_SEED
    bucket_seed: int = DEFAULT_BUCKET_SEED

    def __post_init__(self):
        object.__setattr__(self, "value_seed", _check_u64("value_seed", self.value_seed))
        object.__setattr__(self, "bucket_seed", _check_u64("bucket_seed", self.bucket_seed))

    @property
    def value_key(self) -> int:
        return _mix64((self.value_seed ^ _VALUE_DOMAIN) + _GOLDEN & MASK64)

    @property
    def bucket_key(self) -> int:
        return _mix64((self.bucket_seed ^ _BUCKET_DOMAIN) + _GOLDEN & MASK64)


@dataclass(frozen=True, order=True)
class UnitHash:
    """A 64-bit hash and its image in the open unit interval.

    The image keeps the top 52 bits, ``((raw >> 12) + 0.5) / 2**52``, which
    is exact in double precision and never rounds to 0 or 1.

    Comparisons use ``raw`` only; ``value`` is for display and arithmetic.
    """

    raw: int

    @property
    def value(self) -> float:
        return raw_to_unit(self.raw)


def raw_to_unit(raw):
    """Map raw 64-bit hashes (scalar or array) into the open unit interval."""
    if isinstance(raw, np.ndarray):
        return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) / _TWO52
    return ((int(raw) >> 12) + 0.5) / _TWO52


def value_hash(seeds: SeedSet, element: int) -> UnitHash:
    element = _check_u64("element", element)
    return UnitHash(_mix64(element ^ seeds.value_key))


def bucket_of(seeds: SeedSet, element: int, m: int) -> int:
    if m < 1:
        raise ConfigurationError(f"bucket count must be >= 1, got {m}")
    element = _check_u64("element", element)
    return _mix64(element ^ seeds.bucket_key) % m


def as_element_array(elements) -> np.ndarray:
    """Canonicalize an iterable of ids into a uint64 array."""
    if isinstance(elements, np.ndarray):
        if elements.dtype == np.uint64:
            return elements
        if elements.dtype.kind == "i" and elements.size and elements.min() < 0:
            raise ConfigurationError("element ids must be non-negative")
        return elements.astype(np.uint64)
    return np.fromiter((_check_u64("element", e) for e in elements), dtype=np.uint64)


def value_hashes(seeds: SeedSet, elements) -> np.ndarray:
    """Raw value hashes for an array of element ids (uint64 array)."""
    ids = as_element_array(elements)
    return _mix64_array(ids ^ np.uint64(seeds.value_key))


def bucket_indices(seeds: SeedSet, elements, m: int) -> np.ndarray:
    if m < 1:
        raise ConfigurationError(f"bucket count must be >= 1, got {m}")
    ids = as_element_array(elements)
    return (_mix64_array(ids ^ np.uint64(seeds.bucket_key)) % np.uint64(m)).astype(np.int64)


def ingest_id(token, seed: int = 0) -> int:
    """Map an arbitrary string or bytes token to a 64-bit element id.

    Uses keyed BLAKE2b, so the mapping is stable across processes and
    platforms. The same ``seed`` must be used for every stream that is to be
    compared.
    """
    if isinstance(token, str):
        token = token.encode("utf-8")
    key = _check_u64("seed", seed).to_bytes(8, "little")
    digest = hashlib.blake2b(token, digest_size=8, key=key).digest()
    return int.from_bytes(digest, "little")
