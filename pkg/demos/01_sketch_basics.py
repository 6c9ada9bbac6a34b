"""Building, merging and storing MTS sketches.

Run: python demos/01_sketch_basics.py
"""

import numpy as np

from mtsketch import MtsSketch, SketchConfig, deserialize, merge, serialize

config = SketchConfig(m=64, u=200)

# A sketch consumes element ids (unsigned 64-bit integers), repeats allowed.
rng = np.random.default_rng(0)
ids = rng.integers(0, 2**64, size=5000, dtype=np.uint64)
stream = np.repeat(ids, rng.integers(1, 6, size=5000))
rng.shuffle(stream)

whole = MtsSketch(config)
whole.update(stream)
print(whole)
print("filled buckets:", int(whole.registers.filled.sum()), "of", config.m)
print("subsample:", whole.subsample)

# Sketch three shards independently, then merge. Merging is exact: the
# result equals the sketch of the concatenated stream, byte for byte.
shards = np.array_split(stream, 3)
parts = []
for shard in shards:
    s = MtsSketch(config)
    s.update(shard)
    parts.append(s)
merged = merge(merge(parts[0], parts[1]), parts[2])
print("merge of shards == sketch of whole stream:", merged == whole)

# Insertion order does not matter either.
backwards = MtsSketch(config)
backwards.update(stream[::-1])
print("order invariant:", backwards == whole)

# Binary round trip (little-endian, CRC protected).
blob = serialize(whole)
print("serialized bytes:", len(blob))
print("round trip equal:", deserialize(blob) == whole)
