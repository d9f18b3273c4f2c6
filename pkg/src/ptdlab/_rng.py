"""Seeded random streams.

Every simulation draws from a Philox counter-based generator keyed by the
tuple ``(seed, *stream)``.  Two different tuples give statistically
independent streams, and a stream never depends on how many numbers other
streams consumed, so results do not depend on execution order.
"""

import zlib

import numpy as np

# Stream tags keep the purposes of a seed from sharing draws.
EPISODE = 1
LAYOUT = 2
INIT = 3
FEATURES = 4


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return the generator for ``seed`` and the stream id ``stream``."""
    words = [int(seed)] + [int(s) for s in stream]
    if any(w < 0 for w in words):
        raise ValueError("seed and stream ids must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def tag(name: str) -> int:
    """Stable integer tag for a textual stream name."""
    return zlib.crc32(name.encode("utf8"))
