"""Counter-based random streams.

Every stochastic draw in this package comes from a Philox generator keyed by
(seed, purpose, *coordinates).  Because Philox is counter-based, a stream is a
pure function of its key: no generator state is ever carried between epochs,
processes, or runs, which is what makes resumed training and re-run benchmarks
bit-identical.  Purposes are short strings hashed with crc32 so keys stay
stable across platforms and releases.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def stream(seed: int, *key) -> np.random.Generator:
    """Return the generator for (seed, *key); same arguments, same draws."""
    entropy = [_key_part(seed)] + [_key_part(k) for k in key]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *key) -> int:
    """Collapse (seed, *key) into a single 63-bit seed for APIs taking one int."""
    return int(stream(seed, *key).integers(0, 2**63 - 1))
