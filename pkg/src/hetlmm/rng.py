"""Counter-based random streams.

Every random draw in this package comes from a Philox generator keyed by a
(seed, *path) tuple, where path components are small ints or short strings
("rep", subject index, "noise", ...). Streams derived from distinct paths are
statistically independent, so replicates, subjects, and folds can be generated
in any order (or in parallel) without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "stream_key"]


def stream_key(seed: int, *path) -> np.ndarray:
    """Derive a 128-bit Philox key from a seed and a stream path."""
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed).to_bytes(8, "little", signed=True))
    for part in path:
        if isinstance(part, str):
            b = part.encode("utf-8")
            h.update(b"s" + len(b).to_bytes(4, "little") + b)
        elif isinstance(part, (int, np.integer)):
            h.update(b"i" + int(part).to_bytes(8, "little", signed=True))
        else:
            raise TypeError(f"stream path parts must be int or str, got {type(part)!r}")
    return np.frombuffer(h.digest(), dtype=np.uint64)


def stream(seed: int, *path) -> np.random.Generator:
    """Return an independent Generator for the given (seed, *path) stream."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *path)))
