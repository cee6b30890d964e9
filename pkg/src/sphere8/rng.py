"""Deterministic random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
backed by the Philox-4x64 counter-based bit generator. A stream is keyed by
``(seed, *path)`` through ``numpy.random.SeedSequence``: integers in the path
are used as-is, strings are mapped through CRC-32. Because each
(trial, purpose) pair owns its own stream, results do not depend on the
order in which trials are evaluated or on the number of worker threads.
"""
import zlib

import numpy as np

ALGORITHM = "Philox4x64-10 keyed by numpy SeedSequence(seed, spawn_key=path)"


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def make_rng(seed, *path):
    """Return the generator for stream ``path`` under ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
