"""Splittable, counter-based random streams shared across the package.

Every stochastic operation (dataset splitting, fold assignment, ant moves)
draws from its own Philox stream keyed by the run seed plus a stream tag,
so results never depend on call order, scheduling, or worker count.
"""

from __future__ import annotations

import numpy as np

# Stream tags keep the key spaces of unrelated consumers disjoint even when
# they share the same run seed.
STREAM_SPLIT = 1
STREAM_FOLDS = 2
STREAM_ANT = 3


def stream(seed: int, tag: int, *subkeys: int) -> np.random.Generator:
    """Return the generator for the (seed, tag, *subkeys) stream."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    entropy = (seed, tag) + tuple(int(k) for k in subkeys)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
