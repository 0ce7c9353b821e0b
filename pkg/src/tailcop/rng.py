"""Deterministic random-number streams.

Every stochastic routine in this package draws from a stream derived from
an explicit integer key.  Streams with different keys are statistically
independent, and a stream is fully determined by its key, so results do
not depend on execution order or on how work is split across processes.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

RngLike = Union[int, Sequence[int], np.random.Generator, np.random.SeedSequence, None]


def stream(*key: int) -> np.random.Generator:
    """Return a generator keyed by the given integers.

    Equal keys give bit-identical streams on every platform; the Philox
    bit generator is counter-based, so derived streams never overlap.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def as_generator(rng: RngLike) -> np.random.Generator:
    """Normalize ``rng`` (seed, key tuple, SeedSequence or Generator)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(rng))
    if rng is None:
        return np.random.Generator(np.random.Philox(np.random.SeedSequence()))
    if isinstance(rng, (int, np.integer)):
        return stream(int(rng))
    return stream(*(int(v) for v in rng))


def spawn_streams(rng: RngLike, count: int) -> list[np.random.Generator]:
    """Derive ``count`` child generators, one per row/replication."""
    gen = as_generator(rng)
    return gen.spawn(count)
