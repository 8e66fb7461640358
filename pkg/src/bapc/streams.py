"""Named random substreams derived from a single root seed.

Every stochastic consumer asks for its own stream by name, e.g.
``substream(seed, "noise")`` or ``substream(seed, "fold-split", 17)``.
Adding a new consumer therefore never shifts the draws seen by the others.
"""

from __future__ import annotations

import zlib

import numpy as np

MAX_SEED = 2**64 - 1


def _key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError(f"substream index must be nonnegative, got {part}")
    return int(part)


def seed_sequence(seed: int, *names: int | str) -> np.random.SeedSequence:
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(_key(n) for n in names))


def substream(seed: int, *names: int | str) -> np.random.Generator:
    """Generator for the stream identified by ``names`` under root ``seed``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *names)))


def child_seed(seed: int, *names: int | str) -> int:
    """A 64-bit integer seed for consumers that take a plain integer."""
    state = seed_sequence(seed, *names).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)
