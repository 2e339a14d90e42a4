"""Counter-based derived seed streams.

Every source of randomness in the package (optimizer restarts, ICA,
Monte Carlo, data generation) draws from a stream derived from one root
seed plus a purpose label and optional counters, so a whole run is
reproducible from a single integer and independent of evaluation order.
"""

from __future__ import annotations

import zlib

import numpy as np


def _code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def seed_sequence(seed: int, purpose: str, *counters: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), _code(purpose), *map(int, counters)])


def rng(seed: int, purpose: str, *counters: int) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, purpose, *counters))


def child_seed(seed: int, purpose: str, *counters: int) -> int:
    """A 32-bit integer seed for APIs that take plain ints (e.g. FastICA)."""
    return int(seed_sequence(seed, purpose, *counters).generate_state(1)[0])
