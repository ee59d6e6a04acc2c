"""Deterministic seed derivation shared by samplers, rollout, and the bench.

Every random stream in the package is rooted in a ``numpy.random.SeedSequence``
built from a tuple of non-negative integer keys, so parallel and serial
execution produce identical results.
"""
from __future__ import annotations

import numpy as np

# Namespace tags keep streams for different purposes disjoint even when the
# remaining keys collide (e.g. scenario seed == rollout seed).
NS_SCENARIO = 1
NS_FLEET = 2
NS_CE_FAMILY = 3
NS_CE_SAMPLE = 4
NS_DECISION = 5
NS_BENCH = 6


def make_rng(*keys: int) -> np.random.Generator:
    """PCG64 generator keyed by a tuple of non-negative integers."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(keys))))


def derive_seed(*keys: int) -> int:
    """Collapse a key tuple into a single stable 63-bit seed."""
    state = np.random.SeedSequence(list(keys)).generate_state(2, dtype=np.uint64)
    return int(state[0] >> 1)
