"""Deterministic seed derivation shared by models and the harness.

All randomness in the package flows from 64-bit integer seeds through
SeedSequence paths, so parallel and serial runs consume identical streams.
"""

from __future__ import annotations

import zlib

import numpy as np


def name_seed(name: str) -> int:
    """Stable integer tag for a string, usable inside a stable_seed path."""
    return zlib.crc32(name.encode("utf-8"))


def stable_seed(path) -> int:
    """Collapse a tuple of non-negative ints into one 64-bit seed."""
    return int(np.random.SeedSequence(tuple(path)).generate_state(1, np.uint64)[0])


def child_seed(seed: int, index: int) -> int:
    """Derive the index-th independent child seed (per-estimator streams)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def rng_from(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
