"""Seed derivation. Every random stream descends from one integer seed.

Sub-streams are keyed by ``SeedSequence([seed, *keys])``; string keys are
mapped to integers with CRC-32, so ``derive_seed(7, "split")`` is stable
across runs, platforms and worker counts.
"""

from __future__ import annotations

import zlib

import numpy as np

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"


def _key(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k)


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(_key(k) for k in keys)])


def make_rng(seed: int, *keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit child seed for the stage named by ``keys``."""
    return int(seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
