"""Keyed random streams.

Every stochastic draw in the harness comes from a stream keyed by
(seed, label, *indices), so round t of a session can be regenerated
without consuming draws for rounds 1..t-1. Labels are hashed to stable
64-bit integers; streams are therefore identical across platforms and
process restarts.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF


def label_key(label: str) -> int:
    """Stable 64-bit key for a stream label."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Independent generator for (seed, label, indices).

    Negative seeds are folded into the unsigned 64-bit space so any
    Python int is accepted.
    """
    entropy = [seed & _MASK64, label_key(label)]
    entropy.extend(i & _MASK64 for i in indices)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(base: int, *keys: int | str) -> int:
    """Stable child seed for (base, keys); keys may mix ints and strings."""
    material = repr((base & _MASK64,) + tuple(keys)).encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "big") >> 1  # keep it positive
