"""Deterministic seed derivation.

All randomness in the package flows from a single integer seed. Independent
streams are carved out by hashing the seed together with a short tag, so that
adding a new consumer never perturbs existing streams.
"""

from __future__ import annotations

import hashlib
import random

_MASK = (1 << 63) - 1


def child_seed(seed: int, tag: str) -> int:
    """Derive a 63-bit child seed from (seed, tag)."""
    digest = hashlib.sha256(f"{seed}:{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & _MASK


def rng_for(seed: int, tag: str) -> random.Random:
    """A fresh stdlib RNG for the derived stream."""
    return random.Random(child_seed(seed, tag))


def trial_seed(seed: int, trial: int) -> int:
    # Per-trial streams use XOR so trials can be farmed out associatively.
    return (seed ^ trial) & _MASK
