"""Deterministic RNG substreams.

Every stochastic stage of the simulator derives its generator from a user
seed plus a short path of labels (purpose strings, trial indices, node ids).
Substreams are independent and stable across runs and platforms, so Monte
Carlo trials can run in any order, or in parallel, without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _as_entropy(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("entropy parts must be non-negative integers")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.blake2s(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"unsupported entropy part: {part!r}")


def substream(*path) -> np.random.Generator:
    """Generator for a (seed, label, index, ...) path. Same path, same stream."""
    return np.random.default_rng(np.random.SeedSequence([_as_entropy(p) for p in path]))


def derive_seed(*path) -> int:
    """Collapse a path into a single 64-bit seed (for APIs that take one int)."""
    h = hashlib.blake2s(digest_size=8)
    for p in path:
        h.update(_as_entropy(p).to_bytes(16, "little"))
    return int.from_bytes(h.digest(), "little")
