"""Deterministic RNG discipline.

All randomness in the package flows through numpy's PCG64 bit generator,
seeded either directly or through :func:`derive_seed`.  Sub-seeds are
derived by hashing ``(master_seed, *labels)`` with SHA-256, so adding a new
randomized component never perturbs the streams of existing ones, and the
same (seed, label) pair yields the same stream on every platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "rng_from"]


def derive_seed(master_seed: int, *labels: object) -> int:
    """Derive a 64-bit sub-seed from a master seed and component labels."""
    h = hashlib.sha256()
    h.update((int(master_seed) & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little", signed=False))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def rng_from(seed: int, *labels: object) -> np.random.Generator:
    """PCG64 generator for ``seed``, optionally narrowed by sub-seed labels."""
    if labels:
        seed = derive_seed(seed, *labels)
    return np.random.Generator(np.random.PCG64(seed))
