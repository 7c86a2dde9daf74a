"""Seeded 64-bit mixing hash (murmur3 fmix64 finalizer).

Scalar and numpy versions produce identical values; the scalar one is
used for single inserts and as a cross-check in tests.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_C1 = 0xFF51AFD7ED558CCD
_C2 = 0xC4CEB9FE1A85EC53
_GOLDEN = 0x9E3779B97F4A7C15


def _fmix(z: int) -> int:
    z ^= z >> 33
    z = (z * _C1) & MASK64
    z ^= z >> 33
    z = (z * _C2) & MASK64
    z ^= z >> 33
    return z


def seed_key(seed: int) -> int:
    """Expand a user seed into the 64-bit key xor-ed into every input."""
    return _fmix((seed * _GOLDEN + _GOLDEN) & MASK64)


def hash64(x: int, seed: int) -> int:
    return _fmix((x & MASK64) ^ seed_key(seed))


def hash64_array(xs, seed: int) -> np.ndarray:
    """Vectorized :func:`hash64` over an integer array (returns uint64)."""
    z = np.asarray(xs).astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z ^= np.uint64(seed_key(seed))
        z ^= z >> np.uint64(33)
        z *= np.uint64(_C1)
        z ^= z >> np.uint64(33)
        z *= np.uint64(_C2)
        z ^= z >> np.uint64(33)
    return z


def bit_length_array(v: np.ndarray) -> np.ndarray:
    """Bit length of each uint64 value, computed exactly via 32-bit halves."""
    v = np.asarray(v, dtype=np.uint64)
    hi = (v >> np.uint64(32)).astype(np.float64)
    lo = (v & np.uint64(0xFFFFFFFF)).astype(np.float64)
    # frexp exponent of a positive integer below 2**53 is its bit length
    _, ehi = np.frexp(hi)
    _, elo = np.frexp(lo)
    return np.where(hi > 0, ehi + 32, elo).astype(np.int64)
