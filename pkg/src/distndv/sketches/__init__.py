"""Mergeable sketches: HyperLogLog (l0), Count Sketch (l2) and exact oracles for both."""

from __future__ import annotations

from .countsketch import CountSketch
from .exact import ExactL0, ExactL2
from .hashing import hash64, hash64_array
from .hll import HyperLogLog
from .wire import deserialize, roundtrip, serialize


def l0_new(b: int, seed: int) -> HyperLogLog:
    return HyperLogLog(b, seed)


__all__ = [
    "CountSketch",
    "ExactL0",
    "ExactL2",
    "HyperLogLog",
    "deserialize",
    "hash64",
    "hash64_array",
    "l0_new",
    "roundtrip",
    "serialize",
]
