"""Count Sketch used as a linear l2 (second moment) estimator."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ConfigError, IncompatibleSketchError
from .hashing import hash64_array


def derive_seeds(depth: int, seed: int) -> list[tuple[int, int]]:
    """Per-row (bucket, sign) hash seeds drawn from one master seed."""
    raw = np.random.SeedSequence(seed).generate_state(2 * depth, dtype=np.uint64)
    return [(int(raw[2 * r]), int(raw[2 * r + 1])) for r in range(depth)]


class CountSketch:
    """``depth x width`` table of signed counters.

    ``update(key, delta)`` adds ``sign_r(key) * delta`` to one counter in
    every row r. The squared-counter sum of a row is an unbiased estimate of
    ``||X||_2^2``; the median over rows is reported. Sketches with the same
    shape and seeds add entry-wise, which is exactly the sketch of the
    summed frequency vector.
    """

    kind = "countsketch"

    def __init__(self, depth: int = 5, width: int = 20000, seeds: Sequence[tuple[int, int]] | int = 0):
        if depth < 1 or width < 1:
            raise ConfigError(f"depth and width must be positive, got {depth}x{width}")
        self.depth = int(depth)
        self.width = int(width)
        if isinstance(seeds, (int, np.integer)):
            seeds = derive_seeds(self.depth, int(seeds))
        seeds = [(int(a), int(s)) for a, s in seeds]
        if len(seeds) != self.depth:
            raise ConfigError(f"need {self.depth} seed pairs, got {len(seeds)}")
        self.seeds = seeds
        self.tables = np.zeros((self.depth, self.width), dtype=np.int64)

    def empty_like(self) -> CountSketch:
        return CountSketch(self.depth, self.width, self.seeds)

    def copy(self) -> CountSketch:
        out = self.empty_like()
        out.tables[:] = self.tables
        return out

    def update(self, keys, deltas=1) -> None:
        keys = np.atleast_1d(np.asarray(keys))
        if keys.size == 0:
            return
        deltas = np.broadcast_to(np.asarray(deltas, dtype=np.int64), keys.shape)
        for r, (bucket_seed, sign_seed) in enumerate(self.seeds):
            bucket = (hash64_array(keys, bucket_seed) % np.uint64(self.width)).astype(np.intp)
            sign = 1 - 2 * (hash64_array(keys, sign_seed) >> np.uint64(63)).astype(np.int64)
            np.add.at(self.tables[r], bucket, sign * deltas)

    def _check(self, other: CountSketch) -> None:
        if not isinstance(other, CountSketch):
            raise IncompatibleSketchError(f"cannot merge CountSketch with {type(other).__name__}")
        if (other.depth, other.width) != (self.depth, self.width) or other.seeds != self.seeds:
            raise IncompatibleSketchError("CountSketch shape or seeds differ")

    def merge_inplace(self, other: CountSketch) -> CountSketch:
        self._check(other)
        self.tables += other.tables
        return self

    def merge(self, other: CountSketch) -> CountSketch:
        return self.copy().merge_inplace(other)

    def estimate_l2sq(self) -> float:
        t = self.tables.astype(np.float64)
        return float(np.median((t * t).sum(axis=1)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CountSketch):
            return NotImplemented
        return (
            self.depth == other.depth
            and self.width == other.width
            and self.seeds == other.seeds
            and bool(np.array_equal(self.tables, other.tables))
        )

    def __repr__(self) -> str:
        return f"CountSketch({self.depth}x{self.width})"
