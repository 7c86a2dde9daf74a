"""HyperLogLog distinct-count sketch.

Each 64-bit hash is split: the low ``b`` bits choose a register, the
remaining ``64 - b`` bits give a rank (leading zeros + 1). A register keeps
the maximum rank it has seen, so merging is a register-wise max and
re-inserting an element never changes the sketch.

The estimate is the classic harmonic-mean form with linear counting for
small cardinalities. No large-range correction is applied: with a 64-bit
hash the collision regime is far beyond any cardinality we handle.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from ..errors import ConfigError, IncompatibleSketchError
from .hashing import bit_length_array, hash64_array

MIN_BITS = 4
MAX_BITS = 20


def alpha(m: int) -> float:
    if m == 16:
        return 0.673
    if m == 32:
        return 0.697
    if m == 64:
        return 0.709
    return 0.7213 / (1.0 + 1.079 / m)


class HyperLogLog:
    """Mergeable l0 sketch with ``2**b`` six-bit registers.

    Parameters:
        b: register-index bits, 4..20. Relative standard error is about
           ``1.04 / sqrt(2**b)`` (0.016 at b=12).
        seed: hash seed; only sketches with equal ``(b, seed)`` merge.
    """

    kind = "hll"

    def __init__(self, b: int = 12, seed: int = 0, registers: np.ndarray | None = None):
        if not isinstance(b, (int, np.integer)) or not MIN_BITS <= b <= MAX_BITS:
            raise ConfigError(f"b must be in [{MIN_BITS}, {MAX_BITS}], got {b!r}")
        self.b = int(b)
        self.seed = int(seed)
        self.m = 1 << self.b
        self.max_rank = 64 - self.b
        if registers is None:
            self.registers = np.zeros(self.m, dtype=np.uint8)
        else:
            registers = np.asarray(registers, dtype=np.uint8)
            if registers.shape != (self.m,):
                raise ConfigError(f"expected {self.m} registers, got {registers.shape}")
            self.registers = registers.copy()

    def empty_like(self) -> HyperLogLog:
        return HyperLogLog(self.b, self.seed)

    def copy(self) -> HyperLogLog:
        return HyperLogLog(self.b, self.seed, self.registers)

    def add(self, x: int) -> None:
        self.update(np.array([x], dtype=np.uint64))

    def update(self, xs: Iterable[int] | np.ndarray) -> None:
        xs = np.asarray(xs if isinstance(xs, np.ndarray) else list(xs))
        if xs.size == 0:
            return
        h = hash64_array(xs, self.seed)
        idx = (h & np.uint64(self.m - 1)).astype(np.intp)
        rest = h >> np.uint64(self.b)
        rank = self.max_rank - bit_length_array(rest) + 1
        # rest == 0 would give max_rank + 1; keep registers inside [0, 64 - b]
        np.minimum(rank, self.max_rank, out=rank)
        np.maximum.at(self.registers, idx, rank.astype(np.uint8))

    def _check(self, other: HyperLogLog) -> None:
        if not isinstance(other, HyperLogLog):
            raise IncompatibleSketchError(f"cannot merge HyperLogLog with {type(other).__name__}")
        if other.b != self.b or other.seed != self.seed:
            raise IncompatibleSketchError(
                f"HyperLogLog parameters differ: (b={self.b}, seed={self.seed}) "
                f"vs (b={other.b}, seed={other.seed})"
            )

    def merge_inplace(self, other: HyperLogLog) -> HyperLogLog:
        self._check(other)
        np.maximum(self.registers, other.registers, out=self.registers)
        return self

    def merge(self, other: HyperLogLog) -> HyperLogLog:
        return self.copy().merge_inplace(other)

    def estimate(self) -> float:
        regs = self.registers
        zeros = int(np.count_nonzero(regs == 0))
        if zeros == self.m:
            return 0.0
        harmonic = float(np.ldexp(1.0, -regs.astype(np.int64)).sum())
        raw = alpha(self.m) * self.m * self.m / harmonic
        if raw <= 2.5 * self.m and zeros > 0:
            return self.m * math.log(self.m / zeros)
        return raw

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HyperLogLog):
            return NotImplemented
        return (
            self.b == other.b
            and self.seed == other.seed
            and bool(np.array_equal(self.registers, other.registers))
        )

    def __repr__(self) -> str:
        return f"HyperLogLog(b={self.b}, seed={self.seed}, estimate={self.estimate():.1f})"
