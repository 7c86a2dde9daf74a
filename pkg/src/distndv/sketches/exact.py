"""Exact-set stand-in for the l0 sketch.

Same interface as :class:`~distndv.sketches.hll.HyperLogLog` but keeps the
element set, so every estimate is the true cardinality. Pipelines run with
it must reproduce brute-force answers exactly.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from ..errors import IncompatibleSketchError
from .hashing import MASK64


class ExactL0:
    kind = "exact"

    def __init__(self, elements: Iterable[int] = ()):
        self.elements: set[int] = {int(x) & MASK64 for x in elements}

    def empty_like(self) -> ExactL0:
        return ExactL0()

    def copy(self) -> ExactL0:
        out = ExactL0()
        out.elements = set(self.elements)
        return out

    def add(self, x: int) -> None:
        self.elements.add(int(x) & MASK64)

    def update(self, xs: Iterable[int] | np.ndarray) -> None:
        if isinstance(xs, np.ndarray):
            xs = xs.astype(np.uint64).tolist()
        self.elements.update(int(x) & MASK64 for x in xs)

    def merge_inplace(self, other: ExactL0) -> ExactL0:
        if not isinstance(other, ExactL0):
            raise IncompatibleSketchError(f"cannot merge ExactL0 with {type(other).__name__}")
        self.elements |= other.elements
        return self

    def merge(self, other: ExactL0) -> ExactL0:
        return self.copy().merge_inplace(other)

    def estimate(self) -> float:
        return float(len(self.elements))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactL0):
            return NotImplemented
        return self.elements == other.elements

    def __repr__(self) -> str:
        return f"ExactL0(size={len(self.elements)})"


class ExactL2:
    """Exact stand-in for the Count Sketch: keeps the summed frequency vector."""

    kind = "exact_l2"

    def __init__(self, counts: dict[int, int] | None = None):
        self.counts: dict[int, int] = {}
        for key, c in (counts or {}).items():
            if c:
                self.counts[int(key) & MASK64] = int(c)

    def empty_like(self) -> ExactL2:
        return ExactL2()

    def copy(self) -> ExactL2:
        return ExactL2(self.counts)

    def update(self, keys, deltas=1) -> None:
        keys = np.atleast_1d(np.asarray(keys)).astype(np.uint64)
        deltas = np.broadcast_to(np.asarray(deltas, dtype=np.int64), keys.shape)
        for key, delta in zip(keys.tolist(), deltas.tolist()):
            c = self.counts.get(key, 0) + delta
            if c:
                self.counts[key] = c
            else:
                self.counts.pop(key, None)

    def merge_inplace(self, other: ExactL2) -> ExactL2:
        if not isinstance(other, ExactL2):
            raise IncompatibleSketchError(f"cannot merge ExactL2 with {type(other).__name__}")
        for key, c in other.counts.items():
            total = self.counts.get(key, 0) + c
            if total:
                self.counts[key] = total
            else:
                self.counts.pop(key, None)
        return self

    def merge(self, other: ExactL2) -> ExactL2:
        return self.copy().merge_inplace(other)

    def estimate_l2sq(self) -> float:
        return float(sum(c * c for c in self.counts.values()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExactL2):
            return NotImplemented
        return self.counts == other.counts

    def __repr__(self) -> str:
        return f"ExactL2(keys={len(self.counts)})"
