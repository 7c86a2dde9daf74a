"""Exact frequency dictionaries and frequency-of-frequency statistics.

A :class:`FreqDict` is what one machine would have to ship in the exact
baseline: every distinct sampled id with its count. Merging the dictionaries
of all machines and reading off its frequency-of-frequency gives the exact
``f_i`` every sketch-based estimate is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, NamedTuple

import numpy as np


@dataclass(eq=False)
class FreqDict:
    """Sorted unique ids with their positive counts."""

    ids: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint64))
    counts: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, int]) -> FreqDict:
        if not mapping:
            return cls()
        items = sorted((int(k), int(v)) for k, v in mapping.items())
        if any(v < 1 for _, v in items):
            raise ValueError("counts must be positive")
        ids = np.array([k for k, _ in items], dtype=np.uint64)
        counts = np.array([v for _, v in items], dtype=np.int64)
        return cls(ids, counts)

    def __len__(self) -> int:
        return int(self.ids.size)

    def __getitem__(self, key: int) -> int:
        pos = np.searchsorted(self.ids, np.uint64(key))
        if pos < self.ids.size and int(self.ids[pos]) == int(key):
            return int(self.counts[pos])
        raise KeyError(key)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids.tolist())

    def items(self) -> Iterator[tuple[int, int]]:
        return zip(self.ids.tolist(), self.counts.tolist())

    def as_dict(self) -> dict[int, int]:
        return dict(self.items())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FreqDict):
            return NotImplemented
        return np.array_equal(self.ids, other.ids) and np.array_equal(self.counts, other.counts)

    def __repr__(self) -> str:
        return f"FreqDict(d={len(self)}, n={self.total})"


class FoFStats(NamedTuple):
    d: int
    n: int
    f1: int
    f2: int
    l2sq: int


class FoF(dict):
    """Frequency of frequency: ``{i: f_i}`` over positive ``i`` and ``f_i``.

    Used both for samples (``f_i``) and populations (``F_i``).
    """

    def __init__(self, data: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        super().__init__()
        items = data.items() if isinstance(data, Mapping) else data
        for i, c in items:
            i, c = int(i), int(c)
            if i < 1:
                raise ValueError(f"frequency must be >= 1, got {i}")
            if c < 0:
                raise ValueError(f"count for frequency {i} is negative")
            if c:
                self[i] = self.get(i, 0) + c

    @property
    def d(self) -> int:
        return sum(self.values())

    @property
    def n(self) -> int:
        return sum(i * c for i, c in self.items())

    @property
    def l2sq(self) -> int:
        return sum(i * i * c for i, c in self.items())

    def f(self, i: int) -> int:
        return self.get(i, 0)

    def sorted_items(self) -> list[tuple[int, int]]:
        return sorted(self.items())

    def encode(self) -> str:
        """Compact ``"i:f_i;..."`` form, ascending in ``i``."""
        return ";".join(f"{i}:{c}" for i, c in self.sorted_items())

    @classmethod
    def decode(cls, text: str) -> FoF:
        if not text:
            return cls()
        return cls((int(a), int(b)) for a, b in (p.split(":") for p in text.split(";")))


def dict_from_stream(occurrences) -> FreqDict:
    arr = np.asarray(occurrences)
    if arr.size == 0:
        return FreqDict()
    ids, counts = np.unique(arr.astype(np.uint64), return_counts=True)
    return FreqDict(ids, counts.astype(np.int64))


def dict_merge(dicts: Iterable[FreqDict]) -> FreqDict:
    """Pointwise sum of counts (the exact baseline merge)."""
    dicts = [fd for fd in dicts if len(fd)]
    if not dicts:
        return FreqDict()
    if len(dicts) == 1:
        return FreqDict(dicts[0].ids.copy(), dicts[0].counts.copy())
    ids = np.concatenate([fd.ids for fd in dicts])
    counts = np.concatenate([fd.counts for fd in dicts])
    uniq, inverse = np.unique(ids, return_inverse=True)
    summed = np.bincount(inverse, weights=counts, minlength=uniq.size)
    return FreqDict(uniq, np.rint(summed).astype(np.int64))


def fof_from_dict(fd: FreqDict) -> FoF:
    if not len(fd):
        return FoF()
    freq, num = np.unique(fd.counts, return_counts=True)
    return FoF(zip(freq.tolist(), num.tolist()))


def fof_stats(f: FoF) -> FoFStats:
    return FoFStats(d=f.d, n=f.n, f1=f.f(1), f2=f.f(2), l2sq=f.l2sq)


def varint_len(counts: np.ndarray) -> np.ndarray:
    """LEB128 length in bytes of each non-negative count."""
    c = np.asarray(counts, dtype=np.uint64)
    length = np.ones(c.shape, dtype=np.int64)
    for shift in range(7, 64, 7):
        length += (c >> np.uint64(shift)) > 0
    return length


def dict_comm_bytes(fd: FreqDict) -> int:
    """Bytes to ship a dictionary: 8-byte id plus a varint count per entry."""
    if not len(fd):
        return 0
    return int(8 * len(fd) + varint_len(fd.counts).sum())
