"""Synthetic populations, Binomial sampling and partitioning across machines.

Populations are never materialized. They are described by their
frequency-of-frequency ``F`` (``F[i]`` classes of size ``i``), and sampling
draws a Binomial(i, q) count per class, working bucket-wise when a size
has many classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import ConfigError, FoFParseError, ResourceError
from .frequency import FoF
from .sketches.hashing import hash64_array

MAX_SAMPLE_OCCURRENCES = 10**8
PER_CLASS_LIMIT = 10**4


@dataclass(frozen=True)
class PopulationSpec:
    distribution: str  # "poisson" | "zipf" | "file"
    N: int = 0
    lam: float | None = None
    s: float | None = None
    D: int | None = None
    path: str | None = None
    seed: int = 0

    def generate(self) -> FoF:
        if self.distribution == "poisson":
            if self.lam is None:
                raise ConfigError("poisson population needs lam")
            return gen_fof_poisson(self.N, self.lam, self.seed)
        if self.distribution == "zipf":
            if self.s is None:
                raise ConfigError("zipf population needs s")
            D = self.D if self.D is not None else max(1, self.N // 10)
            return gen_fof_zipf(self.N, self.s, D, self.seed)
        if self.distribution == "file":
            if not self.path:
                raise ConfigError("file population needs a path")
            return load_fof_file(self.path)
        raise ConfigError(f"unknown distribution {self.distribution!r}")


@dataclass(frozen=True)
class SamplePlan:
    q: float
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ConfigError(f"sample rate must be in (0, 1], got {self.q}")
        if self.k < 1:
            raise ConfigError(f"machine count must be >= 1, got {self.k}")


def _apportion(total: int, weights: np.ndarray, keys: np.ndarray, target: float) -> np.ndarray:
    """Largest-remainder rounding of ``total * weights`` to integers summing to ``total``.

    Ties in the remainder go to the key closest to ``target``.
    """
    share = total * weights / weights.sum()
    base = np.floor(share).astype(np.int64)
    left = total - int(base.sum())
    if left > 0:
        rem = np.round(share - base, 12)
        order = np.lexsort((np.abs(keys - target), -rem))
        base[order[:left]] += 1
    return base


def gen_fof_poisson(N: int, lam: float, seed: int = 0) -> FoF:
    """Population with ``round(N / lam)`` classes whose sizes follow Poisson(lam).

    Sizes are limited to ``[1, lam + 12 sqrt(lam)]``; the mass of size 0 is
    moved to size 1. ``seed`` is accepted for interface symmetry; the
    construction is deterministic.
    """
    if not lam > 0 or N < 1:
        raise ConfigError(f"need lam > 0 and N >= 1, got lam={lam}, N={N}")
    D = max(1, round(N / lam))
    hi = max(1, int(math.floor(lam + 12 * math.sqrt(lam))))
    sizes = np.arange(1, hi + 1)
    w = stats.poisson.pmf(sizes, lam)
    w[0] += stats.poisson.pmf(0, lam)
    F = _apportion(D, w, sizes, lam)
    return FoF((int(i), int(c)) for i, c in zip(sizes, F) if c)


def zipf_class_sizes(N: int, s: float, D: int) -> np.ndarray:
    """Sizes ``max(1, round(C / j**s))`` for ``j = 1..D`` with ``C`` fit to ``N``."""
    j = np.arange(1, D + 1, dtype=np.float64)
    inv = j**-s

    def sizes(c: float) -> np.ndarray:
        return np.maximum(1, np.rint(c * inv)).astype(np.int64)

    lo, hi = 0.0, float(N)
    while sizes(hi).sum() < N:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sizes(mid).sum() < N:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * max(1.0, hi):
            break
    a, b = sizes(lo), sizes(hi)
    return a if abs(int(a.sum()) - N) < abs(int(b.sum()) - N) else b


def gen_fof_zipf(N: int, s: float, D: int, seed: int = 0) -> FoF:
    if not s > 1:
        raise ConfigError(f"zipf skew must be > 1, got {s}")
    if D < 1 or N < D:
        raise ConfigError(f"need 1 <= D <= N, got D={D}, N={N}")
    sz = zipf_class_sizes(N, s, D)
    vals, cnt = np.unique(sz, return_counts=True)
    return FoF(zip(vals.tolist(), cnt.tolist()))


def _class_sample_counts(F: FoF, q: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Draw sampled counts per class: returns ``[(count, num_classes)]`` with count >= 1."""
    out: dict[int, int] = {}
    for i, Fi in sorted(F.items()):
        if Fi <= PER_CLASS_LIMIT:
            draws = rng.binomial(i, q, size=Fi)
            c, m = np.unique(draws[draws > 0], return_counts=True)
        else:
            c = np.arange(0, i + 1)
            split = rng.multinomial(Fi, stats.binom.pmf(c, i, q))
            keep = (c > 0) & (split > 0)
            c, m = c[keep], split[keep]
        for cc, mm in zip(c.tolist(), m.tolist()):
            out[cc] = out.get(cc, 0) + mm
    return sorted(out.items())


def sample_population(F: FoF, plan: SamplePlan) -> list[np.ndarray]:
    """Sample each class Binomially at rate ``q`` and scatter occurrences over ``k`` machines.

    Every sampled class gets one fresh 64-bit id; all of its occurrences carry
    that id, whichever machine they land on. Returns one uint64 array of
    occurrences per machine.
    """
    if plan.q * F.n > MAX_SAMPLE_OCCURRENCES:
        raise ResourceError(
            f"expected sample of {plan.q * F.n:.3g} occurrences exceeds guard {MAX_SAMPLE_OCCURRENCES:.0e}"
        )
    rng = np.random.default_rng(plan.seed)
    buckets = _class_sample_counts(F, plan.q, rng)
    classes = sum(m for _, m in buckets)
    # fmix64 is a bijection, so distinct counters give distinct ids
    id_seed = int(rng.integers(0, 2**63))
    ids = hash64_array(np.arange(classes, dtype=np.uint64), id_seed)
    reps = np.repeat(np.array([c for c, _ in buckets], dtype=np.int64), [m for _, m in buckets])
    occ = np.repeat(ids, reps)
    machine = rng.integers(0, plan.k, size=occ.size)
    order = np.argsort(machine, kind="stable")
    bounds = np.searchsorted(machine[order], np.arange(plan.k + 1))
    occ = occ[order]
    return [occ[bounds[j] : bounds[j + 1]] for j in range(plan.k)]


def expected_sample_stats(F: FoF, q: float, model: str = "poisson") -> tuple[float, float]:
    """Expected ``(f1, d)`` of a rate-``q`` sample of population ``F``.

    ``model="poisson"`` uses Poi(iq) in place of Binomial(i, q); ``"binomial"``
    is exact.
    """
    if q == 0 or not F:
        return 0.0, 0.0
    if not 0 < q <= 1:
        raise ConfigError(f"sample rate must be in [0, 1], got {q}")
    i = np.array(list(F.keys()), dtype=np.float64)
    Fi = np.array(list(F.values()), dtype=np.float64)
    if model == "poisson":
        f1 = float(np.sum(i * q * np.exp(-i * q) * Fi))
        d = float(np.sum(Fi * -np.expm1(-i * q)))
    elif model == "binomial":
        f1 = float(np.sum(i * q * (1 - q) ** (i - 1) * Fi))
        d = float(np.sum(Fi * (1 - (1 - q) ** i)))
    else:
        raise ConfigError(f"unknown model {model!r}")
    return f1, d


def check_assumption(F: FoF, q: float, c: float, model: str = "poisson") -> tuple[bool, float]:
    """Whether the expected singleton share ``E[f1] / E[d]`` reaches ``c``."""
    if not 0 < q <= 1:
        raise ConfigError(f"sample rate must be in (0, 1], got {q}")
    if not 0 < c < 1:
        raise ConfigError(f"threshold c must be in (0, 1), got {c}")
    f1, d = expected_sample_stats(F, q, model)
    ratio = f1 / d if d > 0 else 0.0
    return ratio >= c, ratio


def save_fof_file(F: FoF, path: str | Path) -> None:
    with open(path, "w") as fh:
        for i, c in F.sorted_items():
            fh.write(f"{i},{c}\n")


def load_fof_file(path: str | Path) -> FoF:
    """Read ``i,F_i`` lines (ascending ``i``, no header, blank lines ignored)."""
    out = FoF()
    last = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FoFParseError(f"expected 'i,F_i', got {line!r}", lineno)
            try:
                i, c = int(parts[0]), int(parts[1])
            except ValueError:
                raise FoFParseError(f"non-integer field in {line!r}", lineno) from None
            if i < 1:
                raise FoFParseError(f"frequency must be >= 1, got {i}", lineno)
            if c < 1:
                raise FoFParseError(f"count must be positive, got {c}", lineno)
            if i <= last:
                raise FoFParseError(f"frequencies must be strictly ascending ({i} after {last})", lineno)
            out[i] = c
            last = i
    return out
