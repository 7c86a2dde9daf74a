"""Distributed f1 / d / l2 estimation from per-machine sketches.

Each machine turns its sample into a :class:`MachineSummary`: an l0 sketch
of all local ids, an l0 sketch of ids seen exactly once locally, optionally
a Count Sketch of local counts and l0 sketches of a local resample. Only
these (serialized) summaries reach the coordinator.

An id is a global singleton iff it is a local singleton on some machine j
and absent everywhere else, so

    f1 = sum_j |F1_j  U  rest_j| - |rest_j|,   rest_j = union of machines != j

``rest_j`` is assembled from a binary tree of pre-merged sketches: one
sibling node per level, ``log2 k`` nodes in total.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, IncompatibleSketchError
from .frequency import FreqDict, dict_comm_bytes, dict_from_stream
from .sketches import CountSketch, ExactL0, ExactL2, HyperLogLog
from .sketches.wire import roundtrip

SCALAR_BYTES = 16  # n_local and d_local, 8 bytes each

ROLES = ("ndv", "f1", "cs", "resample_ndv", "resample_f1")


@dataclass(frozen=True)
class SketchConfig:
    """Parameters shared by every machine.

    ``l0="exact"`` swaps HyperLogLog for :class:`ExactL0` and ``l2="exact"``
    swaps the Count Sketch for :class:`ExactL2` (oracle runs).
    ``roles`` selects which sketches machines build and send.
    """

    l0: str = "hll"
    l2: str = "countsketch"
    b: int = 12
    l0_seed: int = 1
    cs_depth: int = 5
    cs_width: int = 20000
    cs_seed: int = 2
    q_resample: float = 0.01
    resample_seed: int = 3
    roles: frozenset = frozenset(ROLES)

    def __post_init__(self):
        if self.l0 not in ("hll", "exact"):
            raise ConfigError(f"unknown l0 sketch {self.l0!r}")
        if self.l2 not in ("countsketch", "exact"):
            raise ConfigError(f"unknown l2 sketch {self.l2!r}")
        unknown = set(self.roles) - set(ROLES)
        if unknown:
            raise ConfigError(f"unknown sketch roles {sorted(unknown)}")
        if not {"ndv", "f1"} <= set(self.roles):
            raise ConfigError("the ndv and f1 roles are always required")
        if "resample_ndv" in self.roles and not 0 <= self.q_resample <= 1:
            raise ConfigError(f"resample rate must be in [0, 1], got {self.q_resample}")

    def new_l0(self):
        if self.l0 == "exact":
            return ExactL0()
        return HyperLogLog(self.b, self.l0_seed)

    def new_cs(self) -> CountSketch | ExactL2:
        if self.l2 == "exact":
            return ExactL2()
        return CountSketch(self.cs_depth, self.cs_width, self.cs_seed)

    @property
    def wants_cs(self) -> bool:
        return "cs" in self.roles

    @property
    def wants_resample(self) -> bool:
        return "resample_ndv" in self.roles


@dataclass
class MachineSummary:
    ndv_sketch: object
    f1_sketch: object
    n_local: int
    d_local: int
    cs: CountSketch | ExactL2 | None = None
    resample_ndv: object | None = None
    resample_f1: object | None = None

    def sketches(self) -> dict[str, object]:
        found = {
            "ndv": self.ndv_sketch,
            "f1": self.f1_sketch,
            "cs": self.cs,
            "resample_ndv": self.resample_ndv,
            "resample_f1": self.resample_f1,
        }
        return {k: v for k, v in found.items() if v is not None}


@dataclass
class MergeCounter:
    merges: int = 0

    def merge_into(self, acc, other):
        self.merges += 1
        return acc.merge_inplace(other)

    def merged(self, a, b):
        self.merges += 1
        return a.merge(b)


@dataclass
class PMTree:
    """Pre-merged sketches: ``levels[l][i]`` covers machines ``[i*2**l, (i+1)*2**l)``.

    ``k`` is the number of real machines; level 0 is padded with empty
    sketches up to a power of two (at least 2).
    """

    levels: list[list]
    k: int

    @property
    def padded_k(self) -> int:
        return len(self.levels[0])

    @property
    def height(self) -> int:
        return len(self.levels)


@dataclass
class CommLedger:
    per_machine: list[dict[str, int]] = field(default_factory=list)
    baseline_per_machine: list[int] = field(default_factory=list)
    merges: int = 0

    @property
    def sketch_bytes(self) -> int:
        return sum(sum(m.values()) for m in self.per_machine)

    @property
    def baseline_bytes(self) -> int:
        return sum(self.baseline_per_machine)

    def role_totals(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for m in self.per_machine:
            for role, nbytes in m.items():
                out[role] = out.get(role, 0) + nbytes
        return out


def _l0_summary(fd: FreqDict, cfg: SketchConfig):
    ndv = cfg.new_l0()
    f1 = cfg.new_l0()
    ndv.update(fd.ids)
    f1.update(fd.ids[fd.counts == 1])
    return ndv, f1


def summarize_machine(stream, cfg: SketchConfig, resample_rng: np.random.Generator | None = None) -> MachineSummary:
    occ = np.asarray(stream, dtype=np.uint64)
    fd = dict_from_stream(occ)
    ndv, f1 = _l0_summary(fd, cfg)
    summary = MachineSummary(ndv, f1, n_local=int(occ.size), d_local=len(fd))
    if cfg.wants_cs:
        summary.cs = cfg.new_cs()
        summary.cs.update(fd.ids, fd.counts)
    if cfg.wants_resample:
        rng = resample_rng if resample_rng is not None else np.random.default_rng(cfg.resample_seed)
        keep = rng.random(occ.size) < cfg.q_resample
        summary.resample_ndv, summary.resample_f1 = _l0_summary(dict_from_stream(occ[keep]), cfg)
    return summary


def summarize_all(streams: Sequence[np.ndarray], cfg: SketchConfig) -> list[MachineSummary]:
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.resample_seed).spawn(len(streams))]
    return [summarize_machine(s, cfg, r) for s, r in zip(streams, rngs)]


def transfer(summaries: Sequence[MachineSummary], streams: Sequence[np.ndarray] | None = None):
    """Ship summaries through the wire format, recording bytes per machine and role.

    When ``streams`` are given, the exact-dictionary baseline cost is recorded
    alongside.
    """
    ledger = CommLedger()
    received = []
    for s in summaries:
        costs: dict[str, int] = {}
        copies: dict[str, object] = {}
        for role, sk in s.sketches().items():
            copies[role], costs[role] = roundtrip(sk)
        costs["scalars"] = SCALAR_BYTES
        ledger.per_machine.append(costs)
        received.append(
            MachineSummary(
                copies["ndv"],
                copies["f1"],
                s.n_local,
                s.d_local,
                cs=copies.get("cs"),
                resample_ndv=copies.get("resample_ndv"),
                resample_f1=copies.get("resample_f1"),
            )
        )
    if streams is not None:
        ledger.baseline_per_machine = [dict_comm_bytes(dict_from_stream(s)) for s in streams]
    return received, ledger


def _padded(n: int) -> int:
    p = 2
    while p < n:
        p *= 2
    return p


def build_premerge(ndv_sketches: Sequence, counter: MergeCounter | None = None) -> PMTree:
    if not ndv_sketches:
        raise ConfigError("need at least one machine sketch")
    counter = counter if counter is not None else MergeCounter()
    first = ndv_sketches[0]
    for sk in ndv_sketches[1:]:
        if type(sk) is not type(first) or (
            isinstance(sk, HyperLogLog) and (sk.b, sk.seed) != (first.b, first.seed)
        ):
            raise IncompatibleSketchError("machine sketches do not share parameters")
    level = list(ndv_sketches) + [first.empty_like() for _ in range(_padded(len(ndv_sketches)) - len(ndv_sketches))]
    levels = [level]
    while len(level) > 2:
        level = [counter.merged(level[2 * i], level[2 * i + 1]) for i in range(len(level) // 2)]
        levels.append(level)
    return PMTree(levels, len(ndv_sketches))


def complement_cover(tree: PMTree, index: int) -> list:
    """Sibling at every level on the path from leaf ``index`` to the top.

    The union of the returned nodes is every machine except ``index``.
    """
    if not 0 <= index < tree.padded_k:
        raise IndexError(f"machine index {index} outside [0, {tree.padded_k})")
    return [tree.levels[l][(index >> l) ^ 1] for l in range(tree.height)]


def esti_f1(tree: PMTree, f1_sketches: Sequence, counter: MergeCounter | None = None) -> float:
    """Sum over machines of ``est(rest_j U F1_j) - est(rest_j)``, clamped at 0 once."""
    counter = counter if counter is not None else MergeCounter()
    if len(f1_sketches) != tree.k:
        raise ConfigError(f"{len(f1_sketches)} f1 sketches for a tree over {tree.k} machines")
    total = 0.0
    for j, f1_j in enumerate(f1_sketches):
        cover = complement_cover(tree, j)
        rest = cover[0].copy()
        for node in cover[1:]:
            counter.merge_into(rest, node)
        before = rest.estimate()
        counter.merge_into(rest, f1_j)
        total += rest.estimate() - before
    return max(total, 0.0)


def esti_d(tree: PMTree, counter: MergeCounter | None = None) -> float:
    counter = counter if counter is not None else MergeCounter()
    top = tree.levels[-1]
    return counter.merged(top[0], top[1]).estimate()


def esti_l2sq(summaries: Sequence[MachineSummary]) -> float:
    sketches = [s.cs for s in summaries]
    if not sketches or any(cs is None for cs in sketches):
        raise ConfigError("every machine must carry a Count Sketch")
    acc = sketches[0].copy()
    for cs in sketches[1:]:
        acc.merge_inplace(cs)
    return acc.estimate_l2sq()


def esti_resample(summaries: Sequence[MachineSummary], counter: MergeCounter | None = None) -> tuple[float, float]:
    if any(s.resample_ndv is None for s in summaries):
        raise ConfigError("resample sketches missing")
    tree = build_premerge([s.resample_ndv for s in summaries], counter)
    return esti_d(tree, counter), esti_f1(tree, [s.resample_f1 for s in summaries], counter)


@dataclass
class ProtocolResult:
    n: int
    d: float
    f1: float
    l2sq: float | None
    d_resample: float | None
    f1_resample: float | None
    ledger: CommLedger
    esti_f1_seconds: float


def run_protocol(
    streams: Sequence[np.ndarray],
    cfg: SketchConfig,
    with_baseline: bool = True,
    summarize: Callable = summarize_all,
) -> ProtocolResult:
    """Summarize each machine, ship the sketches, and estimate d, f1, l2 and resample stats."""
    received, ledger = transfer(summarize(streams, cfg), streams if with_baseline else None)
    counter = MergeCounter()
    t0 = time.perf_counter()
    tree = build_premerge([s.ndv_sketch for s in received], counter)
    f1 = esti_f1(tree, [s.f1_sketch for s in received], counter)
    elapsed = time.perf_counter() - t0
    d = esti_d(tree, counter)
    l2sq = esti_l2sq(received) if cfg.wants_cs else None
    d_res = f1_res = None
    if cfg.wants_resample:
        d_res, f1_res = esti_resample(received, counter)
    ledger.merges = counter.merges
    return ProtocolResult(
        n=sum(s.n_local for s in received),
        d=d,
        f1=f1,
        l2sq=l2sq,
        d_resample=d_res,
        f1_resample=f1_res,
        ledger=ledger,
        esti_f1_seconds=elapsed,
    )
