import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distndv.coordinator import (
    SCALAR_BYTES,
    MergeCounter,
    SketchConfig,
    build_premerge,
    complement_cover,
    esti_d,
    esti_f1,
    esti_l2sq,
    esti_resample,
    run_protocol,
    summarize_all,
    summarize_machine,
    transfer,
)
from distndv.datagen import SamplePlan, gen_fof_poisson, sample_population
from distndv.errors import ConfigError, IncompatibleSketchError
from distndv.estimators import unseen_ratio
from distndv.frequency import dict_from_stream, dict_merge, fof_from_dict
from distndv.sketches import CountSketch, ExactL0, HyperLogLog

A, B, C = 101, 202, 303
EXACT = SketchConfig(l0="exact", roles=frozenset({"ndv", "f1"}))


def machines(k):
    """Machine j holds the single id j: unions are easy to read off."""
    return [ExactL0([j]) for j in range(k)]


def exact_f1(streams):
    return fof_from_dict(dict_merge(dict_from_stream(s) for s in streams)).f(1)


machine_streams = st.integers(1, 9).flatmap(
    lambda k: st.lists(st.lists(st.integers(0, 40), max_size=25), min_size=k, max_size=k)
)


class TestSummarize:
    def test_hand_trace(self):
        cfg = SketchConfig(l0="exact", cs_depth=3, cs_width=64, roles=frozenset({"ndv", "f1", "cs"}))
        s = summarize_machine([A, A, B], cfg)
        assert s.ndv_sketch.elements == {A, B}
        assert s.f1_sketch.elements == {B}
        ref = CountSketch(3, 64, cfg.cs_seed)
        ref.update([A, B], [2, 1])
        assert s.cs == ref
        assert (s.n_local, s.d_local) == (3, 2)

    def test_empty(self):
        s = summarize_machine([], SketchConfig(b=8))
        assert s.ndv_sketch.estimate() == 0
        assert s.f1_sketch.estimate() == 0
        assert s.cs.estimate_l2sq() == 0
        assert s.resample_ndv.estimate() == 0
        assert s.n_local == 0

    def test_all_singletons(self):
        s = summarize_machine(list(range(50)), EXACT)
        assert s.f1_sketch == s.ndv_sketch

    @given(st.lists(st.integers(0, 30), max_size=60))
    def test_f1_subset_of_ndv(self, stream):
        s = summarize_machine(stream, EXACT)
        assert s.f1_sketch.elements <= s.ndv_sketch.elements

    def test_roles_respected(self):
        s = summarize_machine([1, 2, 2], SketchConfig(b=6, roles=frozenset({"ndv", "f1"})))
        assert s.cs is None and s.resample_ndv is None

    def test_roles_validated(self):
        with pytest.raises(ConfigError):
            SketchConfig(roles=frozenset({"ndv"}))
        with pytest.raises(ConfigError):
            SketchConfig(roles=frozenset({"ndv", "f1", "bogus"}))


class TestPreMerge:
    def test_k4(self):
        tree = build_premerge(machines(4))
        assert [len(level) for level in tree.levels] == [4, 2]
        assert tree.levels[1][0].elements == {0, 1}
        assert tree.levels[1][1].elements == {2, 3}

    def test_k2_no_merges(self):
        counter = MergeCounter()
        ms = machines(2)
        tree = build_premerge(ms, counter)
        assert tree.levels == [ms]
        assert counter.merges == 0

    def test_k5_padded(self):
        tree = build_premerge(machines(5))
        assert tree.padded_k == 8
        assert [len(level) for level in tree.levels] == [8, 4, 2]
        assert all(s.estimate() == 0 for s in tree.levels[0][5:])
        assert esti_d(tree) == 5

    @pytest.mark.parametrize("k", [2, 4, 8, 16, 32])
    def test_node_covers_block(self, k):
        tree = build_premerge(machines(k))
        for l, level in enumerate(tree.levels):
            for i, node in enumerate(level):
                assert node.elements == set(range(i * 2**l, (i + 1) * 2**l))

    def test_mismatched_params(self):
        with pytest.raises(IncompatibleSketchError):
            build_premerge([HyperLogLog(8, 1), HyperLogLog(8, 2)])
        with pytest.raises(IncompatibleSketchError):
            build_premerge([HyperLogLog(8, 1), ExactL0()])


class TestComplementCover:
    def test_k4_index0(self):
        tree = build_premerge(machines(4))
        cover = complement_cover(tree, 0)
        assert [c.elements for c in cover] == [{1}, {2, 3}]

    def test_k2(self):
        tree = build_premerge(machines(2))
        assert [c.elements for c in complement_cover(tree, 1)] == [{0}]

    def test_k8_index5(self):
        tree = build_premerge(machines(8))
        cover = complement_cover(tree, 5)
        assert len(cover) == 3
        assert set().union(*(c.elements for c in cover)) == set(range(8)) - {5}

    def test_exhaustive(self):
        for k in range(1, 65):
            tree = build_premerge(machines(k))
            for j in range(tree.padded_k):
                cover = complement_cover(tree, j)
                assert len(cover) == int(math.log2(tree.padded_k))
                assert set().union(*(c.elements for c in cover)) == set(range(k)) - {j}

    def test_out_of_range(self):
        tree = build_premerge(machines(3))
        with pytest.raises(IndexError):
            complement_cover(tree, 4)


class TestEstimates:
    def test_two_machine_example(self):
        x = summarize_machine([A, B, B], EXACT)
        y = summarize_machine([A, C], EXACT)
        tree = build_premerge([x.ndv_sketch, y.ndv_sketch])
        assert esti_f1(tree, [x.f1_sketch, y.f1_sketch]) == 1
        assert esti_d(tree) == 3

    def test_empty_machines(self):
        summaries = summarize_all([np.array([], dtype=np.uint64)] * 4, SketchConfig(b=8))
        tree = build_premerge([s.ndv_sketch for s in summaries])
        assert esti_f1(tree, [s.f1_sketch for s in summaries]) == 0
        assert esti_d(tree) == 0

    def test_disjoint_singletons(self):
        streams = [list(range(10 * j, 10 * j + 10)) for j in range(6)]
        r = run_protocol(streams, EXACT)
        assert (r.f1, r.d) == (60, 60)

    def test_esti_d_any_order(self):
        rng = np.random.default_rng(3)
        sketches = []
        for _ in range(6):
            s = HyperLogLog(10, 4)
            s.update(rng.integers(0, 10**5, 2000))
            sketches.append(s)
        flat = sketches[0].copy()
        for s in sketches[::-1]:
            flat.merge_inplace(s)
        assert esti_d(build_premerge(sketches)) == flat.estimate()

    @given(machine_streams)
    @settings(max_examples=200, deadline=None)
    def test_oracle_equivalence(self, streams):
        r = run_protocol(streams, EXACT)
        fof = fof_from_dict(dict_merge(dict_from_stream(s) for s in streams))
        assert r.f1 == fof.f(1)
        assert r.d == fof.d

    @given(st.lists(st.integers(0, 30), max_size=30), st.lists(st.integers(0, 30), max_size=30))
    @settings(max_examples=300)
    def test_two_machine_identity(self, xs, ys):
        X, Y = Counter(xs), Counter(ys)
        x1 = ExactL0(k for k, c in X.items() if c == 1)
        y1 = ExactL0(k for k, c in Y.items() if c == 1)
        x0, y0 = ExactL0(X), ExactL0(Y)
        lhs = (x1.merge(y0).estimate() - y0.estimate()) + (x0.merge(y1).estimate() - x0.estimate())
        assert lhs == Counter((X + Y).values())[1]

    def test_mismatched_f1_count(self):
        tree = build_premerge(machines(4))
        with pytest.raises(ConfigError):
            esti_f1(tree, machines(3))


class TestL2:
    def cfg(self):
        return SketchConfig(l0="exact", cs_depth=5, cs_width=10_000, roles=frozenset({"ndv", "f1", "cs"}))

    def test_single_machine(self):
        assert esti_l2sq(summarize_all([[A, A, B]], self.cfg())) == 5

    def test_linearity_across_machines(self):
        assert esti_l2sq(summarize_all([[A], [A]], self.cfg())) == 4

    def test_empty(self):
        assert esti_l2sq(summarize_all([[], []], self.cfg())) == 0

    def test_missing(self):
        with pytest.raises(ConfigError):
            esti_l2sq(summarize_all([[A]], EXACT))


class TestResample:
    def test_full_resample_is_sample(self):
        cfg = SketchConfig(l0="exact", q_resample=1.0, roles=frozenset({"ndv", "f1", "resample_ndv", "resample_f1"}))
        streams = [[1, 1, 2, 3], [3, 4, 5], [6]]
        r = run_protocol(streams, cfg)
        assert (r.d_resample, r.f1_resample) == (r.d, r.f1) == (6, 4)

    def test_empty_resample(self):
        cfg = SketchConfig(l0="exact", q_resample=0.0, roles=frozenset({"ndv", "f1", "resample_ndv", "resample_f1"}))
        r = run_protocol([[1, 2, 3], [4, 4]], cfg)
        assert (r.d_resample, r.f1_resample) == (0, 0)

    def test_unseen_ratio_recovered(self):
        F = gen_fof_poisson(10**7, 100)
        q = 0.01
        streams = sample_population(F, SamplePlan(q, 16, 1))
        fof = fof_from_dict(dict_merge(dict_from_stream(s) for s in streams))
        cfg = SketchConfig(b=14, q_resample=q, roles=frozenset({"ndv", "f1", "resample_ndv", "resample_f1"}))
        r = run_protocol(streams, cfg)
        measured = (r.d - r.d_resample) / r.f1_resample
        assert measured == pytest.approx(unseen_ratio(fof, q), rel=0.15)

    def test_missing(self):
        with pytest.raises(ConfigError):
            esti_resample(summarize_all([[1]], EXACT))


class TestAccounting:
    def cfg(self, b=12):
        return SketchConfig(b=b, cs_depth=5, cs_width=20000)

    def test_bytes_independent_of_data(self):
        F = gen_fof_poisson(10**6, 100)
        streams = sample_population(F, SamplePlan(0.01, 16, 0))
        _, full = transfer(summarize_all(streams, self.cfg()), streams)
        _, empty = transfer(summarize_all([np.array([], dtype=np.uint64)] * 16, self.cfg()))
        assert full.per_machine == empty.per_machine
        per = 4 * (11 + 3072) + (10 + 16 * 5 + 4 * 5 * 20000) + SCALAR_BYTES
        assert all(sum(m.values()) == per for m in full.per_machine)
        assert full.sketch_bytes == 16 * per

    def test_baseline_bytes(self):
        streams = [list(range(100)), list(range(100, 250))]
        _, ledger = transfer(summarize_all(streams, SketchConfig(b=6)), streams)
        assert ledger.baseline_per_machine == [900, 1350]
        assert ledger.baseline_bytes == 9 * 250

    def test_gee_roles_send_two_sketches(self):
        cfg = SketchConfig(b=12, roles=frozenset({"ndv", "f1"}))
        _, ledger = transfer(summarize_all([[1, 2]], cfg))
        assert ledger.per_machine == [{"ndv": 3083, "f1": 3083, "scalars": SCALAR_BYTES}]

    def test_roles_roundtrip_through_wire(self):
        summaries = summarize_all([[1, 1, 2], [2, 3]], self.cfg(b=8))
        received, _ = transfer(summaries)
        for a, b in zip(summaries, received):
            assert a.sketches().keys() == b.sketches().keys()
            assert all(a.sketches()[r] == b.sketches()[r] for r in a.sketches())

    @pytest.mark.parametrize("k", [2, 3, 4, 5, 8, 16, 64, 100])
    def test_merge_bound(self, k):
        counter = MergeCounter()
        sketches = [HyperLogLog(4, 0) for _ in range(k)]
        tree = build_premerge(sketches, counter)
        esti_f1(tree, [HyperLogLog(4, 0) for _ in range(k)], counter)
        kp = tree.padded_k
        assert counter.merges <= 4 * kp * math.log2(kp) + 2 * kp
