import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from distndv.datagen import (
    SamplePlan,
    check_assumption,
    expected_sample_stats,
    gen_fof_poisson,
    gen_fof_zipf,
    load_fof_file,
    sample_population,
    save_fof_file,
    zipf_class_sizes,
)
from distndv.errors import ConfigError, FoFParseError, ResourceError
from distndv.frequency import FoF, dict_from_stream, dict_merge, fof_from_dict


def merged_fof(streams):
    return fof_from_dict(dict_merge(dict_from_stream(s) for s in streams))


class TestPoissonPopulation:
    def test_shape(self):
        F = gen_fof_poisson(10**6, 50)
        assert F.d == 20000
        assert abs(max(F, key=F.get) - 50) <= 1
        assert abs(F.n - 10**6) <= 0.01 * 10**6

    def test_support_window(self):
        F = gen_fof_poisson(10**6, 50)
        assert min(F) >= 1
        assert max(F) <= 50 + 12 * math.sqrt(50)

    def test_degenerate_single_class(self):
        assert gen_fof_poisson(50, 50) == {50: 1}
        assert gen_fof_poisson(100, 100) == {100: 1}

    @pytest.mark.parametrize("N,lam", [(0, 5), (10, 0), (10, -1)])
    def test_invalid(self, N, lam):
        with pytest.raises(ConfigError):
            gen_fof_poisson(N, lam)


class TestZipfPopulation:
    def test_hand_example(self):
        # 36/j^2 for j=1..3 -> 36, 9, 4
        assert gen_fof_zipf(49, 2.0, 3) == {4: 1, 9: 1, 36: 1}

    def test_single_class(self):
        assert gen_fof_zipf(1234, 1.5, 1) == {1234: 1}

    @pytest.mark.parametrize("s,D", [(1.2, 10**6), (1.5, 10**4), (2.0, 10**4)])
    def test_conservation(self, s, D):
        F = gen_fof_zipf(10**7, s, D)
        assert F.d == D
        assert abs(F.n - 10**7) <= 0.01 * 10**7

    def test_sizes_monotone(self):
        sizes = zipf_class_sizes(10**6, 2.0, 10**4)
        assert (np.diff(sizes) <= 0).all()
        assert sizes.min() >= 1

    @pytest.mark.parametrize("N,s,D", [(100, 1.0, 10), (100, 0.5, 10), (10, 2.0, 11), (10, 2.0, 0)])
    def test_invalid(self, N, s, D):
        with pytest.raises(ConfigError):
            gen_fof_zipf(N, s, D)


class TestSampling:
    def test_full_sample_reproduces_population(self):
        F = FoF({1: 30, 2: 20, 7: 5, 40: 2, 3: 20000})
        streams = sample_population(F, SamplePlan(1.0, 4, 9))
        assert merged_fof(streams) == F

    def test_sample_size_mean(self):
        F = gen_fof_poisson(10**6, 50)
        for seed in range(30):
            n = sum(s.size for s in sample_population(F, SamplePlan(0.01, 8, seed)))
            assert abs(n - 10**4) <= 0.05 * 10**4

    def test_singleton_population(self):
        F = FoF({1: 1000})
        f1 = [merged_fof(sample_population(F, SamplePlan(0.01, 2, s))).f(1) for s in range(100)]
        assert np.mean(f1) == pytest.approx(10, rel=0.1)

    def test_conservation_across_machines(self):
        F = gen_fof_zipf(10**6, 1.5, 10**4)
        streams = sample_population(F, SamplePlan(0.05, 13, 4))
        fof = merged_fof(streams)
        assert sum(s.size for s in streams) == fof.n
        assert len(streams) == 13

    def test_same_class_same_id_across_machines(self):
        F = FoF({1000: 1})
        streams = sample_population(F, SamplePlan(0.5, 8, 2))
        ids = {int(x) for s in streams for x in s}
        assert len(ids) == 1
        assert sum(s.size > 0 for s in streams) == 8

    def test_large_bucket_path(self):
        # F_i above the per-class limit goes through the multinomial split
        F = FoF({5: 200_000})
        fof = merged_fof(sample_population(F, SamplePlan(0.1, 2, 0)))
        expected = 200_000 * stats.binom.pmf(1, 5, 0.1)
        assert fof.f(1) == pytest.approx(expected, rel=0.02)

    def test_poissonization_consistency(self):
        F = FoF({1: 4000, 5: 2000, 20: 500, 80: 100, 200: 20})
        q = 0.01
        f1s, ds = [], []
        for seed in range(60):
            fof = merged_fof(sample_population(F, SamplePlan(q, 4, seed)))
            f1s.append(fof.f(1))
            ds.append(fof.d)
        e_f1, e_d = expected_sample_stats(F, q)
        for obs, exp in ((f1s, e_f1), (ds, e_d)):
            se = np.std(obs, ddof=1) / math.sqrt(len(obs))
            assert abs(np.mean(obs) - exp) <= 3 * se

    def test_partition_uniform(self):
        F = gen_fof_poisson(10**6, 50)
        for seed in range(30):
            sizes = [s.size for s in sample_population(F, SamplePlan(0.01, 16, seed))]
            assert stats.chisquare(sizes).pvalue > 0.001

    def test_resource_guard(self):
        with pytest.raises(ResourceError):
            sample_population(FoF({1: 10**9}), SamplePlan(0.5, 2, 0))

    @pytest.mark.parametrize("q,k", [(0, 1), (1.5, 1), (0.1, 0)])
    def test_bad_plan(self, q, k):
        with pytest.raises(ConfigError):
            SamplePlan(q, k)

    def test_deterministic(self):
        F = gen_fof_poisson(10**5, 20)
        a = sample_population(F, SamplePlan(0.1, 4, 5))
        b = sample_population(F, SamplePlan(0.1, 4, 5))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))


class TestExpectations:
    def test_singletons(self):
        f1, d = expected_sample_stats(FoF({1: 1000}), 0.01)
        assert f1 == pytest.approx(1000 * 0.01 * math.exp(-0.01))
        assert f1 == pytest.approx(9.90, abs=0.005)

    def test_zero_rate(self):
        assert expected_sample_stats(FoF({3: 10}), 0) == (0, 0)

    def test_large_class(self):
        f1, d = expected_sample_stats(FoF({100: 10}), 0.01)
        assert f1 == pytest.approx(10 * math.exp(-1))
        assert d == pytest.approx(10 * (1 - math.exp(-1)))

    def test_binomial_model(self):
        f1, d = expected_sample_stats(FoF({4: 3}), 0.5, model="binomial")
        assert f1 == pytest.approx(3 * 4 * 0.5 * 0.5**3)
        assert d == pytest.approx(3 * (1 - 0.5**4))


class TestAssumption:
    def test_singleton_population_passes(self):
        ok, ratio = check_assumption(FoF({1: 5000}), 0.001, 0.9)
        assert ok
        assert ratio == pytest.approx(1, abs=1e-3)

    def test_full_sample_without_singletons_fails(self):
        ok, ratio = check_assumption(FoF({2: 5, 7: 3}), 1.0, 0.1, model="binomial")
        assert not ok
        assert ratio == 0

    def test_matches_formula(self):
        F = gen_fof_poisson(10**6, 100)
        ok, ratio = check_assumption(F, 0.01, 0.5)
        num = sum(i * 0.01 * math.exp(-i * 0.01) * c for i, c in F.items())
        den = sum(c * (1 - math.exp(-i * 0.01)) for i, c in F.items())
        assert ratio == pytest.approx(num / den)
        assert ok == (ratio >= 0.5)

    @pytest.mark.parametrize("q,c", [(0, 0.5), (0.1, 0), (0.1, 1)])
    def test_bad_args(self, q, c):
        with pytest.raises(ConfigError):
            check_assumption(FoF({1: 1}), q, c)


class TestFoFFile:
    def test_parse(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("1,5\n2,3\n")
        assert load_fof_file(p) == {1: 5, 2: 3}

    @given(st.dictionaries(st.integers(1, 10**6), st.integers(1, 10**9), max_size=30))
    def test_roundtrip(self, tmp_path_factory, data):
        p = tmp_path_factory.mktemp("fof") / "f.csv"
        save_fof_file(FoF(data), p)
        assert load_fof_file(p) == FoF(data)

    @pytest.mark.parametrize(
        "text,line",
        [("1,5\n2,-3\n", 2), ("1,5\nx,3\n", 2), ("0,4\n", 1), ("2,1\n1,1\n", 2), ("1,2,3\n", 1), ("3,0\n", 1)],
    )
    def test_errors_carry_line(self, tmp_path, text, line):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(FoFParseError) as exc:
            load_fof_file(p)
        assert exc.value.lineno == line
