import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from incagg.design import full_design, subdiagonal_design
from incagg.estimators import cache_h_values, pair_two_sample, rademacher_signs, wild_bootstrap_statistics
from incagg.exceptions import ConfigError
from incagg.kernels import KernelSpec
from incagg.testing import (
    BandwidthCollection,
    TestConfig,
    aggregated_test,
    aggregated_test_from_caches,
    bootstrap_quantile,
    compute_u_alpha,
    exceedance_fraction,
    hsic_collection,
    mmd_ksd_collection,
    quantile_rank,
    single_test,
    single_test_from_cache,
    theoretical_collection,
    theoretical_levels,
)
from oracles import grid_u_alpha


def two_sample_caches(seed, n=60, shift=0.0, R=5, bandwidths=(0.25, 0.5, 1.0)):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(n, 1)), rng.normal(shift, 1.0, size=(n, 1))
    design = subdiagonal_design(n, R)
    specs = [KernelSpec.isotropic("gaussian", b, 1) for b in bandwidths]
    return [cache_h_values(pair_two_sample(X, Y, s), design) for s in specs], specs


class TestQuantile:
    @pytest.mark.parametrize(
        "B1, level, rank", [(500, 0.05, 475), (9, 0.1, 9), (19, 0.05, 19), (99, 0.05, 95), (100, 0.5, 50), (4, 0.99, 1)]
    )
    def test_rank(self, B1, level, rank):
        assert quantile_rank(B1, level) == rank

    def test_hand_example(self):
        # B1 = 4, level 0.25: rank ceil(3) = 3 among the five sorted values
        assert bootstrap_quantile([5.0, 1.0, 4.0, 2.0, 3.0], 0.25) == 3.0

    def test_level_bounds(self):
        with pytest.raises(ConfigError):
            bootstrap_quantile([1.0, 2.0], 0.0)
        with pytest.raises(ConfigError):
            bootstrap_quantile([1.0], 0.5)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=60), st.floats(0.001, 0.999), st.floats(0.001, 0.999))
    def test_monotone_in_level(self, vals, a, b):
        lo, hi = sorted([a, b])
        assert bootstrap_quantile(vals, hi) <= bootstrap_quantile(vals, lo)


class TestConfigValidation:
    @pytest.mark.parametrize("kw", [{"alpha": 0}, {"alpha": 1}, {"B1": 0}, {"B2": 2.5}, {"B3": -1}])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            TestConfig(**kw)

    def test_theory_bounds(self):
        assert not TestConfig().theory_bounds_met([0.25] * 4)
        assert TestConfig(B1=10**6, B2=2 * 10**4, B3=20).theory_bounds_met([0.25] * 4)

    def test_collection_weights(self):
        spec = KernelSpec.isotropic("gaussian", 1.0, 1)
        with pytest.raises(ConfigError):
            BandwidthCollection([spec, spec], [0.6, 0.6])
        with pytest.raises(ConfigError):
            BandwidthCollection([], [])


class TestSingle:
    def test_hand_trace(self):
        caches, _ = two_sample_caches(0, n=20, R=3, bandwidths=(1.0,))
        cache = caches[0]
        res = single_test_from_cache(cache, alpha=0.1, B1=9, seed=4)
        reps = wild_bootstrap_statistics(cache, signs=rademacher_signs(20, 9, 4, family=1))
        vals = sorted(list(reps) + [res.statistic])
        assert res.quantile == vals[8]
        assert res.reject == (res.statistic > vals[8])

    def test_rejects_clear_shift(self):
        rng = np.random.default_rng(0)
        X, Y = rng.normal(size=(200, 1)), rng.normal(2.0, 1.0, size=(200, 1))
        data = pair_two_sample(X, Y, KernelSpec.isotropic("gaussian", 1.0, 1))
        assert single_test(data, subdiagonal_design(200, 10), B1=200, seed=1).reject


class TestUAlpha:
    @pytest.mark.parametrize("alpha", [0.05, 0.25])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_grid_oracle(self, alpha, seed):
        caches, specs = two_sample_caches(seed, n=30, R=4, bandwidths=(0.5, 1.0))
        S1 = rademacher_signs(30, 8, seed, 1)
        S2 = rademacher_signs(30, 8, seed, 2)
        orig = [float(wild_bootstrap_statistics(c, signs=np.ones((1, 30)))[0]) for c in caches]
        q = np.array([wild_bootstrap_statistics(c, signs=S1) for c in caches])
        c = np.array([wild_bootstrap_statistics(c_, signs=S2) for c_ in caches])
        w = np.array([0.5, 0.5])
        u = compute_u_alpha(orig, q, c, w, alpha, B3=10)
        oracle, step = grid_u_alpha(orig, q, c, w, alpha)
        resolution = (1 / w.max()) / 2**10
        assert abs(u - oracle) <= max(resolution, step) + 1e-12

    def test_exceedance_monotone(self):
        rng = np.random.default_rng(0)
        orig = rng.normal(size=3)
        q = rng.normal(size=(3, 50))
        c = rng.normal(size=(3, 50))
        sorted_q = np.sort(np.column_stack([q, orig]), axis=1)
        w = np.array([0.2, 0.3, 0.5])
        fr = [exceedance_fraction(u, sorted_q, c, w) for u in np.linspace(0.01, 2, 100)]
        assert all(a <= b for a, b in zip(fr, fr[1:]))

    def test_singleton_matches_single_test(self):
        for seed in range(20):
            caches, specs = two_sample_caches(seed, n=40, shift=0.3 * (seed % 3), bandwidths=(1.0,))
            cfg = TestConfig(B1=99, B2=99, B3=20)
            res = aggregated_test_from_caches(caches, BandwidthCollection([specs[0]], [1.0]), cfg, seed)
            if res.degenerate:
                assert not res.reject
                continue
            single = single_test_from_cache(caches[0], alpha=res.u_alpha, B1=99, seed=seed)
            assert single.reject == res.reject


class TestAggregated:
    def test_result_fields_and_json(self):
        caches, specs = two_sample_caches(0, shift=1.0)
        res = aggregated_test_from_caches(caches, BandwidthCollection.uniform(specs), TestConfig(B1=300, B2=300), 3)
        obj = json.loads(res.to_json())
        assert obj["l_used"] == caches[0].design.size
        assert len(obj["per_bandwidth"]) == 3
        assert obj["reject"] == any(b["reject"] for b in obj["per_bandwidth"])
        assert len(res.csv_row().split(",")) == len(res.CSV_FIELDS)

    def test_level_is_u_times_weight(self):
        caches, specs = two_sample_caches(2)
        coll = BandwidthCollection(specs, [0.2, 0.3, 0.5])
        res = aggregated_test_from_caches(caches, coll, TestConfig(B1=300, B2=300), 1)
        for b, w in zip(res.per_bandwidth, coll.weights):
            assert b.level == pytest.approx(res.u_alpha * w, rel=1e-15)

    def test_deterministic(self):
        caches, specs = two_sample_caches(5, shift=0.4)
        coll = BandwidthCollection.uniform(specs)
        a = aggregated_test_from_caches(caches, coll, TestConfig(B1=200, B2=200), 11)
        b = aggregated_test_from_caches(caches, coll, TestConfig(B1=200, B2=200), 11)
        assert a.to_dict() == b.to_dict()

    @settings(max_examples=15, deadline=None)
    @given(st.floats(1e-3, 1e3))
    def test_scale_invariant(self, c):
        caches, specs = two_sample_caches(6, shift=0.4)
        coll = BandwidthCollection.uniform(specs)
        cfg = TestConfig(B1=200, B2=200)
        a = aggregated_test_from_caches(caches, coll, cfg, 2)
        b = aggregated_test_from_caches([x.scaled(c) for x in caches], coll, cfg, 2)
        assert a.reject == b.reject and a.u_alpha == b.u_alpha

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.01, 0.3), st.floats(0.01, 0.3))
    def test_monotone_in_alpha(self, a1, a2):
        lo, hi = sorted([a1, a2])
        caches, specs = two_sample_caches(8, shift=0.35)
        coll = BandwidthCollection.uniform(specs)
        r_lo = aggregated_test_from_caches(caches, coll, TestConfig(alpha=lo, B1=200, B2=200), 4)
        r_hi = aggregated_test_from_caches(caches, coll, TestConfig(alpha=hi, B1=200, B2=200), 4)
        assert r_lo.u_alpha <= r_hi.u_alpha
        assert r_hi.reject or not r_lo.reject

    def test_degenerate_never_rejects(self):
        # with B1 = B2 = 10 and four bandwidths no level passes the correction step
        caches, specs = two_sample_caches(0, shift=3.0, bandwidths=(0.25, 0.5, 1.0, 2.0))
        res = aggregated_test_from_caches(caches, BandwidthCollection.uniform(specs), TestConfig(B1=10, B2=10), 0)
        assert res.degenerate and res.u_alpha == 0.0 and not res.reject
        assert all(math.isinf(b.quantile) for b in res.per_bandwidth)

    def test_caches_must_share_design(self):
        caches, specs = two_sample_caches(0, bandwidths=(1.0,))
        other, _ = two_sample_caches(0, bandwidths=(1.0,))
        with pytest.raises(ConfigError):
            aggregated_test_from_caches(caches + other, BandwidthCollection.uniform(specs * 2), TestConfig(), 0)

    def test_full_design_power(self):
        rng = np.random.default_rng(0)
        X, Y = rng.normal(size=(150, 1)), rng.normal(1.0, 1.0, size=(150, 1))
        coll = mmd_ksd_collection(np.vstack([X, Y]))
        paired = [pair_two_sample(X, Y, k) for k in coll.kernels]
        assert aggregated_test(paired, full_design(150), coll, TestConfig(B1=300, B2=300), 0).reject


class TestCollections:
    def test_median_collection(self):
        Z = np.array([[0.0], [1.0], [3.0]])
        coll = mmd_ksd_collection(Z)
        assert [k.bandwidths[0] for k in coll.kernels] == [0.25, 0.5, 1.0, 2.0]
        np.testing.assert_array_equal(coll.weights, [0.25] * 4)

    def test_hsic_collection(self):
        X = np.array([[0.0], [2.0]])
        Y = np.array([[0.0], [4.0]])
        coll = hsic_collection(X, Y)
        assert len(coll) == 9
        assert (coll.kernels[0][0].bandwidths[0], coll.kernels[0][1].bandwidths[0]) == (0.5, 1.0)
        assert (coll.kernels[-1][0].bandwidths[0], coll.kernels[-1][1].bandwidths[0]) == (2.0, 4.0)

    def test_theoretical_levels(self):
        assert theoretical_levels(64 * 100, 100, 1) == 11
        with pytest.raises(ConfigError):
            theoretical_levels(200, 100, 1)

    def test_theoretical_collection(self):
        coll = theoretical_collection(64 * 100, 100, 1)
        assert len(coll) == 11
        assert coll.kernels[2].bandwidths[0] == 2.0**-3
        assert coll.weights[0] == pytest.approx(6 / math.pi**2)
        assert coll.weights.sum() < 1

    def test_theoretical_split(self):
        coll = theoretical_collection(64 * 100, 100, 3, split=1)
        k, l = coll.kernels[0]
        assert (k.dim, l.dim) == (1, 2)
