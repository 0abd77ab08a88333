import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from cooling_walk import kernels, rng
from cooling_walk.stats import (
    EmpiricalSample,
    StreamingMoments,
    derive_seed,
    ks_distance,
    mann_kendall,
    moments_with_se,
)


class TestKS:
    def test_single_point_vs_normal(self):
        s = EmpiricalSample.from_values([0.0])
        assert ks_distance(s, ndtr) == pytest.approx(0.5)

    def test_two_points_vs_symmetric_cdf(self):
        s = EmpiricalSample.from_values([-1.0, 1.0])

        def cdf(x):
            return np.interp(x, [-1.0, 1.0], [0.2, 0.8])

        assert ks_distance(s, cdf) == pytest.approx(0.3)

    def test_sample_against_own_ecdf(self):
        vals = np.arange(10.0)
        s = EmpiricalSample.from_values(vals)
        assert ks_distance(s, s.cdf) == 0.0

    def test_dkw_envelope_against_exact_dp(self):
        # KS of MC batches against the exact DP law obeys the DKW bound at a
        # 1% failure rate
        from cooling_walk import AlphaLaw, EnvironmentWindow, simulate_rwre
        from cooling_walk.walk import exact_quenched_distribution

        alpha = AlphaLaw.of((0.35, 0.5), (0.7, 0.5))
        env = EnvironmentWindow.sample(alpha, 11, -12, 12)
        dist = exact_quenched_distribution(env, 0, 12)
        reps = 2000
        eps = math.sqrt(math.log(2.0 / 0.01) / (2 * reps))
        failures = 0
        for r in range(100):
            batch = simulate_rwre(env, 0, 12, reps, seed=1000 + r, workers=1)
            ks = ks_distance(
                EmpiricalSample.from_values(batch.final_positions.astype(float)), dist.cdf
            )
            failures += ks > eps
        assert failures <= 4  # expect ~1


class TestMoments:
    def test_constant_sample_flag(self):
        m = moments_with_se([3.0, 3.0, 3.0])
        assert m.degenerate and m.variance == 0.0

    def test_hand_values(self):
        m = moments_with_se([0.0, 2.0])
        assert m.mean == pytest.approx(1.0)
        assert m.variance == pytest.approx(2.0)

    def test_normal_draws_mean_within_4se(self):
        x = np.random.default_rng(7).standard_normal(10**6)
        m = moments_with_se(x)
        assert abs(m.mean) < 4e-3
        assert abs(m.variance - 1.0) < 5 * m.variance_se

    def test_batch_means(self):
        x = np.random.default_rng(3).standard_normal(10_000)
        m = moments_with_se(x, batch_size=100)
        assert m.mean_se == pytest.approx(1.0 / 100.0, rel=0.5)

    def test_streaming_merge_matches(self):
        x = np.random.default_rng(5).standard_normal(1000)
        whole = StreamingMoments()
        whole.add_array(x)
        a, b = StreamingMoments(), StreamingMoments()
        a.add_array(x[:400])
        b.add_array(x[400:])
        merged = a.merge(b)
        assert merged.count == whole.count
        assert merged.mean == pytest.approx(whole.mean)
        assert merged.variance == pytest.approx(whole.variance)
        assert merged.minimum == whole.minimum and merged.maximum == whole.maximum


class TestSeedDerivation:
    def test_deterministic(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)

    def test_stream_order_matters(self):
        r = np.random.default_rng(0)
        for _ in range(10**5):
            s, a, b = (int(v) for v in r.integers(0, 2**63, 3))
            if a != b:
                assert derive_seed(s, a, b) != derive_seed(s, b, a)

    def test_no_collisions_across_masters(self):
        outs = {derive_seed(m, 7, 9) for m in range(10**5)}
        assert len(outs) == 10**5

    def test_no_collisions_across_streams(self):
        outs = {derive_seed(3, s, 0) for s in range(10**5)}
        assert len(outs) == 10**5

    def test_python_numpy_numba_agree(self):
        import numba as nb

        @nb.njit(cache=True)
        def probe_derive(m, s, ss):
            return kernels._derive(m, s, ss)

        @nb.njit(cache=True)
        def probe_site(e, x):
            return kernels._site_uniform(e, np.int64(x))

        @nb.njit(cache=True)
        def probe_stream(s, i):
            return kernels._mix64(s + np.uint64(i) * np.uint64(rng.GAMMA))

        U = np.uint64
        r = np.random.default_rng(1)
        for _ in range(500):
            m, s, ss = (int(v) for v in r.integers(0, 2**64, 3, dtype=np.uint64))
            assert probe_derive(U(m), U(s), U(ss)) == rng.derive_seed(m, s, ss)
        for _ in range(500):
            e = int(r.integers(0, 2**64, dtype=np.uint64))
            x = int(r.integers(-(2**40), 2**40))
            u = rng.site_uniform(e, x)
            assert probe_site(U(e), x) == u
            assert rng.site_uniforms(e, np.array([x]))[0] == u
        s0 = int(r.integers(0, 2**64, dtype=np.uint64))
        seq = rng.stream_uniforms(s0, 0, 64)
        for i in range(64):
            assert rng.stream_uniform(s0, i) == seq[i]
            assert rng.unit64(int(probe_stream(U(s0), i))) == seq[i]


class TestMannKendall:
    def test_increasing_sequence(self):
        t = mann_kendall(np.arange(12.0))
        assert t.p_upward < 0.01
        assert t.p_downward > 0.9

    def test_se_censoring_suppresses_microtrends(self):
        x = 1.0 - 1e-6 * np.arange(12.0)  # microscopically decreasing
        t = mann_kendall(x, ses=np.full(12, 0.01))
        assert t.statistic == 0

    @given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_antisymmetry(self, vals):
        fwd = mann_kendall(vals)
        rev = mann_kendall(vals[::-1])
        assert fwd.statistic == -rev.statistic
