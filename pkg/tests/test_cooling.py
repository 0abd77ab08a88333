import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cooling_walk.alpha import AlphaLaw, recurrent_two_point
from cooling_walk.cooling import (
    BreakerInfeasibleError,
    CoolingMap,
    CoolingOverflowError,
    DoubleExp,
    Explicit,
    Exponential,
    FasterDoubleExp,
    MapExhaustedError,
    NoPositiveMeanError,
    Polynomial,
    RepeatedBlocks,
    build_recurrence_breaker,
    divergence_report,
    single_interval,
)


class TestLocate:
    def test_linear_increments(self):
        cmap = CoolingMap(Explicit((1, 2, 3, 4)))  # T_k = k, tau = 0,1,3,6,10
        loc = cmap.locate(5)
        assert (loc.ell, loc.tau_prev, loc.boundary_time) == (3, 3, 2)

    def test_time_zero(self):
        for fam in (Explicit((4, 5)), Polynomial(2.0, 1.5), Exponential(0.7)):
            loc = CoolingMap(fam).locate(0)
            assert (loc.ell, loc.tau_prev, loc.boundary_time) == (1, 0, 0)

    def test_refresh_time_boundary(self):
        cmap = CoolingMap(Explicit((1, 2, 3, 4)))
        loc = cmap.locate(6)
        assert (loc.ell, loc.tau_prev, loc.boundary_time) == (4, 6, 0)

    def test_identity_holds(self):
        cmap = CoolingMap(Polynomial(1.3, 1.1))
        for n in (0, 1, 17, 1234, 10**6):
            loc = cmap.locate(n)
            total = sum(cmap.increment(k) for k in range(1, loc.ell)) + loc.boundary_time
            assert total == n

    @given(
        st.lists(st.integers(1, 50), min_size=1, max_size=12),
        st.integers(0, 300),
    )
    @settings(max_examples=200, deadline=None)
    def test_identity_property(self, incs, n):
        cmap = CoolingMap(Explicit(tuple(incs)))
        if n > sum(incs):
            return
        loc = cmap.locate(n)
        assert sum(incs[: loc.ell - 1]) + loc.boundary_time == n
        assert 0 <= loc.boundary_time
        if loc.ell <= len(incs):
            assert loc.boundary_time < incs[loc.ell - 1]

    def test_monotone_taus(self):
        for fam in (Polynomial(0.4, 2.0), Exponential(0.3), DoubleExp(0.2)):
            cmap = CoolingMap(fam)
            taus = cmap.refresh_times_covering(10**4)
            assert np.all(np.diff(taus) >= 1)

    def test_exhausted_map(self):
        cmap = CoolingMap(Explicit((3, 4)))
        with pytest.raises(MapExhaustedError):
            cmap.locate(8)


class TestFamilies:
    def test_polynomial_rounding(self):
        fam = Polynomial(B=1.0, beta=1.0)
        assert [fam.increment(k) for k in (1, 2, 3)] == [1, 2, 3]
        tiny = Polynomial(B=0.01, beta=1.0)
        assert tiny.increment(1) == 1  # floor of 1

    def test_exponential(self):
        fam = Exponential(1.0)
        assert fam.increment(3) == round(math.exp(3.0))

    def test_double_exp_overflow(self):
        fam = DoubleExp(math.log(2) / 4)
        assert fam.increment(21) > 0
        with pytest.raises(CoolingOverflowError):
            fam.increment(22)
        # log-increments stay available past the cap
        assert CoolingMap(fam).log_increment(25) == pytest.approx(
            math.exp(25 * math.log(2) / 4)
        )

    def test_faster_double_exp(self):
        fam = FasterDoubleExp(1.0)
        assert fam.increment(1) == round(math.exp(math.exp(1.0)))
        with pytest.raises(CoolingOverflowError):
            fam.increment(3)
        assert fam.log_increment(5) == pytest.approx(math.exp(25.0))

    def test_blocks_equal_explicit(self):
        blocks = CoolingMap(RepeatedBlocks(((3, 1), (5, 1), (2, 1))))
        explicit = CoolingMap(Explicit((3, 5, 2)))
        for n in range(0, 10):
            assert blocks.locate(n) == explicit.locate(n)

    def test_blocks_repeat(self):
        cmap = CoolingMap(RepeatedBlocks(((2, 3), (7, 2))))
        assert list(cmap.increments(5)) == [2, 2, 2, 7, 7]
        assert cmap.finite_length == 5

    def test_single_interval(self):
        loc = single_interval(50).locate(49)
        assert (loc.ell, loc.tau_prev) == (1, 0)


class TestDivergenceReport:
    def test_exponential_fast_cooling(self):
        rep = divergence_report(CoolingMap(Exponential(1.0)), 200, gamma=1.0)
        assert rep.fast_cooling_ratio[-1] == pytest.approx(1.0, abs=0.05)
        assert rep.increments_diverge

    def test_polynomial_ratio_vanishes(self):
        rep = divergence_report(CoolingMap(Polynomial(1.0, 1.0)), 4000, gamma=0.75)
        assert rep.fast_cooling_ratio[-1] < 0.05

    def test_alternating_cesaro(self):
        incs = tuple(1 if k % 2 else k for k in range(1, 401))
        rep = divergence_report(CoolingMap(Explicit(incs)), 400)
        assert not rep.increments_diverge
        assert rep.cesaro_mean[-1] > 20  # ~ k/4
        assert rep.cesaro_mean[-1] > rep.cesaro_mean[40]

    def test_horizon_validation(self):
        with pytest.raises(Exception):
            divergence_report(CoolingMap(Exponential(1.0)), 5)


class TestRecurrenceBreaker:
    @staticmethod
    def exact_oracle_for(alpha):
        # closed-form annealed means for tiny n, with a tiny fake SE
        mean1 = 2.0 * alpha.omega_mean - 1.0

        def oracle(n, seed):
            if n == 1:
                return mean1, 1e-6
            if n == 2:
                return 2.0 * mean1, 2e-6
            return 0.0, 1.0  # useless grid point

        return oracle

    def test_builds_blocks_with_growth_condition(self):
        alpha = recurrent_two_point(2 / 3)
        rec = build_recurrence_breaker(
            alpha, self.exact_oracle_for(alpha), [1, 2, 9], margin=5.0,
            max_blocks=2, seed=3, last_block_count=100,
        )
        assert [b.length for b in rec.blocks] == [1, 2]
        n1, n2 = rec.blocks
        assert 0.5 * n1.count * n1.mean_estimate >= (n2.count + 1) * n2.length
        assert rec.cooling_map.family.blocks == ((1, n1.count), (2, n2.count))
        assert rec.rejected == ((9, 0.0, 1.0),)

    def test_symmetric_alpha_not_found(self):
        alpha = AlphaLaw.of((0.3, 0.5), (0.7, 0.5))

        def zero_oracle(n, seed):
            return 0.0, 1e-3

        with pytest.raises(NoPositiveMeanError):
            build_recurrence_breaker(alpha, zero_oracle, [1, 2, 4], seed=1)

    def test_simple_symmetric_walk_not_found(self):
        alpha = AlphaLaw.point(0.5)
        with pytest.raises(Exception):
            # point(0.5) is recurrent; oracle mean is 0 -> no grid point found
            build_recurrence_breaker(
                alpha, lambda n, s: (0.0, 1e-9), [1, 2], seed=1
            )

    def test_transient_alpha_rejected(self):
        with pytest.raises(Exception):
            build_recurrence_breaker(
                AlphaLaw.point(0.7), lambda n, s: (1.0, 0.0), [1], seed=1
            )

    def test_infeasible_counts(self):
        alpha = recurrent_two_point(2 / 3)
        with pytest.raises(BreakerInfeasibleError):
            build_recurrence_breaker(
                alpha,
                lambda n, s: (1e-9, 1e-12),
                [1, 2],
                max_blocks=2,
                seed=5,
                last_block_count=10**6,
                count_cap=10**6,
            )
