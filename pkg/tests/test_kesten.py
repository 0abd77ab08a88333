import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from cooling_walk import kesten
from cooling_walk.kesten import (
    GridTooNarrowError,
    MgfDomainError,
    MixtureLaw,
    MixtureWeights,
    canonicalize,
    lambda_q,
    mixtures_equal_in_law,
    q_from_c,
)
from cooling_walk.stats import EmpiricalSample, ks_critical, ks_distance


def mp_density(x, terms=400):
    """High-precision oracle for the alternating-series density."""
    with mpmath.workdps(40):
        xa = abs(mpmath.mpf(x))
        total = mpmath.mpf(0)
        for k in range(terms):
            a = (2 * k + 1) ** 2 * mpmath.pi**2 / 8
            total += (-1) ** k / mpmath.mpf(2 * k + 1) * mpmath.e ** (-a * xa)
        return float(2 / mpmath.pi * total)


class TestDensity:
    def test_at_zero(self):
        assert kesten.density(0.0) == pytest.approx(0.5, abs=1e-12)

    def test_matches_mpmath(self):
        for x in (0.001, 0.01, 0.04, 0.06, 0.3, 1.7, 5.0):
            assert kesten.density(x) == pytest.approx(mp_density(x), abs=1e-12)

    def test_integrates_to_one(self):
        total, err = quad(kesten.density, -40, 40, limit=300)
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_symmetry(self):
        xs = np.linspace(-4, 4, 41)
        assert np.max(np.abs(kesten.density(xs) - kesten.density(-xs))) <= 1e-12

    def test_nonnegative(self):
        xs = np.linspace(-12, 12, 2001)
        assert np.all(kesten.density(xs) >= 0.0)


class TestCdf:
    def test_at_zero(self):
        assert kesten.cdf(0.0) == pytest.approx(0.5, abs=1e-12)

    def test_limits(self):
        assert kesten.cdf(-50.0) == pytest.approx(0.0, abs=1e-12)
        assert kesten.cdf(50.0) == pytest.approx(1.0, abs=1e-12)

    def test_monotone(self):
        xs = np.linspace(-10, 10, 801)
        assert np.all(np.diff(kesten.cdf(xs)) >= -1e-14)

    def test_derivative_matches_density(self):
        xs = np.linspace(-4, 4, 200)
        h = 1e-6
        deriv = (kesten.cdf(xs + h) - kesten.cdf(xs - h)) / (2 * h)
        assert np.max(np.abs(deriv - kesten.density(xs))) <= 1e-6

    def test_matches_quadrature(self):
        for x in (0.25, 1.0, 3.0):
            part, _ = quad(kesten.density, -40, x, limit=300)
            assert kesten.cdf(x) == pytest.approx(part, abs=1e-9)


class TestQuantile:
    def test_median(self):
        assert kesten.quantile(0.5) == pytest.approx(0.0, abs=1e-11)

    def test_roundtrip(self):
        for u in (0.01, 0.2, 0.5, 0.77, 0.999):
            assert kesten.cdf(kesten.quantile(u)) == pytest.approx(u, abs=1e-11)

    def test_symmetry(self):
        for u in (0.05, 0.2, 0.41):
            assert kesten.quantile(u) == pytest.approx(-kesten.quantile(1 - u), abs=1e-9)

    def test_domain(self):
        with pytest.raises(ValueError):
            kesten.quantile(0.0)
        with pytest.raises(ValueError):
            kesten.quantile(1.0)


class TestVariance:
    def test_closed_series_vs_quadrature(self):
        quad_var, _ = quad(lambda x: x * x * kesten.density(x), -40, 40, limit=300)
        assert kesten.variance() == pytest.approx(quad_var, abs=1e-9)
        assert kesten.variance() == pytest.approx(1.35556, abs=1e-5)

    def test_exact_rational(self):
        # (4096/pi^7) * beta(7) evaluates to 61/45
        assert kesten.variance() == pytest.approx(61.0 / 45.0, abs=1e-14)


class TestMgf:
    def test_normalization(self):
        assert kesten.mgf(0.0) == pytest.approx(1.0, abs=1e-12)

    def test_against_quadrature_inside_radius(self):
        # at 0.9x the radius the integrand tail decays at rate A0/10
        t = 0.9 * kesten.MGF_RADIUS
        val, _ = quad(lambda x: math.exp(t * x) * kesten.density(x), -400, 400, limit=800)
        assert kesten.mgf(t) == pytest.approx(val, rel=1e-8)

    def test_domain_error(self):
        with pytest.raises(MgfDomainError):
            kesten.mgf(kesten.MGF_RADIUS)

    def test_quadrature_blows_up_beyond_radius(self):
        # inside the radius the truncated integrals converge; beyond, they grow
        t_bad = 1.2 * kesten.MGF_RADIUS
        partials = [
            quad(lambda x: math.exp(t_bad * x) * kesten.density(x), -L, L, limit=400)[0]
            for L in (20, 40, 80)
        ]
        assert partials[2] > 2 * partials[1] > 4 * partials[0] / 2
        t_ok = 0.8 * kesten.MGF_RADIUS
        ok = [
            quad(lambda x: math.exp(t_ok * x) * kesten.density(x), -L, L, limit=400)[0]
            for L in (40, 80, 160)
        ]
        assert ok[2] == pytest.approx(ok[1], rel=1e-3)

    def test_closed_form_consistency(self):
        # [sec - sech]/(2t) at sqrt(t/A0) must match the series
        for t in (0.1, 0.5, 1.0, -0.7):
            z = (math.pi / 2) * complex(t / kesten.A0) ** 0.5
            closed = ((1 / np.cos(z) - 1 / np.cosh(z)) / (2 * t)).real
            assert kesten.mgf(t) == pytest.approx(closed, rel=1e-9)


class TestCharfn:
    def test_at_zero(self):
        assert kesten.charfn(0.0) == pytest.approx(1.0, abs=1e-12)

    def test_matches_series(self):
        ts = np.array([1e-9, 0.05, 0.7, 3.0, 42.0, 900.0])
        closed = kesten.charfn(ts)
        series = kesten.charfn_series(ts, kmax=500_000)
        assert np.max(np.abs(closed - series)) <= 1e-9

    def test_even(self):
        ts = np.linspace(0.1, 30, 17)
        assert np.allclose(kesten.charfn(ts), kesten.charfn(-ts), atol=1e-14)


class TestSampler:
    def test_ks_against_cdf(self):
        s = kesten.sample(3, 10**5)
        ks = ks_distance(EmpiricalSample.from_values(s), kesten.cdf)
        assert ks <= ks_critical(10**5, slack=1.5)

    def test_deterministic_per_index(self):
        a = kesten.sample(9, 100)
        b = kesten.sample(9, 1000)
        assert np.array_equal(a, b[:100])

    @pytest.mark.slow
    def test_moments_large_sample(self):
        s = kesten.sample(11, 10**6)
        se_mean = s.std(ddof=1) / 1000.0
        assert abs(s.mean()) <= 4 * se_mean
        assert abs(s.var(ddof=1) - kesten.variance()) <= 0.01 * kesten.variance()


class TestMixtureWeights:
    def test_lambda_q_degenerate(self):
        lq = lambda_q(1.0)
        assert lq.entries == (0.0, 1.0)

    def test_lambda_q_geometric(self):
        lq = lambda_q(1 / math.sqrt(2))
        sq = lq.array**2
        assert sq[0] == 0.0
        for j in range(1, 6):
            assert sq[j] == pytest.approx(2.0**-j, abs=1e-15)

    def test_truncation_identity(self):
        q = 0.4
        for J in (5, 12, 30):
            lq = lambda_q(q, truncation=J)
            assert lq.norm_sq == pytest.approx(1 - (1 - q * q) ** J, abs=1e-13)

    def test_q_from_c(self):
        assert q_from_c(math.log(2) / 4) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
        assert q_from_c(1e-9) == pytest.approx(0.0, abs=1e-4)
        assert q_from_c(10.0) == pytest.approx(math.sqrt(1 - math.e**-40), abs=1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            MixtureWeights.of([1.0, 0.5])  # norm > 1
        with pytest.raises(ValueError):
            MixtureWeights.of([-0.1])
        with pytest.raises(ValueError):
            MixtureWeights.of([0.01] * 80)

    def test_gaussian_remainder(self):
        w = MixtureWeights.of([0.6, 0.8])
        assert w.gaussian_remainder() == pytest.approx(0.0, abs=1e-7)
        assert MixtureWeights.of([0.6]).gaussian_remainder() == pytest.approx(0.8)

    def test_canonicalize_and_equality(self):
        a = MixtureWeights.of([0.2, 0.7, 0.5])
        b = MixtureWeights.of([0.7, 0.5, 0.2])  # permutation
        c = MixtureWeights.of([0.2, 0.0, 0.7, 0.0, 0.5])  # zero-padded
        assert canonicalize(a).entries == canonicalize(b).entries
        assert mixtures_equal_in_law(a, b)
        assert mixtures_equal_in_law(a, c)
        d = MixtureWeights.of([0.8, 0.6])
        e = MixtureWeights.of([0.9, math.sqrt(1 - 0.81)])
        assert not mixtures_equal_in_law(d, e)

    def test_zero_pinned_view(self):
        w = MixtureWeights.of([0.3, 0.1, 0.9])
        assert w.zero_pinned_sorted().entries == (0.3, 0.9, 0.1)


class TestMixtureLaw:
    def test_pure_gaussian_density(self):
        law = MixtureLaw(MixtureWeights.of([]), include_gaussian=True)
        dens = law.density_on_grid(law.default_grid())
        assert dens.max() == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-8)

    def test_unit_weight_is_standardized_base_law(self):
        law = MixtureLaw(MixtureWeights.of([1.0]), include_gaussian=False)
        dens = law.density_on_grid(law.default_grid())
        assert dens.max() == pytest.approx(kesten.sigma_v() / 2, abs=1e-6)

    def test_lambda_q_sampler_variance(self):
        law = MixtureLaw(lambda_q(1 / math.sqrt(2)), include_gaussian=False)
        s = law.sample(7, 2 * 10**5)
        assert abs(s.var(ddof=1) - 1.0) <= 0.01

    def test_sampler_vs_fft_cdf_three_weights(self):
        cases = [
            MixtureWeights.of([0.0, 1.0]),
            lambda_q(0.9),
            MixtureWeights.of([0.5, 0.5, 0.5]),  # gaussian remainder 0.5
        ]
        for i, w in enumerate(cases):
            law = MixtureLaw(w, include_gaussian=True)
            s = law.sample(100 + i, 10**5)
            ks = ks_distance(EmpiricalSample.from_values(s), law.cdf)
            assert ks <= 0.01, (i, ks)

    def test_mgf_factorization_two_terms(self):
        w = MixtureWeights.of([0.8, 0.5])
        law = MixtureLaw(w, include_gaussian=False)
        sv = kesten.sigma_v()
        t = 0.3 * law.mgf_radius()
        product = kesten.mgf(0.8 * t / sv) * kesten.mgf(0.5 * t / sv)
        assert law.mgf(t) == pytest.approx(product, rel=1e-8)
        # against an independent quadrature of the FFT density
        xs = law.default_grid()
        dens = law.density_on_grid(xs)
        quad_mgf = float(np.trapezoid(dens * np.exp(t * xs), xs))
        assert law.mgf(t) == pytest.approx(quad_mgf, rel=1e-5)

    def test_mgf_radius(self):
        law = MixtureLaw(MixtureWeights.of([1.0]), include_gaussian=False)
        assert law.mgf_radius() == pytest.approx(math.pi**2 * kesten.sigma_v() / 8)
        gauss = MixtureLaw(MixtureWeights.of([]), include_gaussian=True)
        assert gauss.mgf_radius() == math.inf
        with pytest.raises(MgfDomainError):
            law.mgf(law.mgf_radius() * 1.01)

    def test_mgf_finite_at_090_radius(self):
        law = MixtureLaw(lambda_q(0.8), include_gaussian=False)
        t = 0.9 * law.mgf_radius()
        assert math.isfinite(law.mgf(t))

    def test_grid_too_narrow(self):
        law = MixtureLaw(MixtureWeights.of([1.0]), include_gaussian=False)
        with pytest.raises(GridTooNarrowError) as exc:
            law.density_on_grid(np.linspace(-0.5, 0.5, 11))
        assert exc.value.suggested_half_width > 0.5

    def test_kesten_eval_dispatch(self):
        assert kesten.kesten_eval("density", 0.0) == pytest.approx(0.5, abs=1e-12)
        assert kesten.kesten_eval("cdf", 0.0) == pytest.approx(0.5, abs=1e-12)
        assert kesten.kesten_eval("variance") == pytest.approx(61 / 45)
        assert kesten.kesten_eval("mgf", 0.1) > 1.0
        with pytest.raises(ValueError):
            kesten.kesten_eval("nope", 1.0)
