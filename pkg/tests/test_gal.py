"""Distribution-family checks: normalization, the quantile-fixed identity,
the AL limit, closed-form anchors, and mixture/density equivalence."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import bisect
from scipy.special import ndtr

from galqreg.gal import (
    GalParams,
    al_logpdf,
    gal_bounds,
    gal_cdf,
    gal_derived,
    gal_draw_mixture,
    gal_logpdf,
    gal_moments,
)
from galqreg.samplers import RngStream
from _oracles import ks_statistic

# the 15-point (p0, gamma-fraction) verification grid used by several checks
GRID_P0 = (0.1, 0.25, 0.5, 0.75, 0.9)
GRID_GAMMA_FRAC = (0.0, 0.9, 0.5)  # 0 -> AL, 0.9 of L, 0.5 of U


def grid_points():
    pts = []
    for p0 in GRID_P0:
        lower, upper = gal_bounds(p0)
        for frac, side in zip(GRID_GAMMA_FRAC, ("zero", "lo", "hi")):
            gamma = 0.0 if side == "zero" else (frac * lower if side == "lo" else frac * upper)
            pts.append((p0, gamma))
    return pts


def _g(x):
    from scipy.special import log_ndtr

    return 2.0 * np.exp(log_ndtr(-abs(x)) + 0.5 * x * x)


class TestBounds:
    def test_symmetry_at_median(self):
        lower, upper = gal_bounds(0.5)
        assert upper > 0 > lower
        assert abs(upper + lower) < 1e-10

    def test_bisection_oracle_median(self):
        # root of g(x) = 0.5 on [0, 10] by plain bisection
        oracle = bisect(lambda x: _g(x) - 0.5, 1e-12, 10.0, xtol=1e-12)
        _, upper = gal_bounds(0.5)
        assert abs(upper - oracle) < 1e-9

    def test_residuals_at_quarter(self):
        lower, upper = gal_bounds(0.25)
        assert abs(_g(lower) - 0.75) < 1e-10
        assert abs(_g(upper) - 0.25) < 1e-10

    @given(p0=st.floats(0.02, 0.98))
    @settings(max_examples=40, deadline=None)
    def test_roots_solve_defining_equations(self, p0):
        lower, upper = gal_bounds(p0)
        assert lower < 0 < upper
        assert abs(_g(upper) - p0) < 1e-9
        assert abs(_g(lower) - (1 - p0)) < 1e-9

    def test_derived_constants_at_zero(self):
        der = gal_derived(0.25, 0.0)
        assert der.p == 0.25
        assert der.A == pytest.approx((1 - 0.5) / (0.25 * 0.75))
        assert der.B == pytest.approx(2 / (0.25 * 0.75))
        assert der.C == pytest.approx(-1 / 0.25)


class TestLogpdf:
    def test_al_mode_value(self):
        params = GalParams(0.0, 1.0, 0.5, 0.0)
        assert gal_logpdf(params, 0.0) == pytest.approx(np.log(0.25))

    @pytest.mark.parametrize("p0,gamma", grid_points())
    def test_normalization(self, p0, gamma):
        params = GalParams(0.0, 1.0, p0, gamma)
        der = gal_derived(p0, gamma) if gamma != 0 else None
        scale = 1.0 / min(der.p, 1 - der.p) if der else 1.0 / min(p0, 1 - p0)
        total, _ = quad(lambda s: np.exp(gal_logpdf(params, s)),
                        -80 * scale, 80 * scale, points=[0.0], limit=400,
                        epsabs=1e-10, epsrel=1e-10)
        assert abs(total - 1.0) < 1e-6

    def test_location_scale_identity(self):
        base = GalParams(0.0, 1.0, 0.25, 0.5)
        shifted = GalParams(2.0, 3.0, 0.25, 0.5)
        for s in (-4.0, -1.0, 0.0, 0.3, 2.0, 7.5):
            lhs = gal_logpdf(shifted, s)
            rhs = gal_logpdf(base, (s - 2.0) / 3.0) - np.log(3.0)
            assert abs(lhs - rhs) < 1e-12

    @pytest.mark.parametrize("sign", [1.0, -1.0])
    def test_al_limit(self, sign):
        p0 = 0.25
        params = GalParams(0.0, 1.0, p0, sign * 1e-6)
        s = np.linspace(-8.0, 8.0, 1601)
        gap = np.abs(np.exp(gal_logpdf(params, s)) - np.exp(al_logpdf(s, 0.0, 1.0, p0)))
        assert gap.max() < 1e-4

    def test_invalid_params_raise(self):
        with pytest.raises(ValueError):
            GalParams(0.0, -1.0, 0.5, 0.0)
        with pytest.raises(ValueError):
            GalParams(0.0, 1.0, 1.5, 0.0)
        lower, upper = gal_bounds(0.5)
        with pytest.raises(ValueError):
            GalParams(0.0, 1.0, 0.5, upper + 0.1)

    @given(
        p0=st.sampled_from(GRID_P0),
        frac=st.floats(-0.95, 0.95),
        mu=st.floats(-5, 5),
        sigma=st.floats(0.1, 10),
        s=st.floats(-20, 20),
    )
    @settings(max_examples=60, deadline=None)
    def test_logpdf_finite_everywhere(self, p0, frac, mu, sigma, s):
        lower, upper = gal_bounds(p0)
        gamma = frac * upper if frac >= 0 else -frac * lower
        params = GalParams(mu, sigma, p0, gamma)
        val = gal_logpdf(params, s)
        assert np.isfinite(val)


class TestCdf:
    @pytest.mark.parametrize("p0,gamma", grid_points())
    def test_quantile_fixed_identity(self, p0, gamma):
        params = GalParams(0.0, 1.0, p0, gamma)
        assert abs(gal_cdf(params, 0.0) - p0) < 1e-6

    def test_tail_proxies(self):
        params = GalParams(1.0, 2.0, 0.25, 0.5)
        assert gal_cdf(params, 1.0 - 100.0) < 1e-8
        assert gal_cdf(params, 1.0 + 500.0) > 1 - 1e-8

    def test_vector_path_matches_scalar(self):
        params = GalParams(0.0, 1.0, 0.25, 0.8)
        s = np.array([-3.0, -0.5, 0.0, 0.4, 2.0, 6.0])
        many = gal_cdf(params, s)
        each = np.array([gal_cdf(params, float(v)) for v in s])
        assert np.max(np.abs(many - each)) < 1e-8


class TestMoments:
    def test_paper_skewness_anchor_gal(self):
        _, _, skew = gal_moments(GalParams(0.0, 1.0, 0.25, 1.20))
        assert abs(skew - (-0.06)) < 0.01

    def test_paper_skewness_anchor_al(self):
        _, _, skew = gal_moments(GalParams(0.0, 1.0, 0.25, 0.0))
        assert abs(skew - 1.64) < 0.01

    def test_symmetric_al_zero_skewness(self):
        _, _, skew = gal_moments(GalParams(0.0, 1.0, 0.5, 0.0))
        assert abs(skew) < 1e-6

    def test_variance_positive(self):
        _, var, _ = gal_moments(GalParams(0.0, 2.0, 0.5, 0.3))
        assert var > 0


class TestMixture:
    def test_ks_against_quadrature_cdf(self):
        params = GalParams(0.0, 1.0, 0.25, 0.5)
        eps, _ = gal_draw_mixture(params, RngStream(0), size=1_000_000)
        eps = np.sort(eps)
        assert ks_statistic(eps, gal_cdf(params, eps)) < 0.002

    def test_quantile_fraction(self):
        params = GalParams(0.0, 1.0, 0.25, 0.5)
        eps, _ = gal_draw_mixture(params, RngStream(1), size=1_000_000)
        frac = (eps <= 0.0).mean()
        se = np.sqrt(0.25 * 0.75 / len(eps))
        assert abs(frac - 0.25) < 3 * se

    def test_gamma_zero_reduces_to_al_mixture(self):
        params = GalParams(0.0, 1.0, 0.25, 0.0)
        eps, _ = gal_draw_mixture(params, RngStream(2), size=1_000_000)
        # direct AL mixture: sigma*A*omega + sigma*sqrt(B*omega)*u
        der = gal_derived(0.25, 0.0)
        gen = np.random.default_rng(42)
        omega = gen.standard_exponential(1_000_000)
        u = gen.standard_normal(1_000_000)
        direct = der.A * omega + np.sqrt(der.B * omega) * u
        from _oracles import two_sample_ks

        assert two_sample_ks(eps, direct) < 0.002

    def test_latent_transforms(self):
        params = GalParams(0.0, 2.0, 0.25, 0.5)
        _, lat = gal_draw_mixture(params, RngStream(3), size=100)
        assert np.allclose(lat.nu, 2.0 * lat.omega)
        assert np.allclose(lat.h, 2.0 * lat.s)
        assert np.all(lat.h >= 0)

    @pytest.mark.parametrize("p0,gamma", grid_points())
    def test_mixture_matches_cdf_on_grid(self, p0, gamma):
        params = GalParams(0.0, 1.0, p0, gamma)
        eps, _ = gal_draw_mixture(params, RngStream(17), size=200_000)
        eps = np.sort(eps)
        assert ks_statistic(eps, gal_cdf(params, eps)) < 0.004
