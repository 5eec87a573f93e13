"""Generator-level checks: analytic moments, independent oracles, reproducibility."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from galqreg.exceptions import DegenerateRegionError
from galqreg.samplers import (
    RngStream,
    btn_rect_logpdf,
    bvn_rect_logprob,
    draw_btn_rect,
    draw_gig_half,
    draw_halfnormal,
    draw_invgamma,
    draw_invwishart,
    draw_truncnorm,
)
from _oracles import mc_se, two_sample_ks


class TestRngStream:
    def test_identical_keys_reproduce(self):
        a = RngStream(123, 4).gen.standard_normal(100)
        b = RngStream(123, 4).gen.standard_normal(100)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(123, 0).gen.standard_normal(100)
        b = RngStream(123, 1).gen.standard_normal(100)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.3

    def test_substream_deterministic(self):
        r = RngStream(5, 2)
        a = r.substream(9).gen.standard_normal(10)
        b = RngStream(5, 2).substream(9).gen.standard_normal(10)
        assert np.array_equal(a, b)

    @given(seed=st.integers(0, 2**63 - 1), stream=st.integers(0, 2**63 - 1))
    @settings(max_examples=25, deadline=None)
    def test_any_key_is_reproducible(self, seed, stream):
        a = RngStream(seed, stream).gen.uniform(size=8)
        b = RngStream(seed, stream).gen.uniform(size=8)
        assert np.array_equal(a, b)


class TestGigHalf:
    def test_mean_chi1_psi1(self):
        x = draw_gig_half(1.0, 1.0, RngStream(0), size=1_000_000)
        # E[X] = sqrt(chi/psi) (1 + 1/sqrt(chi psi)) = 2
        assert abs(x.mean() - 2.0) < 3 * mc_se(x)

    def test_mean_chi4_psi1(self):
        x = draw_gig_half(4.0, 1.0, RngStream(1), size=1_000_000)
        assert abs(x.mean() - 3.0) < 3 * mc_se(x)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            draw_gig_half(1.0, 0.0, RngStream(0))
        with pytest.raises(ValueError):
            draw_gig_half(-1.0, 1.0, RngStream(0))

    @pytest.mark.parametrize("chi,psi", [(1.0, 1.0), (0.3, 5.0), (7.0, 0.2)])
    def test_against_generic_gig_oracle(self, chi, psi):
        # generic GIG via scipy: GIG(lam, chi, psi) = scale*geninvgauss(lam, b)
        n = 1_000_000
        mine = draw_gig_half(chi, psi, RngStream(2), size=n)
        b = np.sqrt(chi * psi)
        scale = np.sqrt(chi / psi)
        other = stats.geninvgauss.rvs(0.5, b, scale=scale, size=n,
                                      random_state=np.random.default_rng(101))
        assert two_sample_ks(mine, other) < 0.002

    def test_reproducible(self):
        a = draw_gig_half(1.0, 2.0, RngStream(3), size=1000)
        b = draw_gig_half(1.0, 2.0, RngStream(3), size=1000)
        assert np.array_equal(a, b)

    def test_tiny_chi_stays_finite_positive(self):
        x = draw_gig_half(1e-300, 2.0, RngStream(4), size=100_000)
        assert np.all(np.isfinite(x)) and np.all(x > 0)


class TestHalfNormal:
    def test_standard_mean(self):
        x = draw_halfnormal(0.0, 1.0, RngStream(0), size=1_000_000)
        assert np.all(x >= 0)
        assert abs(x.mean() - np.sqrt(2 / np.pi)) < 3 * mc_se(x)

    def test_scale_property(self):
        x = draw_halfnormal(0.0, 4.0, RngStream(1), size=1_000_000)
        assert abs(x.mean() - 2 * np.sqrt(2 / np.pi)) < 3 * mc_se(x)

    def test_far_from_zero(self):
        x = draw_halfnormal(5.0, 0.01, RngStream(2), size=1_000_000)
        assert abs(x.mean() - 5.0) < 3 * mc_se(x)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            draw_halfnormal(0.0, 0.0, RngStream(0))

    def test_negative_location_tail(self):
        # truncation far in the right tail of the parent normal
        x = draw_halfnormal(-10.0, 1.0, RngStream(3), size=200_000)
        ref = stats.truncnorm.rvs(10.0, np.inf, loc=-10.0, scale=1.0, size=200_000,
                                  random_state=np.random.default_rng(5))
        assert np.all(x >= 0)
        assert two_sample_ks(x, ref) < 0.005


class TestTruncNorm:
    @pytest.mark.parametrize("lo,hi", [(-1.0, 2.0), (0.5, 0.6), (-np.inf, -3.0), (8.0, np.inf), (25.0, 26.0)])
    def test_against_scipy(self, lo, hi):
        n = 200_000
        x = draw_truncnorm(0.0, 1.0, lo, hi, RngStream(9), size=n)
        ref = stats.truncnorm.rvs(lo, hi, size=n, random_state=np.random.default_rng(13))
        assert np.all(x >= lo) and np.all(x <= hi)
        assert two_sample_ks(x, ref) < 0.006


class TestBtnRect:
    def test_untruncated_means(self):
        rng = RngStream(0)
        draws = np.array([
            draw_btn_rect([0, 0], np.eye(2), [-np.inf, -np.inf], [np.inf, np.inf], rng)
            for _ in range(50_000)
        ])
        for j in range(2):
            assert abs(draws[:, j].mean()) < 3 * mc_se(draws[:, j])

    def test_halfnormal_marginal(self):
        rng = RngStream(1)
        draws = np.array([
            draw_btn_rect([0, 0], np.eye(2), [0, -np.inf], [np.inf, np.inf], rng)
            for _ in range(50_000)
        ])
        assert abs(draws[:, 0].mean() - np.sqrt(2 / np.pi)) < 3 * mc_se(draws[:, 0])

    def test_correlated_unit_square_vs_rejection_oracle(self):
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        rng = RngStream(2)
        draws = np.array([
            draw_btn_rect([0, 0], cov, [0, 0], [1, 1], rng) for _ in range(40_000)
        ])
        # rejection oracle on 10^7 proposals
        gen = np.random.default_rng(123)
        chol = np.linalg.cholesky(cov)
        raw = gen.standard_normal((10_000_000, 2)) @ chol.T
        keep = raw[(raw[:, 0] > 0) & (raw[:, 0] < 1) & (raw[:, 1] > 0) & (raw[:, 1] < 1)]
        for j in range(2):
            tol = 3 * np.sqrt(mc_se(draws[:, j]) ** 2 + mc_se(keep[:, j]) ** 2)
            assert abs(draws[:, j].mean() - keep[:, j].mean()) < tol

    def test_low_mass_gibbs_path_stays_inside(self):
        rng = RngStream(3)
        lo, hi = np.array([6.0, 6.0]), np.array([7.0, 7.0])
        x = draw_btn_rect([0, 0], np.eye(2), lo, hi, rng)
        assert np.all(x >= lo) and np.all(x <= hi)

    def test_degenerate_region_error(self):
        with pytest.raises(DegenerateRegionError):
            draw_btn_rect([0, 0], 0.01 * np.eye(2), [500, 500], [501, 501], RngStream(0))

    def test_not_spd_error(self):
        with pytest.raises(ValueError):
            draw_btn_rect([0, 0], np.array([[1.0, 2.0], [2.0, 1.0]]), [0, 0], [1, 1], RngStream(0))

    def test_logpdf_normalizes(self):
        # exp(logpdf) integrates to 1 over the rectangle (2-D trapezoid grid)
        mean = np.array([0.2, -0.1])
        cov = np.array([[1.0, 0.4], [0.4, 0.8]])
        lo, hi = np.array([-1.0, -0.5]), np.array([1.5, 2.0])
        xs = np.linspace(lo[0] + 1e-9, hi[0] - 1e-9, 301)
        ys = np.linspace(lo[1] + 1e-9, hi[1] - 1e-9, 301)
        grid = np.array([
            [np.exp(btn_rect_logpdf([x, y], mean, cov, lo, hi)) for y in ys] for x in xs
        ])
        total = np.trapezoid(np.trapezoid(grid, ys, axis=1), xs)
        assert abs(total - 1.0) < 1e-4

    @pytest.mark.parametrize(
        "mean,cov,lo,hi",
        [
            ([0, 0], [[1, 0.5], [0.5, 1]], [0, 0], [1, 1]),
            ([1, -0.5], [[2, -0.6], [-0.6, 0.5]], [0, -np.inf], [np.inf, 0.2]),
            ([0, 0], [[1, 0.9], [0.9, 1]], [3, 3], [8, 9]),
            ([5, 0.3], [[0.04, 0.01], [0.01, 0.09]], [0, -2], [np.inf, 2]),
        ],
    )
    def test_rect_logprob_matches_scipy(self, mean, cov, lo, hi):
        mine = bvn_rect_logprob(np.array(mean, float), np.array(cov, float),
                                np.array(lo, float), np.array(hi, float))
        mvn = stats.multivariate_normal(mean=mean, cov=cov)
        ref = mvn.cdf(np.minimum(hi, 1e8), lower_limit=np.maximum(lo, -1e8))
        assert abs(np.exp(mine) - ref) < 1e-8 * max(ref, 1e-12) + 1e-12


class TestInvWishart:
    def test_mean(self):
        rng = RngStream(0)
        draws = np.array([draw_invwishart(10.0, np.eye(2), rng) for _ in range(100_000)])
        target = np.eye(2) / 7.0
        for i in range(2):
            for j in range(2):
                assert abs(draws[:, i, j].mean() - target[i, j]) < 3 * mc_se(draws[:, i, j])

    def test_existence_boundary(self):
        # df = 2 > l - 1 = 1 is admissible even though the mean is undefined
        x = draw_invwishart(2.0, np.eye(2), RngStream(1))
        assert x.shape == (2, 2)
        with pytest.raises(ValueError):
            draw_invwishart(0.5, np.eye(2), RngStream(1))

    def test_spd_invariant(self):
        rng = RngStream(2)
        for _ in range(10_000):
            x = draw_invwishart(5.0, np.array([[2.0, 0.3], [0.3, 1.0]]), rng)
            assert np.allclose(x, x.T)
            assert np.linalg.eigvalsh(x).min() > 0


class TestInvGamma:
    def test_mean(self):
        x = draw_invgamma(3.0, 4.0, RngStream(0), size=1_000_000)
        assert abs(x.mean() - 2.0) < 3 * mc_se(x)

    def test_heavy_tail_median(self):
        x = draw_invgamma(0.5, 1.0, RngStream(1), size=1_000_000)
        assert np.all(x > 0)
        med_oracle = stats.invgamma.ppf(0.5, a=0.5, scale=1.0)
        assert abs(np.median(x) - med_oracle) / med_oracle < 0.01

    def test_domain_error(self):
        with pytest.raises(ValueError):
            draw_invgamma(-1.0, 1.0, RngStream(0))
