"""Marginal-likelihood component checks; the full brute-force oracle
comparison lives in the acceptance suite."""

import numpy as np
import pytest
from numpy.polynomial.hermite import hermgauss
from scipy.special import logsumexp

from galqreg.gal import al_logpdf
from galqreg.marglik import ThetaStar, loglik_at, marglik_freq, marglik_req
from galqreg.model import McmcConfig, PanelDataset, PanelUnit, PriorSpec
from galqreg.freq_sampler import gal_loglik_sum, run_freq
from galqreg.req_sampler import run_req
from galqreg.samplers import RngStream


@pytest.fixture(scope="module")
def tiny(tiny_intercept_data_module=None):
    gen = np.random.default_rng(99)
    n, t = 4, 2
    alpha = gen.normal(0.0, 1.0, n)
    y = 1.0 + np.repeat(alpha, t) + gen.logistic(0.0, 0.7, n * t)
    units = [
        PanelUnit(id=f"u{i}", y=y[i * t : (i + 1) * t], X=np.ones((t, 1)), Z=np.ones((t, 1)))
        for i in range(n)
    ]
    data = PanelDataset(units, z_in_x=(0,), x_names=("const",), z_names=("const",))
    priors = PriorSpec(np.zeros(1), np.array([[25.0]]), n0=5.0, d0=8.0, c1=6.0, d1=4.0)
    return data, priors


class TestLoglikAt:
    def test_degenerate_heterogeneity_limit(self, tiny):
        data, _ = tiny
        theta = ThetaStar(beta=np.array([1.0]), sigma=0.8, omega=np.array([[1e-12]]),
                          p0=0.25, gamma=0.4)
        ll, _ = loglik_at(theta, data, J=2000, rng=RngStream(0))
        plug_in = gal_loglik_sum(data.layout.y - 1.0, 0.8, 0.25, 0.4)
        assert abs(ll - plug_in) < 1e-4

    def test_doubling_j_halves_variance(self, tiny):
        data, _ = tiny
        theta = ThetaStar(beta=np.array([1.0]), sigma=0.8, omega=np.array([[0.8]]),
                          p0=0.25, gamma=0.4)
        se_small, se_big = [], []
        for rep in range(10):
            _, se1 = loglik_at(theta, data, J=1000, rng=RngStream(rep, 1))
            _, se2 = loglik_at(theta, data, J=2000, rng=RngStream(rep, 2))
            se_small.append(se1**2)
            se_big.append(se2**2)
        ratio = np.mean(se_small) / np.mean(se_big)
        assert 1.5 < ratio < 2.6

    def test_single_unit_matches_gauss_hermite(self):
        y = np.array([0.7])
        data = PanelDataset([PanelUnit("u0", y, np.ones((1, 1)), np.ones((1, 1)))])
        beta, sigma, phi2, p0 = 0.2, 0.6, 0.9, 0.3
        theta = ThetaStar(beta=np.array([beta]), sigma=sigma, omega=np.array([[phi2]]),
                          p0=p0, gamma=None)
        ll, se = loglik_at(theta, data, J=200_000, rng=RngStream(5))
        gh_x, gh_w = hermgauss(64)
        alphas = np.sqrt(2.0 * phi2) * gh_x
        vals = al_logpdf(y[0] - beta - alphas, 0.0, sigma, p0)
        oracle = logsumexp(vals + np.log(gh_w / np.sqrt(np.pi)))
        assert abs(ll - oracle) < 3 * se

    def test_small_j_rejected(self, tiny):
        data, _ = tiny
        theta = ThetaStar(beta=np.array([1.0]), sigma=0.8, omega=np.array([[0.8]]),
                          p0=0.25, gamma=None)
        with pytest.raises(ValueError):
            loglik_at(theta, data, J=50, rng=RngStream(0))


@pytest.fixture(scope="module")
def fitted(tiny):
    data, priors = tiny
    cfg = McmcConfig(n_draws=2500, burn_in=500, p0=0.25, seed=3)
    chain_f = run_freq(data, priors, cfg)
    rep_f = marglik_freq(data, priors, cfg, chain_f, J=2000)
    chain_r = run_req(data, priors, cfg)
    rep_r = marglik_req(data, priors, cfg, chain_r, J=2000)
    return rep_f, rep_r


class TestReports:
    def test_bookkeeping_identity_exact(self, fitted):
        for rep in fitted:
            recon = rep.log_lik_star + rep.log_prior_star - sum(rep.log_post_ordinates.values())
            assert rep.log_ml == pytest.approx(recon, abs=1e-12)

    def test_ordinates_finite(self, fitted):
        for rep in fitted:
            assert np.isfinite(rep.log_ml)
            for v in rep.log_post_ordinates.values():
                assert np.isfinite(v)

    def test_expected_ordinate_blocks(self, fitted):
        rep_f, rep_r = fitted
        assert set(rep_f.log_post_ordinates) == {"theta1", "beta", "phi2"}
        assert set(rep_r.log_post_ordinates) == {"beta", "phi2", "sigma"}

    def test_run_sizes_and_serialization(self, fitted):
        rep_f, _ = fitted
        assert rep_f.run_sizes == (2000, 2000, 2000)
        d = rep_f.to_dict()
        assert d["model"] == "freq"
        assert isinstance(d["theta_star"]["beta"], list)

    def test_wrong_model_rejected(self, tiny):
        data, priors = tiny
        cfg = McmcConfig(n_draws=300, burn_in=100, p0=0.25, seed=3)
        chain_r = run_req(data, priors, cfg)
        with pytest.raises(ValueError):
            marglik_freq(data, priors, cfg, chain_r)


class TestPermutationInvariance:
    def test_unit_shuffle_within_monte_carlo_error(self, tiny):
        data, priors = tiny
        cfg = McmcConfig(n_draws=9500, burn_in=1500, p0=0.25, seed=3)
        chain = run_freq(data, priors, cfg)
        rep = marglik_freq(data, priors, cfg, chain, J=20_000)

        perm = [2, 0, 3, 1]
        data_p = PanelDataset([data.units[i] for i in perm], data.z_in_x,
                              data.x_names, data.z_names)
        cfg_p = McmcConfig(n_draws=9500, burn_in=1500, p0=0.25, seed=4)
        chain_p = run_freq(data_p, priors, cfg_p)
        rep_p = marglik_freq(data_p, priors, cfg_p, chain_p, J=20_000)
        bound = 2.0 * np.sqrt(rep.lik_mc_se**2 + rep_p.lik_mc_se**2)
        assert abs(rep.log_ml - rep_p.log_ml) < bound
