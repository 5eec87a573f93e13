"""Marginal-likelihood estimation through posterior ordinates and reduced runs.

The flexible model uses the reversibility of the MH kernel for (sigma, gamma):
its ordinate is a ratio of expectations estimated from the complete run (the
numerator, acceptance probability times proposal density of the move to the
high-density point) and a first reduced run with (sigma, gamma) pinned (the
denominator, average acceptance probability of leaving the point). The AL
model needs Gibbs ordinates only. The likelihood at the high-density point
integrates the unit effects out by per-unit Monte Carlo in log space.

Complete-run averages are accumulated by deterministically replaying the main
chain (identical seed and stream), so chains do not need to store their latent
histories.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import logsumexp
from scipy.stats import invwishart as _invwishart

from .exceptions import NumericalError
from .freq_sampler import (
    beta_conditional,
    beta_logpdf,
    fit_residuals,
    mh_log_accept,
    omega_conditional,
    run_freq,
)
from .gal import AL_GAMMA_TOL, _gal_logpdf_std, al_logpdf, gal_bounds
from .model import ChainOutput, McmcConfig, PanelDataset, PriorSpec
from .req_sampler import run_req, sigma_conditional_req
from .samplers import RngStream, btn_rect_logpdf, draw_btn_rect, log_invgamma_pdf

__all__ = ["ThetaStar", "MarglikReport", "loglik_at", "marglik_freq", "marglik_req"]

_LOG_2PI = np.log(2.0 * np.pi)

# substream keys for the auxiliary random streams of a marginal-likelihood run
_STREAM_REDUCED1 = 11
_STREAM_REDUCED2 = 12
_STREAM_QDRAWS = 13
_STREAM_LIK = 14


@dataclass(frozen=True)
class ThetaStar:
    """High-density parameter point; gamma is None for the AL model."""

    beta: np.ndarray
    sigma: float
    omega: np.ndarray
    p0: float
    gamma: Optional[float] = None


@dataclass
class MarglikReport:
    """Log marginal likelihood with its additive components.

    log_ml = log_lik_star + log_prior_star - sum(log_post_ordinates.values())
    holds exactly in the report's own numbers.
    """

    model: str
    log_ml: float
    log_lik_star: float
    lik_mc_se: float
    log_prior_star: float
    log_post_ordinates: dict
    theta_star: ThetaStar
    run_sizes: tuple
    J: int

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "log_ml": self.log_ml,
            "log_lik_star": self.log_lik_star,
            "lik_mc_se": self.lik_mc_se,
            "log_prior_star": self.log_prior_star,
            "log_post_ordinates": dict(self.log_post_ordinates),
            "theta_star": {
                "beta": self.theta_star.beta.tolist(),
                "sigma": self.theta_star.sigma,
                "gamma": self.theta_star.gamma,
                "omega": self.theta_star.omega.tolist(),
                "p0": self.theta_star.p0,
            },
            "run_sizes": list(self.run_sizes),
            "J": self.J,
        }


def _logmeanexp(terms) -> float:
    arr = np.asarray(terms, dtype=float)
    if arr.size == 0:
        raise NumericalError("no ordinate terms accumulated")
    return float(logsumexp(arr) - np.log(arr.size))


def _mvn_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> float:
    chol = np.linalg.cholesky(cov)
    d = np.linalg.solve(chol, x - mean)
    return float(-0.5 * d @ d - 0.5 * len(x) * _LOG_2PI - np.sum(np.log(np.diag(chol))))


def theta_star_from_chain(chain: ChainOutput, p0: float) -> ThetaStar:
    """Posterior-mean point; gamma is clipped into (L + 1e-6, U - 1e-6)."""
    beta = chain.draws["beta"].mean(axis=0)
    sigma = float(chain.draws["sigma"].mean())
    omega = chain.draws["omega"].mean(axis=0)
    omega = 0.5 * (omega + omega.T)
    if chain.model == "freq":
        lower, upper = gal_bounds(p0)
        gamma = float(np.clip(chain.draws["gamma"].mean(), lower + 1e-6, upper - 1e-6))
    else:
        gamma = None
    return ThetaStar(beta=beta, sigma=sigma, omega=omega, p0=p0, gamma=gamma)


# ---------------------------------------------------------------------------
# likelihood at the high-density point


def loglik_at(theta_star: ThetaStar, data: PanelDataset, J: int, rng: RngStream,
              chunk: int = 512) -> tuple[float, float]:
    """Monte Carlo log likelihood marginal of the unit effects.

    Per unit: log (1/J) sum_j prod_t f(y_it | x'beta + z'alpha_j) with
    alpha_j ~ N(0, Omega*), combined by log-sum-exp; the units are independent
    so their averages multiply (one J-sample average per unit). The standard
    error comes from the per-unit delta method.
    """
    if J < 100:
        raise ValueError("J must be at least 100")
    lay = data.layout
    n = data.n
    l = data.l
    chol = np.linalg.cholesky(theta_star.omega)
    eta = lay.y - lay.X @ theta_star.beta
    lw = np.empty((n, J))
    gen = rng.gen
    for off in range(0, J, chunk):
        jc = min(chunk, J - off)
        alpha = gen.standard_normal((n, jc, l)) @ chol.T
        zalpha = np.einsum("nl,njl->nj", lay.Z, alpha[lay.unit_index], optimize=True)
        resid = eta[:, None] - zalpha
        if theta_star.gamma is None or abs(theta_star.gamma) <= AL_GAMMA_TOL:
            logpdf = al_logpdf(resid, 0.0, theta_star.sigma, theta_star.p0)
        else:
            logpdf = _gal_logpdf_std(
                (resid / theta_star.sigma).ravel(), theta_star.p0, theta_star.gamma
            ).reshape(resid.shape) - np.log(theta_star.sigma)
        lw[:, off : off + jc] = np.add.reduceat(logpdf, lay.starts[:-1], axis=0)
    per_unit = logsumexp(lw, axis=1) - np.log(J)
    # delta method on each unit's average of normalized weights
    shift = lw.max(axis=1, keepdims=True)
    w = np.exp(lw - shift)
    wbar = w.mean(axis=1)
    wvar = w.var(axis=1, ddof=1)
    se2 = wvar / (J * wbar**2)
    return float(per_unit.sum()), float(np.sqrt(se2.sum()))


def _log_prior_at(theta: ThetaStar, priors: PriorSpec, include_gamma: bool) -> float:
    out = _mvn_logpdf(theta.beta, priors.beta0, priors.B0)
    out += float(log_invgamma_pdf(theta.sigma, 0.5 * priors.n0, 0.5 * priors.d0))
    if include_gamma:
        lower, upper = gal_bounds(theta.p0)
        out += -np.log(upper - lower)
    if priors.intercept_only:
        out += float(log_invgamma_pdf(theta.omega[0, 0], 0.5 * priors.c1, 0.5 * priors.d1))
    else:
        out += float(_invwishart.logpdf(theta.omega, df=priors.omega0, scale=priors.O0))
    return out


def _log_omega_ordinate_term(state, priors, theta: ThetaStar) -> float:
    kind, a, b = omega_conditional(state, priors)
    if kind == "ig":
        return float(log_invgamma_pdf(theta.omega[0, 0], a, b))
    return float(_invwishart.logpdf(theta.omega, df=a, scale=b))


# ---------------------------------------------------------------------------
# Chib-Jeliazkov estimator for the flexible model


def marglik_freq(
    data: PanelDataset,
    priors: PriorSpec,
    cfg: McmcConfig,
    chain: ChainOutput,
    *,
    m1: Optional[int] = None,
    m2: Optional[int] = None,
    J: int = 5000,
) -> MarglikReport:
    """Chib-Jeliazkov log marginal likelihood for a completed FREQ chain.

    ``cfg`` and ``priors`` must be the ones that produced ``chain``; the
    complete-run average is accumulated by replaying that chain. Reduced runs
    default to the main run's stored size.
    """
    if chain.model != "freq":
        raise ValueError("marglik_freq needs a FREQ chain")
    if chain.calib is None:
        raise ValueError("chain is missing its proposal calibration")
    m = chain.n_stored
    m1 = m1 or m
    m2 = m2 or m
    theta = theta_star_from_chain(chain, cfg.p0)
    theta1 = np.array([theta.sigma, theta.gamma])
    lower, upper = gal_bounds(cfg.p0)
    lo = np.array([0.0, lower])
    hi = np.array([np.inf, upper])
    calib_star = replace(chain.calib)  # iota frozen at its post-burn-in value
    cov_q = calib_star.iota**2 * calib_star.D_hat

    # numerator of the (sigma, gamma) ordinate: replay of the complete run
    num_terms: list[float] = []

    def _on_main(state, idx):
        resid = fit_residuals(state, data)
        la = mh_log_accept(resid, (state.sigma, state.gamma), tuple(theta1),
                           cfg.p0, priors, calib_star)
        lq = btn_rect_logpdf(theta1, np.array([state.sigma, state.gamma]), cov_q, lo, hi)
        num_terms.append(la + lq)

    run_freq(data, priors, cfg, calib=chain.calib, on_store=_on_main, stream_id=0)

    # first reduced run: (sigma, gamma) pinned; accumulates the denominator
    # and the beta ordinate
    rng_q = RngStream(cfg.seed, _STREAM_QDRAWS)
    den_terms: list[float] = []
    beta_terms: list[float] = []

    def _on_reduced1(state, idx):
        prop = draw_btn_rect(theta1, cov_q, lo, hi, rng_q)
        resid = fit_residuals(state, data)
        den_terms.append(
            mh_log_accept(resid, tuple(theta1), (float(prop[0]), float(prop[1])),
                          cfg.p0, priors, calib_star)
        )
        mean, chol = beta_conditional(state, data, priors)
        beta_terms.append(beta_logpdf(theta.beta, mean, chol))

    cfg1 = replace(cfg, n_draws=cfg.burn_in + m1, thin=1, store_alpha=False)
    run_freq(data, priors, cfg1, calib=chain.calib,
             fixed={"sigma_gamma": (theta.sigma, theta.gamma)},
             on_store=_on_reduced1, stream_id=_STREAM_REDUCED1)

    # second reduced run: (beta, sigma, gamma) pinned; heterogeneity ordinate
    omega_terms: list[float] = []

    def _on_reduced2(state, idx):
        omega_terms.append(_log_omega_ordinate_term(state, priors, theta))

    cfg2 = replace(cfg, n_draws=cfg.burn_in + m2, thin=1, store_alpha=False)
    run_freq(data, priors, cfg2, calib=chain.calib,
             fixed={"sigma_gamma": (theta.sigma, theta.gamma), "beta": theta.beta},
             on_store=_on_reduced2, stream_id=_STREAM_REDUCED2)

    log_num = _logmeanexp(num_terms)
    log_den = _logmeanexp(den_terms)
    ordinates = {
        "theta1": log_num - log_den,
        "beta": _logmeanexp(beta_terms),
        ("phi2" if priors.intercept_only else "omega"): _logmeanexp(omega_terms),
    }
    log_lik, mc_se = loglik_at(theta, data, J, RngStream(cfg.seed, _STREAM_LIK))
    log_prior = _log_prior_at(theta, priors, include_gamma=True)
    log_ml = log_lik + log_prior - sum(ordinates.values())
    return MarglikReport(
        model="freq",
        log_ml=float(log_ml),
        log_lik_star=float(log_lik),
        lik_mc_se=float(mc_se),
        log_prior_star=float(log_prior),
        log_post_ordinates=ordinates,
        theta_star=theta,
        run_sizes=(m, m1, m2),
        J=J,
    )


# ---------------------------------------------------------------------------
# Chib estimator for the AL model


def marglik_req(
    data: PanelDataset,
    priors: PriorSpec,
    cfg: McmcConfig,
    chain: ChainOutput,
    *,
    g1: Optional[int] = None,
    g2: Optional[int] = None,
    J: int = 5000,
) -> MarglikReport:
    """Chib (Gibbs-ordinate) log marginal likelihood for a completed REQ chain."""
    if chain.model != "req":
        raise ValueError("marglik_req needs a REQ chain")
    g = chain.n_stored
    g1 = g1 or g
    g2 = g2 or g
    theta = theta_star_from_chain(chain, cfg.p0)

    # pi(beta* | y): complete-run average via replay
    beta_terms: list[float] = []

    def _on_main(state, idx):
        mean, chol = beta_conditional(state, data, priors)
        beta_terms.append(beta_logpdf(theta.beta, mean, chol))

    run_req(data, priors, cfg, on_store=_on_main, stream_id=0)

    # first reduced run (beta pinned): heterogeneity ordinate
    omega_terms: list[float] = []

    def _on_reduced1(state, idx):
        omega_terms.append(_log_omega_ordinate_term(state, priors, theta))

    cfg1 = replace(cfg, n_draws=cfg.burn_in + g1, thin=1, store_alpha=False)
    run_req(data, priors, cfg1, fixed={"beta": theta.beta},
            on_store=_on_reduced1, stream_id=_STREAM_REDUCED1)

    # second reduced run (beta, Omega pinned): sigma ordinate
    sigma_terms: list[float] = []

    def _on_reduced2(state, idx):
        shape, rate = sigma_conditional_req(state, data, priors)
        sigma_terms.append(float(log_invgamma_pdf(theta.sigma, shape, rate)))

    cfg2 = replace(cfg, n_draws=cfg.burn_in + g2, thin=1, store_alpha=False)
    run_req(data, priors, cfg2, fixed={"beta": theta.beta, "omega": theta.omega},
            on_store=_on_reduced2, stream_id=_STREAM_REDUCED2)

    ordinates = {
        "beta": _logmeanexp(beta_terms),
        ("phi2" if priors.intercept_only else "omega"): _logmeanexp(omega_terms),
        "sigma": _logmeanexp(sigma_terms),
    }
    log_lik, mc_se = loglik_at(theta, data, J, RngStream(cfg.seed, _STREAM_LIK))
    log_prior = _log_prior_at(theta, priors, include_gamma=False)
    log_ml = log_lik + log_prior - sum(ordinates.values())
    return MarglikReport(
        model="req",
        log_ml=float(log_ml),
        log_lik_star=float(log_lik),
        lik_mc_se=float(mc_se),
        log_prior_star=float(log_prior),
        log_post_ordinates=ordinates,
        theta_star=theta,
        run_sizes=(g, g1, g2),
        J=J,
    )
