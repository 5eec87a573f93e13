"""Inefficiency factors, posterior summaries, and trace export."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.fft import next_fast_len, irfft, rfft

from .model import ChainOutput

__all__ = ["inefficiency_factor", "summarize", "SummaryRow", "ineff_from_draws"]


def _autocorr(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelations rho(0..max_lag) via FFT."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = len(x)
    nf = next_fast_len(2 * n)
    f = rfft(x, nf)
    acov = irfft(f * np.conj(f), nf)[: max_lag + 1]
    return acov / acov[0]


def inefficiency_factor(draws, taper_threshold: float = 0.05) -> float:
    """1 + 2 sum_{t=1}^{T*} rho(t) (n - t)/n, the finite-sample variance
    inflation of the chain mean relative to iid sampling.

    T* is the first lag at which the sample autocorrelation drops below
    ``taper_threshold`` (capped at n/10), matching the convention of tapering
    the sum where the autocorrelations die out. Floored at 1.0. A constant
    sequence has no defined autocorrelation and returns NaN as the error flag.
    """
    x = np.asarray(draws, dtype=float)
    if x.ndim != 1:
        raise ValueError("draws must be one-dimensional")
    n = len(x)
    if n < 100:
        raise ValueError("need at least 100 draws")
    if not 0.0 < taper_threshold < 1.0:
        raise ValueError("taper_threshold must lie in (0, 1)")
    if np.ptp(x) == 0.0:
        return float("nan")
    cap = max(1, n // 10)
    rho = _autocorr(x, cap)
    below = np.nonzero(rho[1:] < taper_threshold)[0]
    t_star = int(below[0]) + 1 if below.size else cap
    lags = np.arange(1, t_star + 1)
    val = 1.0 + 2.0 * float(np.sum(rho[1 : t_star + 1] * (n - lags) / n))
    return max(val, 1.0)


def ineff_from_draws(store: dict, intercept_only: bool, taper_threshold: float = 0.05) -> dict:
    """Per-parameter inefficiency factors for a stored draw dictionary."""
    out = {}
    m, k = store["beta"].shape
    if m < 100:
        return out
    for j in range(k):
        out[f"beta_{j+1}"] = inefficiency_factor(store["beta"][:, j], taper_threshold)
    out["sigma"] = inefficiency_factor(store["sigma"], taper_threshold)
    if np.ptp(store["gamma"]) > 0.0:
        out["gamma"] = inefficiency_factor(store["gamma"], taper_threshold)
    omega = store["omega"]
    l = omega.shape[1]
    if intercept_only:
        out["phi2"] = inefficiency_factor(omega[:, 0, 0], taper_threshold)
    else:
        for i in range(l):
            for j in range(i, l):
                out[f"omega_{i+1}{j+1}"] = inefficiency_factor(omega[:, i, j], taper_threshold)
    return out


@dataclass(frozen=True)
class SummaryRow:
    name: str
    mean: float
    sd: float
    ineff: float


def _columns(chain: ChainOutput) -> dict:
    cols = {}
    k = chain.draws["beta"].shape[1]
    for j in range(k):
        cols[f"beta_{j+1}"] = chain.draws["beta"][:, j]
    cols["sigma"] = chain.draws["sigma"]
    if chain.model == "freq":
        cols["gamma"] = chain.draws["gamma"]
    omega = chain.draws["omega"]
    if chain.intercept_only:
        cols["phi2"] = omega[:, 0, 0]
    else:
        l = omega.shape[1]
        for i in range(l):
            for j in range(i, l):
                cols[f"omega_{i+1}{j+1}"] = omega[:, i, j]
    return cols


def summarize(chain: ChainOutput) -> list[SummaryRow]:
    """Posterior mean, sd (unbiased), and inefficiency factor per parameter."""
    rows = []
    for name, x in _columns(chain).items():
        m = len(x)
        sd = float(np.std(x, ddof=1)) if m > 1 else 0.0
        if m >= 100 and np.ptp(x) > 0.0:
            ineff = inefficiency_factor(x)
        else:
            ineff = float("nan")
        rows.append(SummaryRow(name=name, mean=float(np.mean(x)), sd=sd, ineff=ineff))
    return rows


def summary_frame(chain: ChainOutput) -> pd.DataFrame:
    rows = summarize(chain)
    return pd.DataFrame(
        {
            "parameter": [r.name for r in rows],
            "mean": [r.mean for r in rows],
            "sd": [r.sd for r in rows],
            "ineff": [r.ineff for r in rows],
        }
    )


def format_summary(chain: ChainOutput) -> str:
    """Aligned text table for stdout."""
    rows = summarize(chain)
    width = max(len(r.name) for r in rows)
    lines = [f"{'parameter':<{width}}  {'mean':>12}  {'sd':>12}  {'ineff':>8}"]
    for r in rows:
        lines.append(f"{r.name:<{width}}  {r.mean:>12.4f}  {r.sd:>12.4f}  {r.ineff:>8.2f}")
    return "\n".join(lines)
