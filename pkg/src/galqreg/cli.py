"""Batch command-line interface: fit, compare, trainprior, simstudy, gal-curve.

Exit codes: 1 for validation problems, 2 for numerical failures, 3 for I/O
errors. Every artifact directory carries the hash of the resolved run
configuration; ``fit`` refuses to reuse a directory written under a different
configuration unless ``--force`` is given.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .diagnostics import format_summary, summary_frame
from .exceptions import NumericalError, ValidationError
from .freq_sampler import run_freq
from .gal import GalParams, gal_bounds, gal_logpdf
from .marglik import marglik_freq, marglik_req
from .model import McmcConfig, PanelDataset, PriorSpec, panel_from_csv, validate
from .req_sampler import run_req
from .samplers import RngStream
from .simstudy import DgpSpec, comparison_table, full_grid, run_study

EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

DEFAULT_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


def _quantile_list(text: str) -> list[float]:
    vals = [float(tok) for tok in text.split(",") if tok.strip()]
    if not vals or any(not 0.0 < v < 1.0 for v in vals):
        raise argparse.ArgumentTypeError("quantiles must lie in (0, 1)")
    return vals


def _config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _load_data(args) -> tuple[PanelDataset, dict]:
    cfg_path = Path(args.config)
    with open(cfg_path, "r", encoding="utf-8") as fh:
        file_cfg = json.load(fh)
    data = panel_from_csv(
        args.data,
        x_cols=file_cfg.get("x_cols", []),
        z_cols=file_cfg.get("z_cols", ["const"]),
        unit_col=file_cfg.get("unit_col", "unit_id"),
        y_col=file_cfg.get("y_col", "y"),
        add_intercept=file_cfg.get("add_intercept", True),
        time_dummies=file_cfg.get("time_dummies"),
    )
    return data, file_cfg


def _resolve_priors(args, data: PanelDataset, file_cfg: dict, p0: float) -> PriorSpec:
    intercept_only = args.heterogeneity == "intercept"
    if getattr(args, "priors", None):
        with open(args.priors, "r", encoding="utf-8") as fh:
            priors = PriorSpec.from_dict(json.load(fh))
    elif "priors" in file_cfg:
        priors = PriorSpec.from_dict(file_cfg["priors"])
    else:
        priors = PriorSpec.default(data.k, data.l, intercept_only=intercept_only)
    priors.gamma_bounds = gal_bounds(p0)
    return priors


def _check_outdir(outdir: Path, cfg_hash: str, force: bool) -> None:
    marker = outdir / "run_config.json"
    if marker.exists():
        with open(marker, "r", encoding="utf-8") as fh:
            previous = json.load(fh)
        if previous.get("config_hash") != cfg_hash and not force:
            raise ValidationError(
                f"output directory {outdir} was written under config hash "
                f"{previous.get('config_hash')} (current {cfg_hash}); use --force to overwrite"
            )


def _write_marker(outdir: Path, cfg_hash: str, payload: dict) -> None:
    with open(outdir / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump({"config_hash": cfg_hash, "config": payload}, fh, indent=2, sort_keys=True)


def _mcmc_config(args, p0: float) -> McmcConfig:
    return McmcConfig(
        n_draws=args.draws + args.burnin,
        burn_in=args.burnin,
        p0=p0,
        thin=args.thin,
        seed=args.seed,
    )


def _fit_one(model: str, data, priors, cfg):
    if model == "freq":
        return run_freq(data, priors, cfg)
    return run_req(data, priors, cfg)


def _p_tag(p0: float) -> str:
    return f"{p0:g}".replace(".", "p")


# ---------------------------------------------------------------------------
# subcommands


def _fit_quantile_job(model, data, priors, cfg, outdir, cfg_hash):
    """Fit one quantile and write its artifacts; safe to run in a worker."""
    t0 = time.perf_counter()
    chain = _fit_one(model, data, priors, cfg)
    tag = f"{model}_q{_p_tag(cfg.p0)}"
    chain.flat_table().to_csv(outdir / f"draws_{tag}.csv", index=False,
                              float_format="%.17g", encoding="utf-8")
    summary_frame(chain).to_csv(outdir / f"summary_{tag}.csv", index=False,
                                float_format="%.10g", encoding="utf-8")
    meta = {
        "config_hash": cfg_hash,
        "model": model,
        "p0": cfg.p0,
        "seed": cfg.seed,
        "runtime_seconds": time.perf_counter() - t0,
        "accept_rate": chain.accept_rate,
        "n_stored": chain.n_stored,
        "version": __version__,
    }
    with open(outdir / f"meta_{tag}.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return cfg.p0, chain.accept_rate, format_summary(chain)


def cmd_fit(args) -> int:
    data, file_cfg = _load_data(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "command": "fit",
        "model": args.model,
        "quantiles": args.quantiles,
        "draws": args.draws,
        "burnin": args.burnin,
        "thin": args.thin,
        "seed": args.seed,
        "heterogeneity": args.heterogeneity,
        "columns": file_cfg,
    }
    cfg_hash = _config_hash(payload)
    _check_outdir(outdir, cfg_hash, args.force)
    _write_marker(outdir, cfg_hash, payload)

    jobs = []
    for p0 in args.quantiles:
        cfg = _mcmc_config(args, p0)
        priors = _resolve_priors(args, data, file_cfg, p0)
        violations = validate(data, priors, cfg)
        if violations:
            for v in violations:
                print(f"validation: {v}", file=sys.stderr)
            return EXIT_VALIDATION
        jobs.append((args.model, data, priors, cfg, outdir, cfg_hash))

    if args.workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_fit_job_star, jobs))
    else:
        results = [_fit_quantile_job(*job) for job in jobs]
    for p0, accept, summary in results:
        print(f"== {args.model} at quantile {p0} (accept rate {accept:.3f}) ==")
        print(summary)
    return 0


def _fit_job_star(job):
    return _fit_quantile_job(*job)


def cmd_compare(args) -> int:
    data, file_cfg = _load_data(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "command": "compare",
        "quantiles": args.quantiles,
        "draws": args.draws,
        "burnin": args.burnin,
        "thin": args.thin,
        "seed": args.seed,
        "heterogeneity": args.heterogeneity,
        "j": args.j,
        "columns": file_cfg,
    }
    cfg_hash = _config_hash(payload)
    _check_outdir(outdir, cfg_hash, args.force)
    _write_marker(outdir, cfg_hash, payload)

    rows = []
    for p0 in args.quantiles:
        cfg = _mcmc_config(args, p0)
        priors = _resolve_priors(args, data, file_cfg, p0)
        violations = validate(data, priors, cfg)
        if violations:
            for v in violations:
                print(f"validation: {v}", file=sys.stderr)
            return EXIT_VALIDATION
        chain_f = run_freq(data, priors, cfg)
        rep_f = marglik_freq(data, priors, cfg, chain_f, J=args.j)
        chain_r = run_req(data, priors, cfg)
        rep_r = marglik_req(data, priors, cfg, chain_r, J=args.j)
        log_bf = rep_f.log_ml - rep_r.log_ml
        prob_f = 1.0 / (1.0 + np.exp(-log_bf))
        rows.append(
            {
                "p0": p0,
                "log_ml_freq": rep_f.log_ml,
                "log_ml_req": rep_r.log_ml,
                "log_bayes_factor": log_bf,
                "prob_ratio_freq_over_req": float(f"{np.exp(min(log_bf, 700.0)):.4g}"),
                "post_prob_freq": prob_f,
                "post_prob_req": 1.0 - prob_f,
            }
        )
        with open(outdir / f"marglik_freq_q{_p_tag(p0)}.json", "w", encoding="utf-8") as fh:
            json.dump(rep_f.to_dict(), fh, indent=2, sort_keys=True)
        with open(outdir / f"marglik_req_q{_p_tag(p0)}.json", "w", encoding="utf-8") as fh:
            json.dump(rep_r.to_dict(), fh, indent=2, sort_keys=True)

    frame = pd.DataFrame(rows)
    frame.to_csv(outdir / "compare.csv", index=False, float_format="%.10g", encoding="utf-8")
    with open(outdir / "compare.json", "w", encoding="utf-8") as fh:
        json.dump({"config_hash": cfg_hash, "rows": rows}, fh, indent=2, sort_keys=True)
    with pd.option_context("display.width", 140):
        print(frame.to_string(index=False))
    return 0


def cmd_trainprior(args) -> int:
    data, file_cfg = _load_data(args)
    if args.heterogeneity != "intercept" or data.l != 1:
        print("trainprior supports intercept heterogeneity only (single constant Z column)",
              file=sys.stderr)
        return EXIT_VALIDATION
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    ids = [u.id for u in data.units]
    rng = RngStream(args.seed, stream_id=900)
    perm = rng.gen.permutation(len(ids))
    n_train = int(round(args.fraction * len(ids)))
    n_train = min(max(n_train, 1), len(ids))
    train_ids = [ids[i] for i in perm[:n_train]]
    holdout_ids = sorted(ids[i] for i in perm[n_train:])
    if n_train < 20:
        print(f"training sample has {n_train} units (< 20)", file=sys.stderr)
        return EXIT_VALIDATION
    train = data.subset(train_ids)

    for p0 in args.quantiles:
        cfg = _mcmc_config(args, p0)
        priors = PriorSpec.training(data.k)
        priors.gamma_bounds = gal_bounds(p0)
        violations = validate(train, priors, cfg)
        if violations:
            for v in violations:
                print(f"validation: {v}", file=sys.stderr)
            return EXIT_VALIDATION
        chain = _fit_one(args.model, train, priors, cfg)
        beta_draws = chain.draws["beta"]
        beta0 = beta_draws.mean(axis=0)
        b0 = np.cov(beta_draws.T, ddof=1)
        b0 = np.atleast_2d(b0) + 1e-10 * np.eye(data.k)

        def _ig_match(draws):
            m = float(np.mean(draws))
            v = float(np.var(draws, ddof=1))
            a = 2.0 + m * m / v
            b = m * (a - 1.0)
            return a, b

        a_sig, b_sig = _ig_match(chain.draws["sigma"])
        a_phi, b_phi = _ig_match(chain.draws["omega"][:, 0, 0])
        mapped = PriorSpec(
            beta0=beta0,
            B0=b0,
            n0=2.0 * a_sig,
            d0=2.0 * b_sig,
            c1=2.0 * a_phi,
            d1=2.0 * b_phi,
            gamma_bounds=gal_bounds(p0),
        )
        path = outdir / f"priorspec_{args.model}_q{_p_tag(p0)}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(mapped.to_dict(), fh, indent=2, sort_keys=True)
        print(f"wrote {path}")

    with open(outdir / "holdout_units.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(holdout_ids))
        if holdout_ids:
            fh.write("\n")
    print(f"training units: {n_train}; held out: {len(holdout_ids)}")
    return 0


def cmd_simstudy(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.full_grid:
        grid = full_grid(args.seed)
    else:
        grid = []
        for idx, tok in enumerate(args.cells.split(",")):
            n_str, t_str = tok.lower().split("x")
            grid.append(DgpSpec(n=int(n_str), T=int(t_str), seed=args.seed + 1000 * idx))
    cfg = McmcConfig(n_draws=args.draws + args.burnin, burn_in=args.burnin,
                     thin=args.thin, seed=args.seed)
    study = run_study(grid, args.quantiles, cfg, marglik_j=args.j,
                      trace_dir=outdir / "traces" if args.dump_traces else None)
    study.to_csv(outdir / "study.csv", index=False, float_format="%.10g", encoding="utf-8")
    table = comparison_table(study)
    table.to_csv(outdir / "logml_table.csv", float_format="%.4f", encoding="utf-8")
    payload = {
        "command": "simstudy",
        "cells": [{"n": s.n, "T": s.T, "seed": s.seed} for s in grid],
        "quantiles": list(args.quantiles),
        "draws": args.draws,
        "burnin": args.burnin,
        "seed": args.seed,
    }
    with open(outdir / "study.json", "w", encoding="utf-8") as fh:
        json.dump({"config_hash": _config_hash(payload), "config": payload}, fh,
                  indent=2, sort_keys=True)
    print(table.to_string())
    failures = study[study["error"] != ""]
    if len(failures):
        print(f"{len(failures)} cell(s) failed; see study.csv", file=sys.stderr)
    return 0


def cmd_gal_curve(args) -> int:
    params = GalParams(mu=args.mu, sigma=args.sigma, p0=args.p0, gamma=args.gamma)
    s = np.linspace(args.lo, args.hi, args.num)
    pdf = np.exp(gal_logpdf(params, s))
    frame = pd.DataFrame({"s": s, "pdf": pdf})
    frame.to_csv(args.out, index=False, float_format="%.12g", encoding="utf-8")
    print(f"wrote {args.out} ({args.num} points)")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sub, with_model=True):
    sub.add_argument("--data", required=True, help="panel CSV path")
    sub.add_argument("--config", required=True, help="column-declaration JSON path")
    if with_model:
        sub.add_argument("--model", choices=("freq", "req"), default="freq")
    sub.add_argument("--quantiles", type=_quantile_list, default=list(DEFAULT_QUANTILES))
    sub.add_argument("--draws", type=int, default=10000, help="stored draws after burn-in")
    sub.add_argument("--burnin", type=int, default=2500)
    sub.add_argument("--thin", type=int, default=1)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--heterogeneity", choices=("intercept", "full"), default="full")
    sub.add_argument("--priors", help="PriorSpec JSON (e.g. from trainprior)")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--force", action="store_true", help="overwrite differing-config outputs")
    sub.add_argument("--workers", type=int, default=1,
                     help="worker processes for quantile dispatch (fit only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="galqreg",
        description="Bayesian panel quantile regression under GAL/AL errors",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="run one model at each requested quantile")
    _add_common(fit)
    fit.set_defaults(func=cmd_fit)

    comp = subs.add_parser("compare", help="FREQ vs REQ marginal-likelihood table")
    _add_common(comp, with_model=False)
    comp.add_argument("--j", type=int, default=5000, help="likelihood MC draws per unit")
    comp.set_defaults(func=cmd_compare)

    tp = subs.add_parser("trainprior", help="training-sample prior construction")
    _add_common(tp)
    tp.add_argument("--fraction", type=float, default=0.10)
    tp.set_defaults(func=cmd_trainprior)
    tp.set_defaults(heterogeneity="intercept")

    ss = subs.add_parser("simstudy", help="simulation-study grid runner")
    ss.add_argument("--full-grid", action="store_true", help="all nine (n, T) cells")
    ss.add_argument("--cells", default="100x5", help="comma list like 100x5,250x10")
    ss.add_argument("--quantiles", type=_quantile_list, default=list(DEFAULT_QUANTILES))
    ss.add_argument("--draws", type=int, default=10000)
    ss.add_argument("--burnin", type=int, default=2500)
    ss.add_argument("--thin", type=int, default=1)
    ss.add_argument("--seed", type=int, default=0)
    ss.add_argument("--j", type=int, default=2000)
    ss.add_argument("--dump-traces", action="store_true",
                    help="write per-cell draw CSVs next to the study report")
    ss.add_argument("--out", required=True)
    ss.set_defaults(func=cmd_simstudy)

    gc = subs.add_parser("gal-curve", help="emit (s, pdf) CSV for density plots")
    gc.add_argument("--p0", type=float, required=True)
    gc.add_argument("--gamma", type=float, default=0.0)
    gc.add_argument("--mu", type=float, default=0.0)
    gc.add_argument("--sigma", type=float, default=1.0)
    gc.add_argument("--lo", type=float, default=-10.0)
    gc.add_argument("--hi", type=float, default=10.0)
    gc.add_argument("--num", type=int, default=512)
    gc.add_argument("--out", required=True)
    gc.set_defaults(func=cmd_gal_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
