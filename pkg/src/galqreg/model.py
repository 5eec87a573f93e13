"""Data containers, priors, and sampler state shared by the FREQ and REQ chains.

Panels are stored raggedly (one block per unit); a cached layout stacks the
blocks into flat arrays plus per-T batches so the Gibbs steps can run fully
vectorized linear algebra.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .exceptions import ValidationError
from .gal import gal_bounds

__all__ = [
    "PanelUnit",
    "PanelDataset",
    "PriorSpec",
    "McmcConfig",
    "ChainState",
    "ChainOutput",
    "validate",
    "panel_from_csv",
    "panel_to_csv",
]


@dataclass(frozen=True)
class PanelUnit:
    """One unit's block: responses y (T,), design X (T,k), RE design Z (T,l)."""

    id: str
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray


class PanelDataset:
    """Ragged panel of n units with common covariate count k and RE count l.

    ``z_in_x`` optionally declares, per Z column, the index of the matching X
    column (None for a free random-effects column such as a slope variable
    that does not itself enter X).
    """

    def __init__(
        self,
        units: Sequence[PanelUnit],
        z_in_x: Optional[Sequence[Optional[int]]] = None,
        x_names: Optional[Sequence[str]] = None,
        z_names: Optional[Sequence[str]] = None,
    ):
        if len(units) == 0:
            raise ValidationError("dataset needs at least one unit")
        self.units = list(units)
        self.k = int(units[0].X.shape[1])
        self.l = int(units[0].Z.shape[1])
        self.z_in_x = tuple(z_in_x) if z_in_x is not None else None
        self.x_names = tuple(x_names) if x_names else tuple(f"x{j+1}" for j in range(self.k))
        self.z_names = tuple(z_names) if z_names else tuple(f"z{j+1}" for j in range(self.l))
        self._layout = None

    # -- basic shape -------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def T(self) -> np.ndarray:
        return np.array([len(u.y) for u in self.units], dtype=int)

    @property
    def n_obs(self) -> int:
        return int(self.T.sum())

    # -- cached flat layout --------------------------------------------------
    @property
    def layout(self) -> "_Layout":
        if self._layout is None:
            self._layout = _Layout(self)
        return self._layout

    def subset(self, unit_ids: Sequence[str]) -> "PanelDataset":
        wanted = set(unit_ids)
        units = [u for u in self.units if u.id in wanted]
        return PanelDataset(units, self.z_in_x, self.x_names, self.z_names)


class _Layout:
    """Flat row-major stacking of a panel plus per-T batched views."""

    def __init__(self, data: PanelDataset):
        self.y = np.concatenate([u.y for u in data.units]).astype(float)
        self.X = np.vstack([u.X for u in data.units]).astype(float)
        self.Z = np.vstack([u.Z for u in data.units]).astype(float)
        t = data.T
        self.starts = np.concatenate([[0], np.cumsum(t)])
        self.unit_index = np.repeat(np.arange(data.n), t)
        self.groups = []
        for T in np.unique(t):
            uidx = np.nonzero(t == T)[0]
            rows = np.concatenate(
                [np.arange(self.starts[i], self.starts[i] + T) for i in uidx]
            )
            shape3 = (len(uidx), int(T))
            self.groups.append(
                _TGroup(
                    T=int(T),
                    unit_idx=uidx,
                    rows=rows,
                    X3=self.X[rows].reshape(*shape3, -1),
                    Z3=self.Z[rows].reshape(*shape3, -1),
                    y3=self.y[rows].reshape(shape3),
                )
            )


@dataclass(frozen=True)
class _TGroup:
    T: int
    unit_idx: np.ndarray
    rows: np.ndarray
    X3: np.ndarray
    Z3: np.ndarray
    y3: np.ndarray


@dataclass
class PriorSpec:
    """Hyperparameters: beta ~ N(beta0, B0), sigma ~ IG(n0/2, d0/2), gamma ~ Unif(L,U),
    and either Omega ~ IW(omega0, O0) or, intercept-only, phi^2 ~ IG(c1/2, d1/2)."""

    beta0: np.ndarray
    B0: np.ndarray
    n0: float
    d0: float
    omega0: Optional[float] = None
    O0: Optional[np.ndarray] = None
    c1: Optional[float] = None
    d1: Optional[float] = None
    gamma_bounds: Optional[tuple[float, float]] = None

    def __post_init__(self):
        self.beta0 = np.asarray(self.beta0, dtype=float)
        self.B0 = np.asarray(self.B0, dtype=float)
        if self.O0 is not None:
            self.O0 = np.asarray(self.O0, dtype=float)

    @property
    def intercept_only(self) -> bool:
        return self.c1 is not None

    @staticmethod
    def default(k: int, l: int, intercept_only: bool = False) -> "PriorSpec":
        """Simulation-study defaults: beta ~ N(0, 100I), sigma ~ IG(5/2, 8/2),
        omega0 = 5 + l, O0 = (omega0 - l - 1) I; intercept-only uses the exactly
        equivalent scalar IG(c1/2, d1/2) with c1 = 6, d1 = 4."""
        beta0 = np.zeros(k)
        b0 = 100.0 * np.eye(k)
        if intercept_only:
            if l != 1:
                raise ValidationError("intercept-only heterogeneity requires l = 1")
            return PriorSpec(beta0, b0, n0=5.0, d0=8.0, c1=6.0, d1=4.0)
        omega0 = 5.0 + l
        return PriorSpec(beta0, b0, n0=5.0, d0=8.0, omega0=omega0, O0=(omega0 - l - 1.0) * np.eye(l))

    @staticmethod
    def training(k: int) -> "PriorSpec":
        """Diffuse first-stage priors for the training-sample workflow:
        beta ~ N(0, 25I), phi^2 ~ IG(12/2, 10/2), sigma ~ IG(10/2, 8/2)."""
        return PriorSpec(np.zeros(k), 25.0 * np.eye(k), n0=10.0, d0=8.0, c1=12.0, d1=10.0)

    def to_dict(self) -> dict:
        out = {
            "beta0": self.beta0.tolist(),
            "B0": self.B0.tolist(),
            "n0": self.n0,
            "d0": self.d0,
        }
        if self.intercept_only:
            out["c1"] = self.c1
            out["d1"] = self.d1
        else:
            out["omega0"] = self.omega0
            out["O0"] = self.O0.tolist()
        if self.gamma_bounds is not None:
            out["gamma_bounds"] = list(self.gamma_bounds)
        return out

    @staticmethod
    def from_dict(d: dict) -> "PriorSpec":
        return PriorSpec(
            beta0=np.asarray(d["beta0"], dtype=float),
            B0=np.asarray(d["B0"], dtype=float),
            n0=float(d["n0"]),
            d0=float(d["d0"]),
            omega0=d.get("omega0"),
            O0=np.asarray(d["O0"], dtype=float) if "O0" in d else None,
            c1=d.get("c1"),
            d1=d.get("d1"),
            gamma_bounds=tuple(d["gamma_bounds"]) if "gamma_bounds" in d else None,
        )


@dataclass
class McmcConfig:
    """Chain configuration. ``n_draws`` counts total sweeps including burn-in,
    so the stored history holds (n_draws - burn_in) / thin states."""

    n_draws: int
    burn_in: int
    p0: float = 0.5
    thin: int = 1
    iota: float = 1.0
    target_accept: float = 0.30
    adapt_burnin: bool = True
    seed: int = 0
    store_alpha: bool = False

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_draws:
            raise ValidationError("burn_in must be smaller than n_draws")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValidationError("target_accept must lie in (0, 1)")
        if not 0.0 < self.p0 < 1.0:
            raise ValidationError("p0 must lie in (0, 1)")
        if not self.iota > 0.0:
            raise ValidationError("iota must be positive")

    @property
    def n_stored(self) -> int:
        return (self.n_draws - self.burn_in + self.thin - 1) // self.thin


@dataclass
class ChainState:
    """One MCMC state. ``omega`` is always an (l,l) SPD matrix; in the
    intercept-only model it is the 1x1 matrix [[phi^2]]. ``h`` is None for REQ."""

    beta: np.ndarray
    alpha: np.ndarray
    nu: np.ndarray
    sigma: float
    gamma: float
    omega: np.ndarray
    p0: float
    h: Optional[np.ndarray] = None


@dataclass
class ChainOutput:
    """Stored draw history with acceptance statistics and diagnostics."""

    model: str
    draws: dict
    accept_rate: float
    ineff: dict
    runtime: float
    p0: float
    seed: int
    iota_final: float
    calib: object = None
    param_names: tuple = ()
    intercept_only: bool = False

    @property
    def n_stored(self) -> int:
        return self.draws["sigma"].shape[0]

    def flat_table(self) -> pd.DataFrame:
        """One row per stored sweep: beta_1..k, sigma, gamma, omega_*/phi2, accept."""
        cols = {}
        k = self.draws["beta"].shape[1]
        for j in range(k):
            cols[f"beta_{j+1}"] = self.draws["beta"][:, j]
        cols["sigma"] = self.draws["sigma"]
        cols["gamma"] = self.draws["gamma"]
        if self.intercept_only:
            cols["phi2"] = self.draws["omega"][:, 0, 0]
        else:
            l = self.draws["omega"].shape[1]
            for i in range(l):
                for j in range(i, l):
                    cols[f"omega_{i+1}{j+1}"] = self.draws["omega"][:, i, j]
        cols["accept"] = self.draws["accept"].astype(int)
        return pd.DataFrame(cols)


# ---------------------------------------------------------------------------
# Validation


def _spd_violation(name: str, mat: np.ndarray) -> Optional[str]:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return f"{name} is not square"
    if not np.allclose(mat, mat.T, rtol=1e-9, atol=1e-12):
        return f"{name} not symmetric"
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return f"{name} not SPD"
    return None


def validate(data: PanelDataset, priors: PriorSpec, cfg: McmcConfig) -> list[str]:
    """Collect every invariant violation; an empty list means the inputs are usable."""
    violations: list[str] = []
    seen = set()
    for u in data.units:
        if len(u.y) == 0:
            violations.append(f"empty unit {u.id!r}")
            continue
        if u.id in seen:
            violations.append(f"duplicate unit id {u.id!r}")
        seen.add(u.id)
        if u.X.shape != (len(u.y), data.k):
            violations.append(f"unit {u.id!r}: X shape {u.X.shape} != ({len(u.y)}, {data.k})")
        if u.Z.shape != (len(u.y), data.l):
            violations.append(f"unit {u.id!r}: Z shape {u.Z.shape} != ({len(u.y)}, {data.l})")
        for nm, arr in (("y", u.y), ("X", u.X), ("Z", u.Z)):
            if not np.all(np.isfinite(arr)):
                violations.append(f"unit {u.id!r}: non-finite entries in {nm}")
    if data.z_in_x is not None:
        if len(data.z_in_x) != data.l:
            violations.append("z_in_x declaration length != l")
        else:
            for j, col in enumerate(data.z_in_x):
                if col is None:
                    continue
                if not 0 <= col < data.k:
                    violations.append(f"z_in_x[{j}] = {col} out of range")
                    continue
                for u in data.units:
                    if len(u.y) and not np.allclose(u.Z[:, j], u.X[:, col], atol=1e-12):
                        violations.append(
                            f"unit {u.id!r}: Z column {j} differs from declared X column {col}"
                        )
                        break

    if priors.beta0.shape != (data.k,):
        violations.append(f"beta0 length {priors.beta0.shape} != k={data.k}")
    msg = _spd_violation("B0", priors.B0)
    if msg:
        violations.append(msg)
    elif priors.B0.shape != (data.k, data.k):
        violations.append("B0 shape mismatch with k")
    if priors.n0 <= 0 or priors.d0 <= 0:
        violations.append("sigma prior requires n0 > 0 and d0 > 0")
    if priors.intercept_only:
        if data.l != 1:
            violations.append("intercept-only heterogeneity requires l = 1")
        if priors.c1 is None or priors.d1 is None or priors.c1 <= 0 or priors.d1 <= 0:
            violations.append("phi^2 prior requires c1 > 0 and d1 > 0")
    else:
        if priors.O0 is None or priors.omega0 is None:
            violations.append("multivariate heterogeneity requires omega0 and O0")
        else:
            msg = _spd_violation("O0", priors.O0)
            if msg:
                violations.append(msg)
            elif priors.O0.shape != (data.l, data.l):
                violations.append("O0 shape mismatch with l")
            if not priors.omega0 > data.l - 1:
                violations.append(f"omega0 must exceed l - 1 = {data.l - 1}")
    # gamma bounds exist for every p0 in (0,1); recorded bounds must match
    if priors.gamma_bounds is not None:
        lo, up = gal_bounds(cfg.p0)
        if not (abs(priors.gamma_bounds[0] - lo) < 1e-8 and abs(priors.gamma_bounds[1] - up) < 1e-8):
            violations.append("recorded gamma_bounds do not match p0")
    return violations


# ---------------------------------------------------------------------------
# CSV ingestion


def panel_from_csv(
    path,
    x_cols: Sequence[str],
    z_cols: Sequence[str],
    unit_col: str = "unit_id",
    y_col: str = "y",
    add_intercept: bool = True,
    time_dummies: Optional[str] = None,
) -> PanelDataset:
    """Read a panel from CSV (header row; RFC-4180 quoting; UTF-8).

    ``x_cols``/``z_cols`` name the covariate columns entering X and Z; with
    ``add_intercept`` a leading constant column named ``const`` is available
    to both. ``time_dummies`` names a column expanded into indicator columns
    relative to its first (sorted) category and appended to X.
    """
    df = pd.read_csv(path, encoding="utf-8")
    for col in (unit_col, y_col):
        if col not in df.columns:
            raise ValidationError(f"missing required column {col!r}")
    x_cols = list(x_cols)
    z_cols = list(z_cols)
    frame = df.copy()
    frame["const"] = 1.0
    if add_intercept and "const" not in x_cols:
        x_cols = ["const"] + x_cols
    if time_dummies is not None:
        if time_dummies not in frame.columns:
            raise ValidationError(f"missing time-dummy column {time_dummies!r}")
        cats = sorted(frame[time_dummies].unique())
        for cat in cats[1:]:
            name = f"{time_dummies}_{cat}"
            frame[name] = (frame[time_dummies] == cat).astype(float)
            x_cols.append(name)
    missing = [c for c in x_cols + z_cols if c not in frame.columns]
    if missing:
        raise ValidationError(f"missing covariate columns: {missing}")

    z_in_x = tuple(x_cols.index(c) if c in x_cols else None for c in z_cols)
    units = []
    for uid, grp in frame.groupby(unit_col, sort=True):
        units.append(
            PanelUnit(
                id=str(uid),
                y=grp[y_col].to_numpy(dtype=float),
                X=grp[x_cols].to_numpy(dtype=float),
                Z=grp[z_cols].to_numpy(dtype=float),
            )
        )
    return PanelDataset(units, z_in_x=z_in_x, x_names=x_cols, z_names=z_cols)


def panel_to_csv(data: PanelDataset, path) -> None:
    """Write the panel back to CSV with one column per distinct covariate name."""
    rows = {}
    rows["unit_id"] = np.concatenate([[u.id] * len(u.y) for u in data.units])
    rows["y"] = data.layout.y
    frame = pd.DataFrame(rows)
    for j, name in enumerate(data.x_names):
        frame[name] = data.layout.X[:, j]
    for j, name in enumerate(data.z_names):
        if name not in frame.columns:
            frame[name] = data.layout.Z[:, j]
    frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8")
