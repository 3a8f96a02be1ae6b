"""Pooled-panel reduced-form VAR estimation with country dummies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import linalg

from .errors import RankDeficient, SegmentTooShort
from .transform import GrowthPanel

CRITERIA = ("AIC", "HQ", "SC", "FPE")


@dataclass(frozen=True)
class ModelDataset:
    """Stacked regression design for a VAR(p) on a country panel.

    Row r of ``Y`` is y_t for some country; the matching row of ``Z`` holds
    ``[y_{t-1}, ..., y_{t-p}, x_exog]`` for the same country only.
    """

    Y: np.ndarray
    lags: np.ndarray
    X_exog: np.ndarray
    p: int
    start: int
    countries: tuple[str, ...]
    segments: tuple[tuple[int, int], ...]
    variables: tuple[str, ...]
    exog_names: tuple[str, ...]
    reference_country: str

    @property
    def Z(self) -> np.ndarray:
        return np.hstack([self.lags, self.X_exog])

    @property
    def K(self) -> int:
        return self.Y.shape[1]

    @property
    def regressor_names(self) -> tuple[str, ...]:
        lagged = tuple(f"{v}.l{j}" for j in range(1, self.p + 1) for v in self.variables)
        return lagged + self.exog_names


def build_design(
    gp: GrowthPanel,
    p: int,
    reference_country: str | None = None,
    start: int | None = None,
) -> ModelDataset:
    """Stack per-country lag blocks; lag windows never cross a country boundary.

    ``start`` (default ``p``) is the first usable in-country time index, so
    passing a common ``start = p_max`` gives every lag order the same rows.
    Exogenous columns are an intercept plus one dummy per non-reference country.
    """
    if p < 1:
        raise ValueError("lag order must be >= 1")
    start = p if start is None else start
    if start < p:
        raise ValueError("start must be >= p")
    if reference_country is None:
        reference_country = "BR" if "BR" in gp.countries else gp.countries[0]
    if reference_country not in gp.countries:
        raise ValueError(f"reference country {reference_country!r} not in panel")
    others = [c for c in gp.countries if c != reference_country]

    C, T, K = gp.values.shape
    if T <= start:
        raise SegmentTooShort(f"country segments have {T} dates, need more than {start}")
    n = T - start
    Y = np.empty((C * n, K))
    lags = np.empty((C * n, K * p))
    X = np.zeros((C * n, 1 + len(others)))
    X[:, 0] = 1.0
    segments = []
    for ci, c in enumerate(gp.countries):
        y = gp.values[ci]
        rows = slice(ci * n, (ci + 1) * n)
        Y[rows] = y[start:]
        for j in range(1, p + 1):
            lags[rows, (j - 1) * K : j * K] = y[start - j : T - j]
        if c != reference_country:
            X[rows, 1 + others.index(c)] = 1.0
        segments.append((ci * n, (ci + 1) * n))
    return ModelDataset(
        Y=Y,
        lags=lags,
        X_exog=X,
        p=p,
        start=start,
        countries=gp.countries,
        segments=tuple(segments),
        variables=gp.variables,
        exog_names=("const",) + tuple(f"d_{c}" for c in others),
        reference_country=reference_country,
    )


@dataclass(frozen=True)
class VarModel:
    p: int
    A: np.ndarray  # (p, K, K): A[j-1] multiplies y_{t-j}
    C: np.ndarray  # (K, m) exogenous coefficients
    U: np.ndarray  # (T_eff, K)
    Sigma_u: np.ndarray
    T_eff: int
    coef: np.ndarray  # (n_regressors, K), column k is equation k
    design: ModelDataset

    @property
    def K(self) -> int:
        return self.A.shape[1]

    @property
    def variables(self) -> tuple[str, ...]:
        return self.design.variables


def _qr_solve(Z: np.ndarray, Y: np.ndarray, names=None) -> np.ndarray:
    Q, R = linalg.qr(Z, mode="economic")
    diag = np.abs(np.diag(R))
    col_norms = np.linalg.norm(Z, axis=0)
    for j in range(Z.shape[1]):
        # |R_jj| is the distance of column j from the span of columns 0..j-1
        if col_norms[j] == 0 or diag[j] <= 1e-10 * col_norms[j]:
            raise RankDeficient(j, names[j] if names else None)
    return linalg.solve_triangular(R, Q.T @ Y)


def ols_fit(
    ds: ModelDataset,
    p: int | None = None,
    sigma_divisor: Literal["ml", "dof"] = "ml",
) -> VarModel:
    """Equation-by-equation least squares through a QR factorization.

    ``Sigma_u`` uses divisor T_eff by default (``"dof"`` switches to
    T_eff minus the regressors per equation).
    """
    if p is not None and p != ds.p:
        raise ValueError(f"dataset was built for p={ds.p}, not {p}")
    Z = ds.Z
    K, p = ds.K, ds.p
    if Z.shape[0] <= Z.shape[1]:
        raise RankDeficient(Z.shape[0], "fewer rows than regressors")
    coef = _qr_solve(Z, ds.Y, ds.regressor_names)
    U = ds.Y - Z @ coef
    T_eff = U.shape[0]
    denom = T_eff if sigma_divisor == "ml" else T_eff - Z.shape[1]
    Sigma = U.T @ U / denom
    Sigma = 0.5 * (Sigma + Sigma.T)
    A = np.stack([coef[(j * K) : (j + 1) * K].T for j in range(p)])
    C = coef[K * p :].T
    return VarModel(p=p, A=A, C=C, U=U, Sigma_u=Sigma, T_eff=T_eff, coef=coef, design=ds)


@dataclass(frozen=True)
class CriteriaTable:
    lags: np.ndarray
    AIC: np.ndarray
    HQ: np.ndarray
    SC: np.ndarray
    FPE: np.ndarray
    T: int

    def column(self, criterion: str) -> np.ndarray:
        key = criterion.upper()
        if key in ("BIC", "SIC", "SBC"):
            key = "SC"
        if key not in CRITERIA:
            raise ValueError(f"unknown criterion {criterion!r}")
        return getattr(self, key)

    def rows(self):
        for i, p in enumerate(self.lags):
            yield int(p), float(self.AIC[i]), float(self.HQ[i]), float(self.SC[i]), float(self.FPE[i])


def info_criteria(
    gp: GrowthPanel, p_max: int, reference_country: str | None = None
) -> CriteriaTable:
    """AIC/HQ/SC/FPE for p = 1..p_max on the common sample usable at p_max.

    With T the pooled row count, K variables and m* regressors per equation::

        AIC = ln det S + 2/T * p K^2
        HQ  = ln det S + 2 ln ln T / T * p K^2
        SC  = ln det S + ln T / T * p K^2
        FPE = ((T + m*) / (T - m*))^K det S

    where S is the residual covariance with divisor T.
    """
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    K = gp.K
    lags = np.arange(1, p_max + 1)
    out = {k: np.empty(p_max) for k in CRITERIA}
    T = None
    for i, p in enumerate(lags):
        ds = build_design(gp, int(p), reference_country, start=p_max)
        model = ols_fit(ds)
        T = model.T_eff
        m_star = ds.Z.shape[1]
        sign, logdet = np.linalg.slogdet(model.Sigma_u)
        if sign <= 0:
            logdet = -np.inf
        k2p = p * K * K
        out["AIC"][i] = logdet + 2.0 / T * k2p
        out["HQ"][i] = logdet + 2.0 * math.log(math.log(T)) / T * k2p
        out["SC"][i] = logdet + math.log(T) / T * k2p
        out["FPE"][i] = ((T + m_star) / (T - m_star)) ** K * math.exp(logdet)
    return CriteriaTable(lags=lags, T=T, **out)


def select_lag(tbl: CriteriaTable, criterion: str) -> int:
    """Argmin of one criterion column; ties go to the smaller lag."""
    col = tbl.column(criterion)
    return int(tbl.lags[int(np.argmin(col))])


def companion(model_or_A) -> np.ndarray:
    A = model_or_A.A if isinstance(model_or_A, VarModel) else np.asarray(model_or_A, float)
    p, K, _ = A.shape
    F = np.zeros((K * p, K * p))
    F[:K] = np.hstack(list(A))
    if p > 1:
        F[K:, : K * (p - 1)] = np.eye(K * (p - 1))
    return F


def spectral_radius(model_or_A) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion(model_or_A)))))


def is_stable(model_or_A) -> tuple[bool, float]:
    rho = spectral_radius(model_or_A)
    return rho < 1 - 1e-10, rho
