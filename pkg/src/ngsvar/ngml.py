"""Structural identification by non-Gaussian (Student-t) maximum likelihood.

Reduced-form residuals are modeled as ``u_t = B eps_t`` with mutually
independent shocks, ``eps_it`` following a Student-t law with ``df_i`` degrees
of freedom rescaled to unit variance. Non-Gaussianity pins down B up to
column signs and order, which :func:`normalize_B` then fixes.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import betaln, digamma

from .errors import NoConvergence, SingularB, ZeroDiagonalUnresolvable
from .var import VarModel

logger = logging.getLogger(__name__)

_LOG_DF_CAP = math.log(1e3)


@dataclass(frozen=True)
class NgmlConfig:
    max_iter: int = 2000
    f_tol: float = 1e-10
    x_tol: float = 1e-7
    g_tol: float = 1e-5
    df_lower_bound: float = 2.1
    restarts: int = 5
    seed: int = 0
    df_start: float = 8.0

    def __post_init__(self):
        if min(self.f_tol, self.x_tol, self.g_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.df_lower_bound <= 2:
            raise ValueError("df_lower_bound must exceed 2 for unit-variance shocks")
        if self.df_start <= self.df_lower_bound:
            raise ValueError("df_start must exceed df_lower_bound")


@dataclass(frozen=True)
class OptDiag:
    iterations: int
    converged: bool
    grad_norm: float
    restart: int
    restarts: tuple[dict, ...] = ()


@dataclass(frozen=True)
class StructuralModel:
    base: VarModel
    B: np.ndarray
    df: np.ndarray
    scale: np.ndarray
    loglik: float
    opt_diag: OptDiag

    @property
    def shock_params(self) -> list[tuple[float, float]]:
        return list(zip(self.df.tolist(), self.scale.tolist()))


def unit_variance_scale(df):
    """Scale that gives a t(df) variable unit variance."""
    df = np.asarray(df, dtype=float)
    return np.sqrt((df - 2.0) / df)


def _log_gamma_ratio(df):
    # lnG((df+1)/2) - lnG(df/2) through the beta function; the direct
    # difference of log-gammas cancels badly for large df
    return 0.5 * math.log(math.pi) - betaln(np.asarray(df) / 2, 0.5)


def t_logpdf(x, df, scale):
    """Log density of a scaled Student-t (location 0)."""
    z2 = (x / scale) ** 2
    return (
        _log_gamma_ratio(df)
        - 0.5 * np.log(df * np.pi)
        - np.log(scale)
        - (df + 1) / 2 * np.log1p(z2 / df)
    )


def neg_loglik(B, shock_params, U) -> float:
    """Negative log-likelihood of residuals ``U`` (T x K) given B and per-shock (df, scale).

    Each observation contributes ``sum_i log f((B^-1 u_t)_i; df_i, scale_i) - log|det B|``.
    """
    B = np.asarray(B, dtype=float)
    U = np.asarray(U, dtype=float)
    sign, logdet = np.linalg.slogdet(B)
    if sign == 0 or logdet < math.log(1e-300):
        raise SingularB("mixing matrix is singular")
    df, scale = (np.asarray(a, dtype=float) for a in zip(*shock_params))
    E = np.linalg.solve(B, U.T).T
    return float(-(t_logpdf(E, df, scale).sum() - U.shape[0] * logdet))


# ---------------------------------------------------------------------------
# objective in optimizer coordinates: theta = [vec(B) row-major, log(df - lb)]


def _unpack(theta, K, lb):
    B = theta[: K * K].reshape(K, K)
    log_excess = np.minimum(theta[K * K :], _LOG_DF_CAP)
    return B, lb + np.exp(log_excess), log_excess


def _objective(theta, U, lb, with_grad):
    """Mean negative log-likelihood under unit-variance t shocks, plus gradient."""
    T, K = U.shape
    B, df, log_excess = _unpack(theta, K, lb)
    sign, logdet = np.linalg.slogdet(B)
    if sign == 0 or not np.isfinite(logdet) or logdet < -600:
        return (np.inf, np.zeros_like(theta)) if with_grad else np.inf
    W = np.linalg.inv(B)
    E = U @ W.T
    nu2 = df - 2.0
    # log density of unit-variance t: scale^2 * df = df - 2
    q = E * E / nu2
    logf = (
        _log_gamma_ratio(df) - 0.5 * np.log(np.pi * nu2)
        - (df + 1) / 2 * np.log1p(q)
    )
    f = -(logf.sum() / T - logdet)
    if not with_grad:
        return f
    psi = -(df + 1) * E / (nu2 + E * E)
    dB = -W.T @ (psi.T @ E / T + np.eye(K))
    ddf = (
        0.5 * digamma((df + 1) / 2) - 0.5 * digamma(df / 2) - 0.5 / nu2
        - 0.5 * np.log1p(q) + 0.5 * (df + 1) * q / (nu2 * (1 + q))
    ).mean(axis=0)
    dtheta_df = np.where(theta[K * K :] < _LOG_DF_CAP, np.exp(log_excess), 0.0)
    grad = -np.concatenate([dB.ravel(), ddf * dtheta_df])
    return f, grad


def _random_rotation(K, rng):
    Q, R = np.linalg.qr(rng.standard_normal((K, K)))
    return Q * np.sign(np.diag(R))


def _one_restart(U, B0, cfg: NgmlConfig, index: int):
    T, K = U.shape
    lb = cfg.df_lower_bound
    theta0 = np.concatenate([B0.ravel(), np.full(K, math.log(cfg.df_start - lb))])
    f_init = _objective(theta0, U, lb, False)
    trace = [f_init]

    def record(xk, *args):
        trace.append(_objective(np.asarray(xk), U, lb, False))

    # derivative-free pass to move off the Gaussian-equivalent start
    nm = optimize.minimize(
        _objective, theta0, args=(U, lb, False), method="Nelder-Mead", callback=record,
        options={"maxiter": min(cfg.max_iter, 200 * len(theta0)), "xatol": cfg.x_tol,
                 "fatol": cfg.f_tol, "adaptive": True},
    )
    theta = nm.x if nm.fun <= f_init else theta0
    iters = int(nm.nit)

    steps = [np.inf]
    prev = [theta]

    def record_bfgs(xk, *args):
        steps.append(float(np.max(np.abs(xk - prev[0]))))
        prev[0] = np.array(xk)
        record(xk)

    bfgs = optimize.minimize(
        _objective, theta, args=(U, lb, True), jac=True, method="BFGS", callback=record_bfgs,
        options={"maxiter": cfg.max_iter, "gtol": cfg.g_tol},
    )
    if bfgs.fun <= _objective(theta, U, lb, False):
        theta = bfgs.x
    iters += int(bfgs.nit)
    f_final, grad = _objective(theta, U, lb, True)
    grad_norm = float(np.max(np.abs(grad)))
    # BFGS also stops on lost precision once the gradient is tiny; accept if the last step was small
    converged = bool(
        grad_norm <= cfg.g_tol
        and bfgs.nit < cfg.max_iter
        and (bfgs.success or steps[-1] <= cfg.x_tol * max(1.0, float(np.max(np.abs(theta)))))
    )
    B, df, _ = _unpack(theta, K, lb)
    return {
        "restart": index,
        "B": B.copy(),
        "df": df.copy(),
        "loglik_init": -f_init * T,
        "loglik": -f_final * T,
        "iterations": iters,
        "converged": converged,
        "grad_norm": grad_norm,
        "trace": np.asarray(trace) * T,
        "last_step": steps[-1],
    }


def restart_starts(Sigma_u, cfg: NgmlConfig) -> list[np.ndarray]:
    """Cholesky factor of Sigma_u, then the same factor times random rotations."""
    L = np.linalg.cholesky(Sigma_u)
    K = L.shape[0]
    starts = [L]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    for r in range(1, cfg.restarts):
        starts.append(L @ _random_rotation(K, np.random.default_rng(seeds[r])))
    return starts


def fit_ngml(model: VarModel, cfg: NgmlConfig | None = None, U=None) -> StructuralModel:
    """Estimate B from the residuals of ``model`` by Student-t maximum likelihood.

    Runs ``cfg.restarts`` local optimizations (Nelder-Mead then BFGS) and
    keeps the highest likelihood; ties go to the lowest restart index. The
    winning B is passed through :func:`normalize_B`.
    """
    cfg = cfg or NgmlConfig()
    U = model.U if U is None else np.asarray(U, dtype=float)
    Sigma = U.T @ U / U.shape[0]
    runs = [_one_restart(U, B0, cfg, r) for r, B0 in enumerate(restart_starts(Sigma, cfg))]
    best = max(runs, key=lambda r: (r["loglik"], -r["restart"]))
    if not any(r["converged"] for r in runs):
        warnings.warn(
            f"NGML did not converge in any of {len(runs)} restarts "
            f"(best gradient norm {best['grad_norm']:.2e})",
            NoConvergence,
            stacklevel=2,
        )
    B, perm, signs = _normalize(best["B"])
    df = best["df"][perm]
    diag = OptDiag(
        iterations=best["iterations"],
        converged=best["converged"],
        grad_norm=best["grad_norm"],
        restart=best["restart"],
        restarts=tuple(
            {k: r[k] for k in ("restart", "loglik_init", "loglik", "iterations", "converged", "grad_norm")}
            | {"trace": r["trace"]}
            for r in runs
        ),
    )
    logger.debug("ngml: best restart %d, loglik %.6f", best["restart"], best["loglik"])
    return StructuralModel(
        base=model, B=B, df=df, scale=unit_variance_scale(df), loglik=best["loglik"], opt_diag=diag
    )


# ---------------------------------------------------------------------------
# indeterminacy handling


def _normalize(B):
    B = np.asarray(B, dtype=float)
    K = B.shape[0]
    A = np.abs(B)
    rows, cols = list(range(K)), list(range(K))
    perm = [None] * K
    for _ in range(K):
        # largest entry first; ties keep a column in place, then lowest column
        r, c = min(
            ((r, c) for r in rows for c in cols),
            key=lambda rc: (-A[rc], rc[0] != rc[1], rc[1], rc[0]),
        )
        if A[r, c] == 0:
            raise ZeroDiagonalUnresolvable("no nonzero entry left for the diagonal")
        perm[r] = c
        rows.remove(r)
        cols.remove(c)
    out = B[:, perm]
    signs = np.sign(np.diag(out))
    return out * signs, np.array(perm), signs


def normalize_B(B) -> np.ndarray:
    """Reorder columns so large entries sit on the diagonal, then make it positive."""
    return _normalize(B)[0]


def align_to_reference(B_hat, B_ref) -> tuple[np.ndarray, float]:
    """Signed column permutation of ``B_hat`` closest to ``B_ref`` in Frobenius norm.

    For a fixed permutation the best sign of each column is the sign of its
    inner product with the target column, so the search reduces to a linear
    assignment on absolute inner products, which is solved exactly.
    """
    B_hat = np.asarray(B_hat, dtype=float)
    B_ref = np.asarray(B_ref, dtype=float)
    G = B_hat.T @ B_ref  # G[a, b] = <hat column a, ref column b>
    rows, cols = optimize.linear_sum_assignment(-np.abs(G))
    perm = np.empty(B_ref.shape[1], dtype=int)
    perm[cols] = rows
    signs = np.sign(G[perm, np.arange(len(perm))])
    signs[signs == 0] = 1.0
    aligned = B_hat[:, perm] * signs
    err = np.linalg.norm(aligned - B_ref) / np.linalg.norm(B_ref)
    return aligned, float(err)

