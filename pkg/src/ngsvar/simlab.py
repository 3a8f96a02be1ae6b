"""Synthetic SVAR data, Monte Carlo recovery runs and brute-force oracles.

All randomness goes through ``numpy.random.default_rng`` (PCG64), seeded
explicitly, so a (spec, config, seed) triple reproduces every number.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import date, timedelta
from pathlib import Path

import numpy as np
from scipy import stats

from .ingest import JHU_NAMES
from .ngml import NgmlConfig, align_to_reference, fit_ngml
from .transform import GROWTH_VARIABLES, GrowthPanel
from .var import build_design, companion, ols_fit, spectral_radius

GENERATOR = "numpy.random.PCG64"


@dataclass(frozen=True)
class SimSpec:
    K: int = 3
    p: int = 2
    T: int = 2000
    A: np.ndarray | None = None
    radius: float = 0.5
    B0: np.ndarray | None = None
    df: tuple[float, ...] | float = 5.0
    seed: int = 0
    burn_in: int = 200

    def __post_init__(self):
        dfs = self.dfs
        if np.any(dfs <= 2):
            raise ValueError("shock degrees of freedom must exceed 2")
        if self.A is not None:
            A = np.asarray(self.A, dtype=float)
            if A.shape != (self.p, self.K, self.K):
                raise ValueError(f"A has shape {A.shape}, expected {(self.p, self.K, self.K)}")
            if spectral_radius(A) >= 0.95:
                raise ValueError("simulation VAR must have spectral radius below 0.95")
        elif not 0 < self.radius < 0.95:
            raise ValueError("radius must lie in (0, 0.95)")

    @property
    def dfs(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.df, dtype=float), (self.K,)).copy()

    def coefficients(self) -> np.ndarray:
        if self.A is not None:
            return np.asarray(self.A, dtype=float)
        return random_stable_var(self.K, self.p, self.radius, self.seed)

    def mixing(self) -> np.ndarray:
        return default_mixing(self.K) if self.B0 is None else np.asarray(self.B0, dtype=float)


def random_stable_var(K: int, p: int, radius: float, seed: int) -> np.ndarray:
    """Gaussian random VAR coefficients rescaled to a given companion spectral radius.

    Multiplying A_j by s**j multiplies every companion eigenvalue by s.
    """
    if not 0 < radius < 1:
        raise ValueError("radius must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((p, K, K)) / math.sqrt(K * p)
    s = radius / spectral_radius(A)
    return A * (s ** np.arange(1, p + 1))[:, None, None]


def default_mixing(K: int) -> np.ndarray:
    """Fixed, well-conditioned mixing matrix with a dominant positive diagonal."""
    rng = np.random.default_rng(10_000 + K)
    B = np.eye(K) + 0.35 * rng.standard_normal((K, K))
    np.fill_diagonal(B, 1.0)
    return B


def unit_t(rng, df, size) -> np.ndarray:
    """Student-t draws rescaled to unit variance, one column per entry of ``df``."""
    df = np.asarray(df, dtype=float)
    return rng.standard_t(df, size=(size, df.size)) * np.sqrt((df - 2) / df)


@dataclass(frozen=True)
class SimulatedData:
    panel: GrowthPanel
    shocks: np.ndarray
    A: np.ndarray
    B0: np.ndarray
    spec: SimSpec


def simulate_svar(spec: SimSpec) -> SimulatedData:
    A, B0 = spec.coefficients(), spec.mixing()
    rng = np.random.default_rng(spec.seed)
    K, p = spec.K, spec.p
    n = spec.T + spec.burn_in
    eps = unit_t(rng, spec.dfs, n)
    u = eps @ B0.T
    y = np.zeros((n + p, K))
    for t in range(n):
        acc = u[t].copy()
        for j in range(p):
            acc += A[j] @ y[p + t - 1 - j]
        y[p + t] = acc
    y = y[p + spec.burn_in :]
    names = GROWTH_VARIABLES if K == len(GROWTH_VARIABLES) else tuple(f"y{i + 1}" for i in range(K))
    start = date(2000, 1, 1)
    dates = tuple(start + timedelta(days=i) for i in range(spec.T))
    panel = GrowthPanel(("SIM",), dates, y[None, :, :], names, scope="simulated")
    return SimulatedData(panel, eps[spec.burn_in :], A, B0, spec)


# ---------------------------------------------------------------------------
# Monte Carlo recovery


@dataclass(frozen=True)
class RecoveryRow:
    seed: int
    error: float
    converged: bool
    loglik: float


@dataclass
class RecoveryReport:
    spec: SimSpec
    cfg: NgmlConfig
    rows: list[RecoveryRow] = field(default_factory=list)
    generator: str = GENERATOR

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.rows])

    @property
    def median_error(self) -> float:
        return float(np.median(self.errors))

    @property
    def convergence_rate(self) -> float:
        return float(np.mean([r.converged for r in self.rows]))

    def quantiles(self, qs=(0.1, 0.25, 0.5, 0.75, 0.9)) -> dict[float, float]:
        return {q: float(np.quantile(self.errors, q)) for q in qs}

    @property
    def near_gaussian(self) -> bool:
        # t shocks this light-tailed leave B only weakly identified
        return bool(np.min(self.spec.dfs) >= 30)

    def summary(self) -> dict[str, object]:
        out: dict[str, object] = {
            "K": self.spec.K,
            "p": self.spec.p,
            "T": self.spec.T,
            "df": ";".join(f"{d:g}" for d in self.spec.dfs),
            "seeds": len(self.rows),
            "restarts": self.cfg.restarts,
            "median_error": self.median_error,
            "convergence_rate": self.convergence_rate,
            "generator": self.generator,
            "regime": "near-gaussian (weak identification)" if self.near_gaussian else "non-gaussian",
        }
        for q, v in self.quantiles().items():
            out[f"q{int(round(q * 100)):02d}_error"] = v
        return out


def _recover_one(args) -> RecoveryRow:
    spec, cfg, seed = args
    sim = simulate_svar(replace(spec, seed=seed))
    model = ols_fit(build_design(sim.panel, spec.p))
    sm = fit_ngml(model, cfg)
    _, err = align_to_reference(sm.B, sim.B0)
    return RecoveryRow(seed, err, sm.opt_diag.converged, sm.loglik)


def recovery_experiment(
    spec: SimSpec, cfg: NgmlConfig, n_seeds: int, n_jobs: int = 1
) -> RecoveryReport:
    """Simulate, fit OLS + NGML and score aligned B error for seeds spec.seed .. spec.seed+n-1.

    The VAR coefficients and mixing matrix are held fixed across seeds; only
    the shock draws change.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    fixed = replace(spec, A=spec.coefficients(), B0=spec.mixing())
    jobs = [(fixed, cfg, spec.seed + i) for i in range(n_seeds)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            rows = list(ex.map(_recover_one, jobs))
    else:
        rows = [_recover_one(j) for j in jobs]
    rows.sort(key=lambda r: r.seed)
    return RecoveryReport(fixed, cfg, rows)


# ---------------------------------------------------------------------------
# brute-force oracles


def normal_equations_oracle(Z, Y) -> np.ndarray:
    """(Z'Z)^-1 Z'Y through explicit cross products."""
    Z = np.asarray(Z, dtype=float)
    return np.linalg.solve(Z.T @ Z, Z.T @ np.asarray(Y, dtype=float))


def companion_power_oracle(A, H: int) -> list[np.ndarray]:
    A = np.asarray(A, dtype=float)
    K = A.shape[1]
    F = companion(A)
    out, P = [], np.eye(F.shape[0])
    for _ in range(H + 1):
        out.append(P[:K, :K].copy())
        P = P @ F
    return out


def impulse_by_simulation(A, H: int, shock) -> np.ndarray:
    """Push a one-off reduced-form impulse through y_t = sum_j A_j y_{t-j}."""
    A = np.asarray(A, dtype=float)
    p, K, _ = A.shape
    y = np.zeros((H + 1 + p, K))
    y[p] = shock
    for t in range(p + 1, H + 1 + p):
        for j in range(p):
            y[t] += A[j] @ y[t - 1 - j]
    return y[p:]


def loglik_oracle(B, shock_params, U) -> float:
    """Negative log-likelihood via scipy's t density, observation by observation."""
    B = np.asarray(B, dtype=float)
    U = np.asarray(U, dtype=float)
    Binv = np.linalg.inv(B)
    logabsdet = math.log(abs(np.linalg.det(B)))
    total = 0.0
    for u in U:
        e = Binv @ u
        for i, (df, scale) in enumerate(shock_params):
            total += stats.t.logpdf(e[i], df, scale=scale)
        total -= logabsdet
    return -total


def align_exhaustive(B_hat, B_ref) -> tuple[np.ndarray, float]:
    """Search all K! 2^K signed column permutations of ``B_hat``."""
    B_hat = np.asarray(B_hat, dtype=float)
    K = B_hat.shape[1]
    best, best_err = None, np.inf
    ref_norm = np.linalg.norm(B_ref)
    for perm in itertools.permutations(range(K)):
        for signs in itertools.product((1.0, -1.0), repeat=K):
            cand = B_hat[:, perm] * np.array(signs)
            err = np.linalg.norm(cand - B_ref) / ref_norm
            if err < best_err:
                best, best_err = cand, err
    return best, float(best_err)


# ---------------------------------------------------------------------------
# substitute raw inputs in the public file formats

_JHU_START = date(2020, 1, 22)
_JHU_END = date(2020, 10, 5)

# (peak day index from Jan 22, peak daily cases, spread in days, fx level, index level)
_PROFILES = {
    "BR": (190, 45_000, 45, 4.2, 115_000.0),
    "RU": (110, 10_000, 40, 62.0, 3_100.0),
    "IN": (240, 90_000, 50, 71.0, 41_000.0),
    "CN": (20, 3_500, 8, 6.9, 3_050.0),
    "ZA": (180, 12_000, 25, 14.5, 57_000.0),
}
_CN_PROVINCES = ("Hubei", "Guangdong", "Zhejiang")


def _cumulative_counts(rng, n_days, peak, height, spread, seed_cases):
    t = np.arange(n_days)
    rate = height * np.exp(-0.5 * ((t - peak) / spread) ** 2)
    new = rng.poisson(rate * rng.lognormal(0.0, 0.25, n_days))
    cum = seed_cases + np.cumsum(new)
    return cum.astype(np.int64)


def write_substitute_inputs(outdir, seed: int = 2020) -> Path:
    """Write JHU/Yahoo/FX-format CSVs plus ``run.cfg`` for a synthetic BRICS panel.

    The series mimic the shape of the 2020 data (epidemic waves, weekday-only
    markets with heavy-tailed returns) but are not the archived public data.
    Returns the path of the config file.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    days = [_JHU_START + timedelta(days=i) for i in range((_JHU_END - _JHU_START).days + 1)]
    n = len(days)

    counts = {}
    for code, (peak, height, spread, _, _) in _PROFILES.items():
        confirmed = _cumulative_counts(rng, n, peak, height, spread, 1 + rng.integers(0, 5))
        deaths = _cumulative_counts(rng, n, peak + 12, height * 0.025, spread, 0)
        recovered = _cumulative_counts(rng, n, peak + 16, height * 0.85, spread * 1.1, 0)
        counts[code] = {"confirmed": confirmed, "deaths": deaths, "recovered": recovered}
    # one downward revision, as seen in the real files
    counts["IN"]["recovered"][150] = counts["IN"]["recovered"][149] - 7

    header = "Province/State,Country/Region,Lat,Long," + ",".join(
        f"{d.month}/{d.day}/{d.strftime('%y')}" for d in days
    )
    for kind in ("confirmed", "deaths", "recovered"):
        lines = [header]
        lines.append(",Canada,56.1,-106.3," + ",".join("0" for _ in days))
        for code, name in JHU_NAMES.items():
            total = counts[code][kind]
            if code == "CN":
                weights = np.array([0.8, 0.12, 0.08])
                parts = np.floor(np.outer(weights, total)).astype(np.int64)
                parts[0] += total - parts.sum(axis=0)
                for prov, row in zip(_CN_PROVINCES, parts):
                    lines.append(f"{prov},{name},30.0,114.0," + ",".join(str(v) for v in row))
            else:
                lines.append(f",{name},0.0,0.0," + ",".join(str(v) for v in total))
        (out / f"time_series_covid19_{kind}_global.csv").write_text("\n".join(lines) + "\n")

    market_days = [d for d in days if d.weekday() < 5]
    case_growth = {}
    for code in _PROFILES:
        c = counts[code]["confirmed"].astype(float)
        g = np.zeros(n)
        g[1:] = np.where(c[:-1] > 0, 100 * np.diff(c) / np.maximum(c[:-1], 1), 0)
        case_growth[code] = dict(zip(days, (g - g.mean()) / (g.std() + 1e-12)))

    for code, (_, _, _, fx0, idx0) in _PROFILES.items():
        shock = np.array([case_growth[code][d] for d in market_days])
        lagged = np.concatenate([[0.0], shock[:-1]])
        ret_sv = 0.0004 - 0.004 * lagged + 0.015 * stats.t.rvs(4, size=len(market_days), random_state=rng) / math.sqrt(2)
        ret_fx = 0.0001 + 0.002 * lagged + 0.006 * stats.t.rvs(4, size=len(market_days), random_state=rng) / math.sqrt(2)
        close = idx0 * np.exp(np.cumsum(ret_sv))
        fx = fx0 * np.exp(np.cumsum(ret_fx))
        holidays = set(rng.choice(len(market_days), size=4, replace=False).tolist())

        lines = ["Date,Open,High,Low,Close,Adj Close,Volume"]
        for i, d in enumerate(market_days):
            if i in holidays and i > 0 and d > date(2020, 3, 16):
                lines.append(f"{d.isoformat()},null,null,null,null,null,null")
                continue
            c = close[i]
            o = c * (1 + 0.003 * rng.standard_normal())
            hi, lo = max(o, c) * 1.004, min(o, c) * 0.996
            vol = int(rng.integers(1_000_000, 9_000_000))
            lines.append(f"{d.isoformat()},{o:.6f},{hi:.6f},{lo:.6f},{c:.6f},{c:.6f},{vol}")
        (out / f"market_{code}.csv").write_text("\n".join(lines) + "\n")

        lines = ["date,rate"] + [f"{d.isoformat()},{r:.6f}" for d, r in zip(market_days, fx)]
        (out / f"fx_{code}.csv").write_text("\n".join(lines) + "\n")

    cfg = [
        "# substitute inputs written by write_substitute_inputs; not the archived 2020 data",
        "[run]",
        "start = 2020-03-12",
        "end = 2020-09-30",
        "normalize = percountry",
        "lags = 2, 7, 13",
        "max_lag = 15",
        "reference_country = BR",
        "horizon = 20",
        "band = 0.05",
        "seed = 20200312",
        "restarts = 5",
        "output = out",
        "",
        "[data]",
        "confirmed = time_series_covid19_confirmed_global.csv",
        "deaths = time_series_covid19_deaths_global.csv",
        "recovered = time_series_covid19_recovered_global.csv",
        "",
    ]
    for code in _PROFILES:
        cfg += [f"[{code}]", f"market = market_{code}.csv", f"fx = fx_{code}.csv", ""]
    path = out / "run.cfg"
    path.write_text("\n".join(cfg))
    return path
