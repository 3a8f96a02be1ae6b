"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Criteria 1 and 2 compare against the target lag orders and duration windows
only when the archived 2020 inputs are available; point
``NGSVAR_ARCHIVED_CONFIG`` at their run.cfg. Otherwise the run uses the
format-faithful substitute inputs, the ordering invariant is still asserted,
and the reproduction checks are reported as warnings.
"""

import json
import os
import time
import warnings
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from conftest import record_acceptance
from ngsvar.cli import main
from ngsvar.config import load_config
from ngsvar.ingest import COVID_VARIABLES
from ngsvar.irf import irf, ma_coefficients
from ngsvar.ngml import NgmlConfig, OptDiag, StructuralModel
from ngsvar.pipeline import load_panel
from ngsvar.simlab import (
    SimSpec,
    companion_power_oracle,
    normal_equations_oracle,
    random_stable_var,
    recovery_experiment,
    simulate_svar,
)
from ngsvar.transform import build_growth_panel, growth_values, zscore
from ngsvar.var import build_design, companion, ols_fit, spectral_radius

TARGET_LAGS = {"SC": 2, "HQ": 7, "AIC": 13, "FPE": 13}
ER_WINDOW, SV_WINDOW = (5, 15), (8, 25)
COVID_SHOCKS = tuple("Growth" + v[3:] for v in sorted(COVID_VARIABLES))


@pytest.fixture(scope="module")
def pipeline_run(substitute_config, tmp_path_factory):
    archived = os.environ.get("NGSVAR_ARCHIVED_CONFIG")
    config = Path(archived) if archived else substitute_config
    out = tmp_path_factory.mktemp("acceptance_run")
    t0 = time.perf_counter()
    code = main(["run", str(config), "--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    return {"config": config, "out": out, "elapsed": elapsed, "manifest": manifest,
            "substitute": not archived}


def test_criterion_1_lag_selection(pipeline_run):
    sel = pipeline_run["manifest"]["selected_lags"]
    elapsed = pipeline_run["elapsed"]
    ordered = sel["SC"] <= sel["HQ"] <= sel["AIC"]
    within = all(abs(sel[k] - v) <= 1 for k, v in TARGET_LAGS.items())
    chosen = ", ".join(f"{k}={sel[k]}" for k in ("SC", "HQ", "AIC", "FPE"))
    if pipeline_run["substitute"]:
        ok = ordered and elapsed < 120
        detail = f"substitute inputs; {chosen}; ordering {'holds' if ordered else 'violated'}; {elapsed:.1f} s"
        if not within:
            warnings.warn(f"lag orders {chosen} differ from targets {TARGET_LAGS} on substitute inputs")
            detail += "; target reproduction not assessable"
    else:
        ok = ordered and within and elapsed < 120
        detail = f"archived inputs; {chosen}; targets {TARGET_LAGS}; {elapsed:.1f} s"
    record_acceptance(1, "lag selection", ok, detail)
    assert ordered and elapsed < 120
    if not pipeline_run["substitute"]:
        assert within


def _duration_table(out, p):
    rows = (out / f"lag_{p:02d}" / "durations.csv").read_text().splitlines()[1:]
    return {(r.split(",")[0], r.split(",")[1]): int(r.split(",")[2]) for r in rows}


def test_criterion_2_shock_durations(pipeline_run):
    out = pipeline_run["out"]
    misses = []
    for p in (7, 13):
        table = _duration_table(out, p)
        for shock in COVID_SHOCKS:
            for target, (lo, hi) in (("GrowthER", ER_WINDOW), ("GrowthSV", SV_WINDOW)):
                h = table[(target, shock)]
                if not lo <= h <= hi:
                    misses.append(f"lag {p} {shock}->{target}={h}")
    ok = not misses
    if pipeline_run["substitute"]:
        detail = "substitute inputs; " + ("all windows met" if ok else "outside window: " + ", ".join(misses))
        if not ok:
            warnings.warn("duration windows not met on substitute inputs: " + ", ".join(misses))
        record_acceptance(2, "shock durations", "PASS" if ok else "WARN", detail)
    else:
        record_acceptance(2, "shock durations", ok, ", ".join(misses) or "all windows met")
        assert ok, misses


def test_criterion_3_ols_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(200):
        K, p = int(rng.integers(1, 6)), int(rng.integers(1, 14))
        T = int(rng.integers(K * p + 40, 1001))
        sim = simulate_svar(SimSpec(K=K, p=p, T=T, radius=float(rng.uniform(0.1, 0.9)), seed=i))
        model = ols_fit(build_design(sim.panel, p))
        oracle = normal_equations_oracle(model.design.Z, model.design.Y)
        worst = max(worst, float(np.max(np.abs(model.coef - oracle) / np.abs(oracle))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 30
    record_acceptance(3, "OLS vs normal equations", ok, f"max relative error {worst:.2e}; {elapsed:.1f} s")
    assert ok


@pytest.mark.slow
def test_criterion_4_ngml_recovery():
    t0 = time.perf_counter()
    rep = recovery_experiment(SimSpec(K=3, p=2, T=2000, df=5.0, seed=0), NgmlConfig(restarts=5), 50)
    elapsed = time.perf_counter() - t0
    ok = rep.median_error < 0.15 and rep.convergence_rate >= 0.8 and elapsed < 600
    record_acceptance(4, "NGML recovery", ok, f"median error {rep.median_error:.4f}; "
                      f"converged {rep.convergence_rate:.0%}; {elapsed:.0f} s")
    assert ok


def _structural(A, B):
    A = np.asarray(A, dtype=float)
    p, K, _ = A.shape
    sim = simulate_svar(SimSpec(K=K, p=p, T=max(200, 3 * K * p + 50), seed=0))
    base = ols_fit(build_design(sim.panel, p))
    base = type(base)(p, A, base.C, base.U, base.Sigma_u, base.T_eff, base.coef, base.design)
    return StructuralModel(base, np.asarray(B, dtype=float), np.full(K, 5.0), np.ones(K), 0.0,
                           OptDiag(0, True, 0.0, 0))


def test_criterion_5_irf_checks():
    rng = np.random.default_rng(5)
    companion_err = 0.0
    impact_exact = True
    normal_ok = conditioned_ok = True
    literal_generic_violations = 0
    for seed in range(60):
        K, p = int(rng.integers(1, 6)), int(rng.integers(1, 14))
        A = random_stable_var(K, p, float(rng.uniform(0.2, 0.9)), seed)
        B = rng.standard_normal((K, K))
        theta = irf(_structural(A, B), 40).responses
        impact_exact &= bool(np.array_equal(theta[0], B))
        oracle = companion_power_oracle(A, 40)
        phi = ma_coefficients(A, 40)
        companion_err = max(companion_err, max(float(np.max(np.abs(phi[h] - oracle[h]))) for h in range(41)))

        rho = spectral_radius(A)
        h = np.arange(41)
        _, V = np.linalg.eig(companion(A))
        C = np.linalg.cond(V) * np.linalg.norm(B, 2)
        norms2 = np.array([np.linalg.norm(t, 2) for t in theta])
        conditioned_ok &= bool(np.all(norms2 <= 1.1 * C * rho**h))
        env = np.maximum.accumulate(np.max(np.abs(theta), axis=(1, 2))[::-1])[::-1]
        literal_generic_violations += int(np.any(env[5:] > 1.1 * env[0] * rho ** h[5:]))

        D = np.diag(rng.uniform(-0.9, 0.9, K))[None]
        theta_n = irf(_structural(D, B), 40).responses
        env_n = np.maximum.accumulate(np.max(np.abs(theta_n), axis=(1, 2))[::-1])[::-1]
        normal_ok &= bool(np.all(env_n[5:] <= 1.1 * env_n[0] * spectral_radius(D) ** h[5:]))

    scalar = ma_coefficients(np.array([[[0.5]]]), 40)[:, 0, 0]
    scalar_err = float(np.max(np.abs(scalar - 0.5 ** np.arange(41))))
    ok = impact_exact and companion_err < 1e-10 and scalar_err <= 1e-12 and normal_ok and conditioned_ok
    record_acceptance(
        5, "IRF analytic checks", ok,
        f"impact exact {impact_exact}; companion {companion_err:.1e}; AR(0.5) {scalar_err:.1e}; "
        f"decay bound (10% slack): normal companions {normal_ok}, eigenvector-conditioned {conditioned_ok}; "
        f"impact-scaled form exceeded by {literal_generic_violations}/60 non-normal models",
    )
    assert ok


def test_criterion_6_transform_invariants(substitute_config):
    rng = np.random.default_rng(6)
    worst_mean = worst_sd = 0.0
    for _ in range(200):
        x = rng.normal(rng.uniform(-50, 50), rng.uniform(0.1, 20), int(rng.integers(3, 300)))
        z = zscore(x).values
        worst_mean = max(worst_mean, abs(z.mean()))
        worst_sd = max(worst_sd, abs(z.std(ddof=1) - 1))
    base = np.exp(np.cumsum(rng.normal(0, 0.05, 203))) * 100
    g0, _ = growth_values(base)
    worst_scale = 0.0
    for c in np.exp(rng.uniform(np.log(1e-6), np.log(1e6), 1000)):
        g, _ = growth_values(c * base)
        worst_scale = max(worst_scale, float(np.max(np.abs(g - g0))))
    cfg = load_config(substitute_config)
    assert (cfg.start, cfg.end) == (date(2020, 3, 12), date(2020, 9, 30))
    panel = load_panel(cfg)
    gp = build_growth_panel(panel)
    lengths = (len(panel.dates), len(gp.dates))
    ok = worst_mean < 1e-10 and worst_sd < 1e-10 and worst_scale < 1e-9 and lengths == (203, 202)
    record_acceptance(6, "transform invariants", ok,
                      f"|mean| {worst_mean:.1e}, |sd-1| {worst_sd:.1e}, rescaling drift {worst_scale:.1e}, "
                      f"lengths {lengths[0]}->{lengths[1]}")
    assert ok


def test_criterion_7_determinism(pipeline_run, tmp_path):
    first = pipeline_run["out"]
    assert main(["run", str(pipeline_run["config"]), "--out", str(tmp_path)]) == 0
    csvs = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    differ = [str(r) for r in csvs if (first / r).read_bytes() != (tmp_path / r).read_bytes()]
    ok = not differ and len(csvs) == len(list(tmp_path.rglob("*.csv")))
    record_acceptance(7, "byte-identical reruns", ok, f"{len(csvs)} CSV files compared; "
                      + (f"differ: {differ}" if differ else "all identical"))
    assert ok
