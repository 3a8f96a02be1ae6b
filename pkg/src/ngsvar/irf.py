"""Structural impulse responses, shock durations and the K x K response grid."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .ngml import NgmlConfig, StructuralModel, align_to_reference, fit_ngml
from .svg import Panel, Trace, grid_svg
from .transform import GrowthPanel
from .var import VarModel, build_design, ols_fit

IRF_HEADER = ["h", "response_var", "shock_var", "value"]


@dataclass(frozen=True)
class IrfSet:
    """``responses[h, i, j]``: response of variable i, h days after a unit shock j."""

    responses: np.ndarray
    variables: tuple[str, ...]
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.responses.shape[0] - 1


def ma_coefficients(model: VarModel | np.ndarray, H: int) -> np.ndarray:
    """Phi_0 = I, Phi_h = sum_{j=1}^{min(h,p)} Phi_{h-j} A_j, stacked as (H+1, K, K)."""
    A = model.A if isinstance(model, VarModel) else np.asarray(model, dtype=float)
    p, K, _ = A.shape
    phi = np.zeros((H + 1, K, K))
    phi[0] = np.eye(K)
    for h in range(1, H + 1):
        for j in range(1, min(h, p) + 1):
            phi[h] += phi[h - j] @ A[j - 1]
    return phi


def irf(sm: StructuralModel, H: int = 20) -> IrfSet:
    phi = ma_coefficients(sm.base, H)
    theta = phi @ sm.B
    theta[0] = sm.B
    return IrfSet(theta, tuple(sm.base.variables))


def shock_duration(irfs: IrfSet, i: int, j: int, band: float = 0.05) -> int:
    """Smallest h* with |response| < band for every h >= h*; H + 1 if the last value is outside."""
    if band <= 0:
        raise ValueError("band must be positive")
    path = np.abs(irfs.responses[:, i, j])
    outside = np.nonzero(path >= band)[0]
    return 0 if outside.size == 0 else int(outside[-1]) + 1


def durations(irfs: IrfSet, band: float = 0.05) -> list[tuple[str, str, int]]:
    K = len(irfs.variables)
    return [
        (irfs.variables[i], irfs.variables[j], shock_duration(irfs, i, j, band))
        for i in range(K)
        for j in range(K)
    ]


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def write_irf_csv(irfs: IrfSet, path) -> None:
    H, K = irfs.horizon, len(irfs.variables)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = IRF_HEADER + (["lower", "upper"] if irfs.lower is not None else [])
        w.writerow(header)
        for h in range(H + 1):
            for i in range(K):
                for j in range(K):
                    row = [h, irfs.variables[i], irfs.variables[j], _g17(irfs.responses[h, i, j])]
                    if irfs.lower is not None:
                        row += [_g17(irfs.lower[h, i, j]), _g17(irfs.upper[h, i, j])]
                    w.writerow(row)


def read_irf_csv(path) -> IrfSet:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    variables: list[str] = []
    for r in rows:
        for name in (r["response_var"], r["shock_var"]):
            if name not in variables:
                variables.append(name)
    H = max(int(r["h"]) for r in rows)
    K = len(variables)
    out = np.full((H + 1, K, K), np.nan)
    for r in rows:
        out[int(r["h"]), variables.index(r["response_var"]), variables.index(r["shock_var"])] = float(r["value"])
    return IrfSet(out, tuple(variables))


def emit_irf_grid(irfs: IrfSet, path, title: str = "") -> tuple[Path, Path]:
    """Write ``irf.csv`` and ``irf_grid.svg`` (rows: responding variable, columns: shock) into ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, svg_path = out / "irf.csv", out / "irf_grid.svg"
    write_irf_csv(irfs, csv_path)
    K = len(irfs.variables)
    hs = list(range(irfs.horizon + 1))
    panels = []
    for i in range(K):
        for j in range(K):
            traces = [Trace(irfs.responses[:, i, j].tolist(), "response", "#000000")]
            if irfs.lower is not None:
                traces += [
                    Trace(irfs.lower[:, i, j].tolist(), "lower", "#8888cc"),
                    Trace(irfs.upper[:, i, j].tolist(), "upper", "#8888cc"),
                ]
            panels.append(
                Panel(f"{irfs.variables[j]} -> {irfs.variables[i]}", traces, hs, zero_line=True)
            )
    svg_path.write_text(
        grid_svg(panels, K, K, title=title, xlabel="horizon (days)"), encoding="utf-8"
    )
    return csv_path, svg_path


# ---------------------------------------------------------------------------
# optional bootstrap bands; not part of the default outputs


def _block_indices(rng, n: int, block: int) -> np.ndarray:
    starts = rng.integers(0, n - block + 1, size=-(-n // block))
    return np.concatenate([np.arange(s, s + block) for s in starts])[:n]


def bootstrap_irf(
    sm: StructuralModel,
    H: int = 20,
    n_boot: int = 100,
    block: int = 10,
    seed: int = 0,
    cfg: NgmlConfig | None = None,
    level: float = 0.9,
) -> IrfSet:
    """Moving-block residual bootstrap of the structural responses.

    Residual blocks are resampled within each country segment, data are
    rebuilt through the fitted VAR from the original initial values, and
    the reduced form and B are re-estimated. Each bootstrap B is matched to
    the point estimate by signed column permutation before its responses
    enter the quantiles.
    """
    model = sm.base
    ds = model.design
    cfg = replace(cfg or NgmlConfig(), restarts=1)
    rng = np.random.default_rng(seed)
    n = ds.segments[0][1] - ds.segments[0][0]
    p, start, K = model.p, ds.start, model.K
    X_exog = ds.X_exog
    draws = np.empty((n_boot, H + 1, K, K))
    base_panel = _panel_from_design(ds)
    for b in range(n_boot):
        values = base_panel.values.copy()
        for ci, (lo, hi) in enumerate(ds.segments):
            U_c = model.U[lo:hi]
            idx = _block_indices(rng, n, min(block, n))
            det = X_exog[lo] @ model.C.T
            y = values[ci]
            for t_rel, t in enumerate(range(start, start + n)):
                acc = det + U_c[idx[t_rel]]
                for j in range(p):
                    acc = acc + model.A[j] @ y[t - 1 - j]
                y[t] = acc
        panel = replace(base_panel, values=values)
        boot_model = ols_fit(build_design(panel, p, ds.reference_country, start=start))
        boot_sm = fit_ngml(boot_model, replace(cfg, seed=seed + b))
        B_b, _ = align_to_reference(boot_sm.B, sm.B)
        draws[b] = ma_coefficients(boot_model, H) @ B_b
    alpha = (1 - level) / 2
    point = irf(sm, H)
    return IrfSet(
        point.responses,
        point.variables,
        lower=np.quantile(draws, alpha, axis=0),
        upper=np.quantile(draws, 1 - alpha, axis=0),
    )


def _panel_from_design(ds) -> GrowthPanel:
    """Recover the (country, time, variable) array a design was built from."""
    C = len(ds.countries)
    K, p, start = ds.K, ds.p, ds.start
    n = ds.segments[0][1] - ds.segments[0][0]
    # rows before start - p are never read by a design with this start
    values = np.full((C, start + n, K), np.nan)
    for ci, (lo, hi) in enumerate(ds.segments):
        values[ci, start:] = ds.Y[lo:hi]
        # the first row's lags hold y_{start-1} .. y_{start-p}
        for j in range(1, p + 1):
            values[ci, start - j] = ds.lags[lo, (j - 1) * K : j * K]
    dates = tuple(range(start + n))
    return GrowthPanel(ds.countries, dates, values, ds.variables, scope="bootstrap")
