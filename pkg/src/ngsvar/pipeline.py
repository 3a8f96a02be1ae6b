"""End-to-end run: ingest -> transform -> fit -> identify -> irf, with a manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import NgsvarError
from .ingest import (
    apply_overrides,
    align_panel,
    parse_fx,
    parse_jhu,
    parse_market,
    parse_overrides,
    PanelDataset,
)
from .irf import bootstrap_irf, durations, emit_irf_grid, irf
from .ngml import StructuralModel, fit_ngml
from .simlab import GENERATOR
from .svg import PALETTE, Panel, Trace, grid_svg
from .transform import GrowthPanel, build_growth_panel
from .var import CriteriaTable, VarModel, build_design, info_criteria, is_stable, ols_fit, select_lag

logger = logging.getLogger(__name__)

STAGES = ("ingest", "transform", "fit", "identify", "irf")
JHU_FILES = (("confirmed", "cumC"), ("deaths", "cumD"), ("recovered", "cumR"))


class StageError(NgsvarError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def g17(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


@dataclass
class RunResult:
    outdir: Path
    panel: PanelDataset | None = None
    growth: GrowthPanel | None = None
    criteria: CriteriaTable | None = None
    selected: dict[str, int] = field(default_factory=dict)
    models: dict[int, VarModel] = field(default_factory=dict)
    structural: dict[int, StructuralModel] = field(default_factory=dict)
    irfs: dict = field(default_factory=dict)
    durations: dict[int, list[tuple[str, str, int]]] = field(default_factory=dict)
    outputs: list[Path] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    stages: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# stages


def load_panel(cfg: RunConfig) -> PanelDataset:
    series = []
    for country in cfg.countries:
        for attr, variable in JHU_FILES:
            series.append(parse_jhu(getattr(cfg, attr), country, variable))
        series.append(parse_fx(cfg.fx[country], country, "ER"))
        series.append(parse_market(cfg.markets[country], country, "SV"))
    if cfg.overrides:
        series = apply_overrides(series, parse_overrides(cfg.overrides))
    return align_panel(series, (cfg.start, cfg.end), cfg.fill)


def series_grid_svg(gp: GrowthPanel) -> str:
    """One panel per growth variable, one colored trace per country."""
    x = list(range(len(gp.dates)))
    panels = []
    for vi, v in enumerate(gp.variables):
        traces = [
            Trace(gp.values[ci, :, vi].tolist(), c, PALETTE[ci % len(PALETTE)])
            for ci, c in enumerate(gp.countries)
        ]
        panels.append(Panel(v, traces, x))
    title = f"Normalized growth, {gp.dates[0]} to {gp.dates[-1]}"
    legend = [(c, PALETTE[i % len(PALETTE)]) for i, c in enumerate(gp.countries)]
    return grid_svg(panels, 1, len(panels), title=title, cell=(220, 170),
                    xlabel="days since start", legend=legend)


def lags_to_fit(cfg: RunConfig, criteria: CriteriaTable) -> tuple[dict[str, int], list[int]]:
    selected = {c: select_lag(criteria, c) for c in ("AIC", "HQ", "SC", "FPE")}
    lags = list(cfg.lags)
    if not lags:
        if cfg.criterion == "all":
            lags = sorted(set(selected.values()))
        else:
            lags = [selected[cfg.criterion.upper()]]
    return selected, sorted(set(lags))


def run_pipeline(cfg: RunConfig, stop_after: str | None = None, outdir=None) -> RunResult:
    """Run the stages up to and including ``stop_after`` and write their artifacts.

    Every file written is listed with its SHA-256 in ``manifest.json``.
    """
    if stop_after is not None and stop_after not in STAGES:
        raise ValueError(f"stop_after must be one of {STAGES}")
    last = STAGES.index(stop_after) if stop_after else len(STAGES) - 1
    out = Path(outdir) if outdir is not None else cfg.output
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(outdir=out)

    def stage(name):
        return STAGES.index(name) <= last

    def done(name):
        res.stages.append(name)
        logger.info("stage %s done", name)

    current = "ingest"
    try:
        res.panel = load_panel(cfg)
        res.warnings.extend(res.panel.warnings)
        rows = (
            (c, d.isoformat(), v, g17(res.panel.values[ci, ti, vi]))
            for ci, c in enumerate(res.panel.countries)
            for ti, d in enumerate(res.panel.dates)
            for vi, v in enumerate(res.panel.variables)
        )
        _write_csv(out / "panel_levels.csv", ["country", "date", "variable", "value"], rows)
        res.outputs.append(out / "panel_levels.csv")
        done(current)

        if stage("transform"):
            current = "transform"
            res.growth = gp = build_growth_panel(res.panel, cfg.normalize)
            n_zero = int(gp.zero_base.sum())
            if n_zero:
                res.warnings.append(f"{n_zero} growth cells had a zero base and were set to 0")
            for c, v in gp.degenerate:
                res.warnings.append(f"constant growth column {c}/{v} normalized to zeros")
            write_growth_outputs(gp, out)
            res.outputs += [out / "growth_panel.csv", out / "series_grid.svg"]
            done(current)

        if stage("fit"):
            current = "fit"
            res.criteria = info_criteria(gp, cfg.max_lag, cfg.reference_country)
            _write_csv(out / "criteria.csv", ["p", "AIC", "HQ", "SC", "FPE"],
                       ([p] + [g17(v) for v in vals] for p, *vals in res.criteria.rows()))
            res.outputs.append(out / "criteria.csv")
            res.selected, lags = lags_to_fit(cfg, res.criteria)
            for p in lags:
                model = ols_fit(build_design(gp, p, cfg.reference_country), sigma_divisor=cfg.sigma_divisor)
                res.models[p] = model
                path = out / f"lag_{p:02d}" / "var_coefficients.csv"
                names = model.design.regressor_names
                _write_csv(path, ["equation", "regressor", "estimate"], (
                    (eq, names[r], g17(model.coef[r, k]))
                    for k, eq in enumerate(model.variables)
                    for r in range(len(names))
                ))
                res.outputs.append(path)
                stable, rho = is_stable(model)
                if not stable:
                    res.warnings.append(f"VAR({p}) is not stable (max modulus {rho:.6f})")
            done(current)

        if stage("identify"):
            current = "identify"
            for p, model in res.models.items():
                sm = fit_ngml(model, cfg.ngml)
                res.structural[p] = sm
                if not sm.opt_diag.converged:
                    res.warnings.append(f"NGML for lag {p} stopped without meeting tolerances")
                res.outputs += write_structural_outputs(sm, out / f"lag_{p:02d}")
            done(current)

        if stage("irf"):
            current = "irf"
            for p, sm in res.structural.items():
                if cfg.bootstrap > 0:
                    irfs = bootstrap_irf(sm, cfg.horizon, cfg.bootstrap, cfg.block, cfg.ngml.seed, cfg.ngml)
                else:
                    irfs = irf(sm, cfg.horizon)
                res.irfs[p] = irfs
                d = out / f"lag_{p:02d}"
                res.outputs += list(emit_irf_grid(irfs, d, title=f"Structural IRFs, VAR({p})"))
                res.durations[p] = durations(irfs, cfg.band)
                _write_csv(d / "durations.csv", ["response_var", "shock_var", "duration", "band"],
                           ((i, j, h, g17(cfg.band)) for i, j, h in res.durations[p]))
                res.outputs.append(d / "durations.csv")
            done(current)
    except NgsvarError as exc:
        raise StageError(current, exc) from exc
    except (OSError, ValueError, np.linalg.LinAlgError) as exc:
        raise StageError(current, exc) from exc

    write_manifest(cfg, res)
    return res


def write_growth_outputs(gp: GrowthPanel, out: Path) -> None:
    _write_csv(out / "growth_panel.csv", ["country", "date", "variable", "value"],
               ((c, d.isoformat(), v, g17(x)) for c, d, v, x in gp.tidy_rows()))
    (out / "series_grid.svg").write_text(series_grid_svg(gp), encoding="utf-8")


def write_structural_outputs(sm: StructuralModel, d: Path) -> list[Path]:
    names = list(sm.base.variables)
    _write_csv(d / "b_matrix.csv", ["response"] + names,
               ([names[i]] + [g17(x) for x in sm.B[i]] for i in range(len(names))))
    _write_csv(d / "shock_params.csv", ["shock", "df", "scale"],
               ((names[i], g17(df), g17(sc)) for i, (df, sc) in enumerate(sm.shock_params)))
    diag = {
        "loglik": float(sm.loglik),
        "converged": sm.opt_diag.converged,
        "iterations": sm.opt_diag.iterations,
        "grad_norm": sm.opt_diag.grad_norm,
        "best_restart": sm.opt_diag.restart,
        "restarts": [
            {k: (float(v) if isinstance(v, (float, np.floating)) else v)
             for k, v in r.items() if k != "trace"}
            for r in sm.opt_diag.restarts
        ],
    }
    (d / "fit_diag.json").write_text(json.dumps(diag, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [d / "b_matrix.csv", d / "shock_params.csv", d / "fit_diag.json"]


def write_manifest(cfg: RunConfig, res: RunResult) -> Path:
    out = res.outdir
    manifest = {
        "tool": "ngsvar",
        "version": __version__,
        "generator": GENERATOR,
        "seed": cfg.ngml.seed,
        "stages": res.stages,
        "config": cfg.describe(),
        "inputs": {str(p): sha256(p) for p in cfg.input_files()},
        "outputs": {str(p.relative_to(out)): sha256(p) for p in sorted(set(res.outputs))},
        "selected_lags": res.selected,
        "models": {
            str(p): {
                "T_eff": m.T_eff,
                "stable": bool(is_stable(m)[0]),
                "max_modulus": is_stable(m)[1],
                **({"loglik": float(res.structural[p].loglik),
                    "converged": res.structural[p].opt_diag.converged}
                   if p in res.structural else {}),
            }
            for p, m in res.models.items()
        },
        "warnings": res.warnings,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def verify_manifest(outdir) -> list[str]:
    """Re-hash every listed output; return a description of each mismatch."""
    out = Path(outdir)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    problems = []
    for rel, digest in manifest["outputs"].items():
        path = out / rel
        if not path.exists():
            problems.append(f"{rel}: missing")
        elif sha256(path) != digest:
            problems.append(f"{rel}: digest mismatch")
    for src, digest in manifest["inputs"].items():
        if Path(src).exists() and sha256(src) != digest:
            problems.append(f"{src}: input changed")
    return problems
