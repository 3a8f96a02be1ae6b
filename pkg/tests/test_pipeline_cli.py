import csv
import json
import shutil

import pytest

from ngsvar.cli import main
from ngsvar.config import load_config
from ngsvar.errors import ConfigError
from ngsvar.pipeline import StageError, run_pipeline, verify_manifest
from ngsvar.transform import GROWTH_VARIABLES


@pytest.fixture(scope="module")
def cfg(substitute_config):
    return load_config(substitute_config)


@pytest.fixture(scope="module")
def full_run(cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    return run_pipeline(cfg, outdir=out)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------------------
# configuration


def test_config_values(cfg, substitute_config):
    assert cfg.countries == ("BR", "RU", "IN", "CN", "ZA")
    assert cfg.lags == (2, 7, 13)
    assert cfg.ngml.seed == 20200312 and cfg.ngml.restarts == 5
    assert cfg.confirmed.parent == substitute_config.parent
    assert all(p.exists() for p in cfg.input_files())


def test_config_errors(tmp_path, substitute_config):
    text = substitute_config.read_text()
    cases = {
        "nodata.cfg": text.replace("[data]", "[stuff]"),
        "crit.cfg": text.replace("lags = 2, 7, 13", "criterion = best"),
        "lags.cfg": text.replace("lags = 2, 7, 13", "lags = two"),
        "window.cfg": text.replace("end = 2020-09-30", "end = 2020-03-01"),
    }
    for name, body in cases.items():
        path = tmp_path / name
        path.write_text(body)
        with pytest.raises(ConfigError):
            load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


# ---------------------------------------------------------------------------
# stages


def test_stop_after_ingest(cfg, tmp_path):
    res = run_pipeline(cfg, stop_after="ingest", outdir=tmp_path)
    assert res.stages == ["ingest"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json", "panel_levels.csv"]
    assert len(res.panel.dates) == 203
    assert len(_rows(tmp_path / "panel_levels.csv")) == 1 + 5 * 203 * 5


def test_stop_after_transform(cfg, tmp_path):
    res = run_pipeline(cfg, stop_after="transform", outdir=tmp_path)
    assert res.growth.values.shape == (5, 202, 5)
    assert res.growth.variables == GROWTH_VARIABLES
    assert len(_rows(tmp_path / "growth_panel.csv")) == 1 + 5 * 202 * 5
    svg = (tmp_path / "series_grid.svg").read_text()
    assert svg.count('<g class="panel"') == 5
    assert not list(tmp_path.glob("lag_*"))


def test_stop_after_fit(cfg, tmp_path):
    res = run_pipeline(cfg, stop_after="fit", outdir=tmp_path)
    assert res.stages == ["ingest", "transform", "fit"]
    crit = _rows(tmp_path / "criteria.csv")
    assert crit[0] == ["p", "AIC", "HQ", "SC", "FPE"] and len(crit) == 16
    for p in (2, 7, 13):
        coef = _rows(tmp_path / f"lag_{p:02d}" / "var_coefficients.csv")
        assert len(coef) == 1 + 5 * (5 * p + 5)
        assert not (tmp_path / f"lag_{p:02d}" / "b_matrix.csv").exists()
    sel = res.selected
    assert sel["SC"] <= sel["HQ"] <= sel["AIC"]


def test_criterion_only_fits_one_model(cfg, tmp_path):
    res = run_pipeline(cfg.with_overrides(lags=(), criterion="sc"), stop_after="fit", outdir=tmp_path)
    assert list(res.models) == [res.selected["SC"]]
    assert len(list(tmp_path.glob("lag_*"))) == 1
    res = run_pipeline(cfg.with_overrides(lags=(), criterion="all"), stop_after="fit", outdir=tmp_path / "all")
    assert sorted(res.models) == sorted(set(res.selected.values()))


def test_full_run_outputs(full_run):
    out = full_run.outdir
    assert full_run.stages == ["ingest", "transform", "fit", "identify", "irf"]
    for p in (2, 7, 13):
        d = out / f"lag_{p:02d}"
        for name in ("var_coefficients.csv", "b_matrix.csv", "shock_params.csv", "fit_diag.json",
                     "irf.csv", "irf_grid.svg", "durations.csv"):
            assert (d / name).exists(), name
        assert len(_rows(d / "irf.csv")) == 1 + 21 * 25
        dur = _rows(d / "durations.csv")
        assert dur[0] == ["response_var", "shock_var", "duration", "band"] and len(dur) == 26
        diag = json.loads((d / "fit_diag.json").read_text())
        assert {"loglik", "converged", "iterations"} <= set(diag)
        shocks = _rows(d / "shock_params.csv")
        assert all(float(r[1]) > 2 for r in shocks[1:])


def test_manifest(full_run, tmp_path):
    out = full_run.outdir
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["generator"] == "numpy.random.PCG64"
    assert manifest["seed"] == 20200312
    assert set(manifest["models"]) == {"2", "7", "13"}
    listed = set(manifest["outputs"])
    written = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json"}
    assert listed == written
    assert verify_manifest(out) == []
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    with open(copy / "lag_02" / "irf.csv", "a") as fh:
        fh.write("tampered\n")
    assert verify_manifest(copy) == ["lag_02/irf.csv: digest mismatch"]


def test_partial_runs_are_deterministic(cfg, tmp_path):
    a = run_pipeline(cfg, stop_after="fit", outdir=tmp_path / "a")
    run_pipeline(cfg, stop_after="fit", outdir=tmp_path / "b")
    for p in a.outputs:
        rel = p.relative_to(tmp_path / "a")
        assert p.read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_stage_error_names_stage(cfg, tmp_path):
    broken = tmp_path / "in"
    shutil.copytree(cfg.confirmed.parent, broken)
    (broken / "market_ZA.csv").write_text("Date,Close\n2020-03-02,1\n")
    bad = load_config(broken / "run.cfg")
    with pytest.raises(StageError) as err:
        run_pipeline(bad, outdir=tmp_path / "out")
    assert err.value.stage == "ingest"
    assert main(["run", str(broken / "run.cfg"), "--out", str(tmp_path / "cli")]) == 1


# ---------------------------------------------------------------------------
# command line


def test_cli_help(capsys):
    assert main(["--help"]) == 0
    assert "mc-recovery" in capsys.readouterr().out


def test_cli_usage_and_config_errors(tmp_path, substitute_config):
    assert main(["fit", str(substitute_config), "--criterion", "best"]) == 2
    assert main(["fit", str(tmp_path / "missing.cfg")]) == 2
    assert main(["ingest", str(substitute_config), "--start", "March"]) == 2
    assert main(["simulate", "--out", str(tmp_path), "--df", "1.5"]) == 2


def test_cli_fit(substitute_config, tmp_path, capsys):
    out = tmp_path / "fit"
    assert main(["fit", str(substitute_config), "--out", str(out), "--criterion", "sc"]) == 0
    text = capsys.readouterr().out
    assert "selected lags" in text
    assert (out / "criteria.csv").exists()
    assert len(list(out.glob("lag_*"))) == 1


def test_cli_run_prints_durations(substitute_config, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", str(substitute_config), "--out", str(out), "--lags", "2", "--restarts", "2"]) == 0
    text = capsys.readouterr().out
    assert "lag 2 durations (band 0.05)" in text
    assert json.loads((out / "manifest.json").read_text())["config"]["ngml"]["restarts"] == 2


def test_cli_simulate(tmp_path):
    assert main(["simulate", "--K", "2", "--p", "1", "--T", "50", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "simulated.csv")
    assert rows[0] == ["t", "y1", "y2"] and len(rows) == 51
    assert len(_rows(tmp_path / "true_B.csv")) == 3


def test_cli_mc_recovery(tmp_path):
    args = ["mc-recovery", "--K", "2", "--p", "1", "--T", "300", "--seeds", "2", "--restarts", "1",
            "--out", str(tmp_path)]
    assert main(args) == 0
    rows = _rows(tmp_path / "recovery.csv")
    assert rows[0] == ["seed", "error", "converged", "loglik"] and len(rows) == 3
    summary = (tmp_path / "summary.txt").read_text()
    assert "median_error" in summary and "numpy.random.PCG64" in summary


def test_cli_synth_data(tmp_path):
    assert main(["synth-data", str(tmp_path / "d")]) == 0
    assert (tmp_path / "d" / "run.cfg").exists()
