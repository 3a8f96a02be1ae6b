"""Command line entry point: ``ngsvar <subcommand> ...``.

Exit codes: 0 success, 1 a pipeline stage failed, 2 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from datetime import date
from pathlib import Path

from .config import CRITERION_CHOICES, load_config
from .errors import ConfigError, NgsvarError
from .ngml import NgmlConfig
from .pipeline import StageError, g17, run_pipeline
from .simlab import SimSpec, recovery_experiment, simulate_svar, write_substitute_inputs

log = logging.getLogger("ngsvar")


def _config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("config", type=Path, help="run configuration file (INI-style key = value)")
    p.add_argument("--out", type=Path, help="output directory (default: [run] output)")
    p.add_argument("--start", help="window start, YYYY-MM-DD")
    p.add_argument("--end", help="window end, YYYY-MM-DD")


def _transform_args(p):
    p.add_argument("--normalize", choices=["percountry", "pooled"], help="z-score scope")


def _fit_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lags", type=int, nargs="+", metavar="P", help="lag order(s) to fit")
    g.add_argument("--criterion", choices=CRITERION_CHOICES,
                   help="fit the lag chosen by this criterion ('all': every distinct choice)")
    p.add_argument("--max-lag", type=int, help="largest lag in the criteria table (default 15)")
    p.add_argument("--reference-country", help="country absorbed by the intercept (default BR)")


def _identify_args(p):
    p.add_argument("--restarts", type=int, help="NGML restarts (default 5)")
    p.add_argument("--seed", type=int, help="top-level seed for NGML restarts")
    p.add_argument("--df-min", type=float, help="lower bound on shock degrees of freedom (default 2.1)")
    p.add_argument("--max-iter", type=int, help="iteration cap per optimizer stage")


def _irf_args(p):
    p.add_argument("--horizon", type=int, help="IRF horizon in days (default 20)")
    p.add_argument("--band", type=float, help="band for shock durations (default 0.05)")
    p.add_argument("--bootstrap", type=int, help="moving-block bootstrap replications (default 0: none)")
    p.add_argument("--block", type=int, help="bootstrap block length (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ngsvar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and align the raw files; write panel_levels.csv")
    _config_args(p)

    p = sub.add_parser("plot-series", help="growth panel CSV and per-variable series grid SVG")
    _config_args(p)
    _transform_args(p)

    p = sub.add_parser("fit", help="criteria table and reduced-form VAR coefficients")
    _config_args(p)
    _transform_args(p)
    _fit_args(p)

    p = sub.add_parser("identify", help="NGML structural identification")
    _config_args(p)
    _transform_args(p)
    _fit_args(p)
    _identify_args(p)

    for name, helptext in (("irf", "structural impulse responses and durations"),
                           ("run", "full pipeline")):
        p = sub.add_parser(name, help=helptext)
        _config_args(p)
        _transform_args(p)
        _fit_args(p)
        _identify_args(p)
        _irf_args(p)
        if name == "run":
            p.add_argument("--stop-after", choices=["ingest", "transform", "fit", "identify"],
                           help="stop after this stage")

    p = sub.add_parser("simulate", help="simulate a Student-t SVAR")
    _sim_args(p)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("mc-recovery", help="Monte Carlo recovery of B by NGML")
    _sim_args(p)
    p.add_argument("--seeds", type=int, default=50, help="number of Monte Carlo seeds")
    p.add_argument("--restarts", type=int, default=5, help="NGML restarts per fit")
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--df-min", type=float, default=2.1)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("synth-data", help="write substitute input files and a run.cfg")
    p.add_argument("out", type=Path)
    p.add_argument("--seed", type=int, default=2020)
    return parser


def _sim_args(p):
    p.add_argument("--K", type=int, default=3, help="number of variables")
    p.add_argument("--p", type=int, default=2, help="lag order")
    p.add_argument("--T", type=int, default=2000, help="sample length after burn-in")
    p.add_argument("--df", type=float, default=5.0, help="shock degrees of freedom")
    p.add_argument("--radius", type=float, default=0.5, help="companion spectral radius")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burn-in", type=int, default=200)


STOP = {"ingest": "ingest", "plot-series": "transform", "fit": "fit", "identify": "identify",
        "irf": None, "run": None}


def _iso(text):
    if text is None:
        return None
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise ConfigError(f"bad date {text!r}") from None


def _run_config(args):
    cfg = load_config(args.config)
    kw = {
        "start": _iso(args.start),
        "end": _iso(args.end),
        "normalize": getattr(args, "normalize", None),
        "max_lag": getattr(args, "max_lag", None),
        "reference_country": getattr(args, "reference_country", None),
        "restarts": getattr(args, "restarts", None),
        "seed": getattr(args, "seed", None),
        "df_lower_bound": getattr(args, "df_min", None),
        "max_iter": getattr(args, "max_iter", None),
        "horizon": getattr(args, "horizon", None),
        "band": getattr(args, "band", None),
        "bootstrap": getattr(args, "bootstrap", None),
        "block": getattr(args, "block", None),
        "output": args.out,
    }
    if getattr(args, "lags", None):
        kw.update(lags=tuple(args.lags), criterion=None)
    elif getattr(args, "criterion", None):
        kw.update(lags=(), criterion=args.criterion)
    return cfg.with_overrides(**kw)


def _pipeline_command(args) -> int:
    cfg = _run_config(args)
    stop = args.stop_after if args.command == "run" else STOP[args.command]
    res = run_pipeline(cfg, stop_after=stop)
    for w in res.warnings:
        log.warning(w)
    if res.selected:
        print("selected lags: " + ", ".join(f"{k}={v}" for k, v in res.selected.items()))
    for p, sm in res.structural.items():
        print(f"lag {p}: loglik {sm.loglik:.4f}, converged {sm.opt_diag.converged}")
    for p, rows in res.durations.items():
        er = [f"{j}:{h}" for i, j, h in rows if i == "GrowthER" and j in ("GrowthC", "GrowthD", "GrowthR")]
        sv = [f"{j}:{h}" for i, j, h in rows if i == "GrowthSV" and j in ("GrowthC", "GrowthD", "GrowthR")]
        if er or sv:
            print(f"lag {p} durations (band {cfg.band:g}): GrowthER {' '.join(er)} | GrowthSV {' '.join(sv)}")
    print(f"wrote {len(res.outputs)} files to {res.outdir}")
    return 0


def _sim_spec(args) -> SimSpec:
    try:
        return SimSpec(K=args.K, p=args.p, T=args.T, df=args.df, radius=args.radius,
                       seed=args.seed, burn_in=args.burn_in)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _simulate(args) -> int:
    sim = simulate_svar(_sim_spec(args))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    names = sim.panel.variables
    _write_rows(out / "simulated.csv", ["t", *names],
                ([t, *(g17(v) for v in row)] for t, row in enumerate(sim.panel.values[0])))
    _write_rows(out / "true_B.csv", ["response", *names],
                ([names[i], *(g17(v) for v in sim.B0[i])] for i in range(len(names))))
    _write_rows(out / "true_A.csv", ["lag", "response", *names],
                ([j + 1, names[i], *(g17(v) for v in sim.A[j, i])]
                 for j in range(sim.A.shape[0]) for i in range(len(names))))
    print(f"wrote {sim.panel.values.shape[1]} observations to {out / 'simulated.csv'}")
    return 0


def _mc_recovery(args) -> int:
    spec = _sim_spec(args)
    try:
        cfg = NgmlConfig(restarts=args.restarts, max_iter=args.max_iter, df_lower_bound=args.df_min,
                         seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rep = recovery_experiment(spec, cfg, args.seeds, n_jobs=args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_rows(args.out / "recovery.csv", ["seed", "error", "converged", "loglik"],
                ((r.seed, g17(r.error), int(r.converged), g17(r.loglik)) for r in rep.rows))
    lines = [f"{k} = {g17(v) if isinstance(v, float) else v}" for k, v in rep.summary().items()]
    (args.out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return _simulate(args)
        if args.command == "mc-recovery":
            return _mc_recovery(args)
        if args.command == "synth-data":
            path = write_substitute_inputs(args.out, args.seed)
            print(f"wrote substitute inputs; config at {path}")
            return 0
        return _pipeline_command(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NgsvarError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
