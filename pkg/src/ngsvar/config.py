"""Run configuration: an INI-style ``key = value`` file with one section per country.

Example::

    [run]
    start = 2020-03-12
    end = 2020-09-30
    normalize = percountry        ; or pooled
    lags = 2, 7, 13               ; leave empty and set criterion to select
    criterion =                   ; aic | hq | sc | fpe | all
    max_lag = 15
    reference_country = BR
    horizon = 20
    band = 0.05
    seed = 20200312
    restarts = 5
    output = out

    [data]
    confirmed = time_series_covid19_confirmed_global.csv
    deaths = time_series_covid19_deaths_global.csv
    recovered = time_series_covid19_recovered_global.csv
    overrides = india_corrections.csv   ; optional

    [BR]
    market = bvsp.csv
    fx = brl_usd.csv

Relative paths resolve against the directory holding the config file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from datetime import date
from pathlib import Path

from .errors import ConfigError
from .ingest import BRICS
from .ngml import NgmlConfig
from .transform import SCOPES

CRITERION_CHOICES = ("aic", "hq", "sc", "fpe", "all")


@dataclass(frozen=True)
class RunConfig:
    confirmed: Path
    deaths: Path
    recovered: Path
    markets: dict[str, Path]
    fx: dict[str, Path]
    overrides: Path | None = None
    start: date = date(2020, 3, 12)
    end: date = date(2020, 9, 30)
    fill: str = "forward"
    normalize: str = "percountry"
    lags: tuple[int, ...] = (2, 7, 13)
    criterion: str | None = None
    max_lag: int = 15
    reference_country: str = "BR"
    sigma_divisor: str = "ml"
    ngml: NgmlConfig = field(default_factory=NgmlConfig)
    horizon: int = 20
    band: float = 0.05
    bootstrap: int = 0
    block: int = 10
    output: Path = Path("out")
    source: Path | None = None

    def __post_init__(self):
        if self.start >= self.end:
            raise ConfigError(f"window start {self.start} must precede end {self.end}")
        if not self.lags and not self.criterion:
            raise ConfigError("give a lag list or a selection criterion")
        if any(p < 1 for p in self.lags):
            raise ConfigError("lags must be positive")
        if self.criterion and self.criterion not in CRITERION_CHOICES:
            raise ConfigError(f"criterion must be one of {CRITERION_CHOICES}")
        if self.normalize not in SCOPES:
            raise ConfigError(f"normalize must be one of {SCOPES}")
        if self.fill not in ("forward", "none"):
            raise ConfigError("fill must be forward or none")
        if self.sigma_divisor not in ("ml", "dof"):
            raise ConfigError("sigma_divisor must be ml or dof")
        if self.max_lag < 1 or self.horizon < 1 or self.band <= 0:
            raise ConfigError("max_lag and horizon must be >= 1 and band > 0")
        if set(self.markets) != set(self.fx):
            raise ConfigError("every country needs both a market and an fx file")
        if self.reference_country not in self.markets:
            raise ConfigError(f"reference country {self.reference_country} has no data section")

    @property
    def countries(self) -> tuple[str, ...]:
        known = [c for c in BRICS if c in self.markets]
        return tuple(known + sorted(set(self.markets) - set(BRICS)))

    def input_files(self) -> list[Path]:
        files = [self.confirmed, self.deaths, self.recovered]
        if self.overrides:
            files.append(self.overrides)
        for c in self.countries:
            files += [self.markets[c], self.fx[c]]
        return files

    def with_overrides(self, **kw) -> "RunConfig":
        """Copy with non-None keyword values applied; NGML fields are routed to ``ngml``."""
        ngml_names = {f.name for f in fields(NgmlConfig)}
        ngml_kw = {k: v for k, v in kw.items() if k in ngml_names and v is not None}
        run_kw = {k: v for k, v in kw.items() if k not in ngml_names and v is not None}
        try:
            cfg = replace(self, **run_kw)
            if ngml_kw:
                cfg = replace(cfg, ngml=replace(cfg.ngml, **ngml_kw))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return cfg

    def describe(self) -> dict[str, object]:
        """Plain values for the manifest; paths relative to the config file."""
        base = self.source.parent if self.source else Path.cwd()

        def rel(p):
            try:
                return str(Path(p).resolve().relative_to(base.resolve()))
            except ValueError:
                return str(p)

        return {
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "fill": self.fill,
            "normalize": self.normalize,
            "lags": list(self.lags),
            "criterion": self.criterion,
            "max_lag": self.max_lag,
            "reference_country": self.reference_country,
            "sigma_divisor": self.sigma_divisor,
            "horizon": self.horizon,
            "band": self.band,
            "bootstrap": self.bootstrap,
            "block": self.block,
            "ngml": {f.name: getattr(self.ngml, f.name) for f in fields(NgmlConfig)},
            "countries": list(self.countries),
            "inputs": [rel(p) for p in self.input_files()],
        }


def parse_lags(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.replace(";", ",").split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad lag list {text!r}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    base = path.parent

    def resolve(p: str) -> Path:
        q = Path(p.strip())
        return q if q.is_absolute() else base / q

    if "data" not in parser:
        raise ConfigError("config has no [data] section")
    data = parser["data"]
    run = parser["run"] if "run" in parser else {}
    try:
        markets, fx = {}, {}
        for section in parser.sections():
            if section in ("run", "data"):
                continue
            sec = parser[section]
            markets[section] = resolve(sec["market"])
            fx[section] = resolve(sec["fx"])
        ngml = NgmlConfig(
            max_iter=int(run.get("max_iter", NgmlConfig.max_iter)),
            restarts=int(run.get("restarts", NgmlConfig.restarts)),
            seed=int(run.get("seed", NgmlConfig.seed)),
            df_lower_bound=float(run.get("df_min", NgmlConfig.df_lower_bound)),
        )
        criterion = run.get("criterion", "").strip().lower() or None
        lags = parse_lags(run.get("lags", "" if criterion else "2, 7, 13"))
        return RunConfig(
            confirmed=resolve(data["confirmed"]),
            deaths=resolve(data["deaths"]),
            recovered=resolve(data["recovered"]),
            overrides=resolve(data["overrides"]) if data.get("overrides", "").strip() else None,
            markets=markets,
            fx=fx,
            start=date.fromisoformat(run.get("start", "2020-03-12").strip()),
            end=date.fromisoformat(run.get("end", "2020-09-30").strip()),
            fill=run.get("fill", "forward").strip(),
            normalize=run.get("normalize", "percountry").strip(),
            lags=lags,
            criterion=criterion,
            max_lag=int(run.get("max_lag", 15)),
            reference_country=run.get("reference_country", "BR").strip(),
            sigma_divisor=run.get("sigma_divisor", "ml").strip(),
            ngml=ngml,
            horizon=int(run.get("horizon", 20)),
            band=float(run.get("band", 0.05)),
            bootstrap=int(run.get("bootstrap", 0)),
            block=int(run.get("block", 10)),
            output=resolve(run.get("output", "out")),
            source=path,
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
