"""Command line pipeline: ``synth``, ``index``, ``pca`` and ``analyze``.

Settings come from built-in defaults, then an optional JSON ``--config``
file, then command line flags (flags win). Every output file is written
atomically and gets a ``<name>.meta.json`` sidecar holding a hash of the
resolved configuration, in which input paths are replaced by content digests
so that identical inputs give identical hashes wherever they live.

Exit codes: 0 success, 1 computation error, 2 input or configuration error.
Errors are reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .analysis import (
    LIFESTYLE_WORDS,
    CoverageError,
    boom_overlay,
    city_weighted_scores,
    composite_index,
    covariate_score_correlations,
    deflate_and_normalize,
    monthly_cpi,
    panel_series,
    score_col,
    word_score_correlations,
)
from .graph import adjacency_laplacian, read_edges
from .ingest import InputError, TimeGrid, pair_repeat_sales, read_sales, sales_volume
from .panel import IndexPanel
from .pca import fit_pca, region_scores, trends_csv, truncate_smooth, variance_json
from .solver import DEFAULT_GAMMA_GRID, ConfigurationError, PenaltyConfig, fit_panel
from .synth import SyntheticSpec, generate, sales_csv, synthetic_cpi, synthetic_words

ANALYZE_TASKS = ("city-means", "covariate-corr", "word-corr", "composite", "overlay", "deflate")
INPUT_FIELDS = ("sales", "adjacency", "cpi", "covariates", "words", "regions", "panel", "scores", "series")


class ConfigError(ValueError):
    """Invalid configuration or missing input file (exit code 2)."""


@dataclass
class PipelineConfig:
    """Resolved settings of one CLI invocation."""

    command: str = ""
    task: str | None = None
    sales: str | None = None
    adjacency: str | None = None
    cpi: str | None = None
    covariates: str | None = None
    words: str | None = None
    regions: str | None = None
    panel: str | None = None
    scores: str | None = None
    series: str | None = None
    window: str | None = None
    volume_window: str | None = None
    gamma_st_grid: list[float] = field(default_factory=lambda: list(DEFAULT_GAMMA_GRID))
    gamma_t_grid: list[float] = field(default_factory=lambda: list(DEFAULT_GAMMA_GRID))
    global_gammas: bool = False
    anchor_policy: str = "first-month-centered"
    folds: int = 5
    components: int = 3
    truncate: bool = False
    jobs: int = 1
    out: str = "."
    seed: int = 0
    pc: int | None = None
    covariate: str | None = None
    word_group: list[str] = field(default_factory=lambda: list(LIFESTYLE_WORDS))
    top_n: int = 20
    state: str | None = None
    region: str | None = None
    base_month: str | None = None
    start_a: str | None = None
    start_b: str | None = None
    horizon: float = 5.0
    n_regions: int = 50
    n_months: int = 120
    start_month: str = "2000-01"
    regions_per_batch: int = 25
    noise_sd: float = 0.05
    intensity: float = 3.0

    def require(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"{self.command}: --{name.replace('_', '-')} is required")
            if name in INPUT_FIELDS and not Path(value).is_file():
                raise ConfigError(f"input file not found: {value}")

    def validate(self) -> None:
        for name in INPUT_FIELDS:
            value = getattr(self, name)
            if value is not None and not Path(value).is_file():
                raise ConfigError(f"input file not found: {value}")
        for name in ("window", "volume_window"):
            if getattr(self, name) is not None:
                parse_window(getattr(self, name))
        if self.folds < 2:
            raise ConfigError(f"--folds must be at least 2, got {self.folds}")
        if self.components < 1:
            raise ConfigError(f"--components must be positive, got {self.components}")
        if self.jobs < 1:
            raise ConfigError(f"--jobs must be positive, got {self.jobs}")
        if not self.gamma_st_grid or not self.gamma_t_grid:
            raise ConfigError("gamma grids must be non-empty")

    def digest(self) -> str:
        """Hash of the settings that influence outputs."""
        body = dataclasses.asdict(self)
        for name in ("out", "jobs"):
            body.pop(name)
        for name in INPUT_FIELDS:
            if body[name] is not None:
                body[name] = "sha256:" + hashlib.sha256(Path(body[name]).read_bytes()).hexdigest()
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def parse_window(text: str) -> TimeGrid:
    """``YYYY-MM:YYYY-MM`` to a :class:`TimeGrid`."""
    try:
        first, last = text.split(":")
        return TimeGrid.from_window(first.strip(), last.strip())
    except (ValueError, InputError) as exc:
        raise ConfigError(f"invalid window {text!r}; expected YYYY-MM:YYYY-MM ({exc})") from exc


def _float_list(value) -> list[float]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid number list {value!r}") from exc


def _str_list(value) -> list[str]:
    if isinstance(value, str):
        value = value.split(",")
    return [str(v).strip() for v in value if str(v).strip()]


_CONVERTERS = {
    "gamma_st_grid": _float_list,
    "gamma_t_grid": _float_list,
    "word_group": _str_list,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=None)
    add = common.add_argument
    add("--config", help="JSON file of settings; keys are flag names with '_' for '-'")
    add("--out", help="output directory")
    add("--seed", type=int)
    add("--jobs", type=int, help="parallel batch solves")
    add("--sales", help="sales CSV")
    add("--adjacency", help="adjacency CSV sa2_code_a,sa2_code_b")
    add("--regions", help="region CSV sa2_code[,sa4_code,city_group,state]")
    add("--cpi", help="CPI CSV month,cpi")
    add("--covariates", help="covariates CSV sa2_code,covariate_name,value")
    add("--words", help="word panel CSV sa2_code,year,word,rel_freq")
    add("--panel", help="index panel CSV")
    add("--scores", help="scores CSV")
    add("--series", help="single index series CSV month,value")
    add("--window", help="index window YYYY-MM:YYYY-MM")
    add("--volume-window", help="sub-window for sales volume weights")
    add("--gamma-st-grid", help="comma separated spatial gammas")
    add("--gamma-t-grid", help="comma separated temporal gammas")
    add("--global-gammas", action="store_true", default=None, help="tune gammas once on pooled batches")
    add("--anchor-policy", choices=("first-month", "first-month-centered"))
    add("--folds", type=int)
    add("--components", type=int, help="retained principal components K")
    add("--truncate", action="store_true", default=None, help="also write the K-component panel")
    add("--pc", type=int, help="principal component used for ranking")
    add("--covariate", help="covariate or score column name")
    add("--word-group", help="comma separated word group")
    add("--top-n", type=int)
    add("--state")
    add("--region", help="region column of --panel used as the series")
    add("--base-month")
    add("--start-a")
    add("--start-b")
    add("--horizon", type=float, help="overlay horizon in years")
    add("--n-regions", type=int)
    add("--n-months", type=int)
    add("--start-month")
    add("--regions-per-batch", type=int)
    add("--noise-sd", type=float)
    add("--intensity", type=float)

    parser = _Parser(prog="rsindex", description="Regularised repeat-sales indexes and their principal components.")
    parser.add_argument("--version", action="version", version=f"rsindex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("synth", parents=[common], help="write a synthetic market")
    sub.add_parser("index", parents=[common], help="estimate the regional index panel")
    sub.add_parser("pca", parents=[common], help="principal components of a panel")
    ana = sub.add_parser("analyze", parents=[common], help="downstream analyses")
    ana.add_argument("task", choices=ANALYZE_TASKS)
    return parser


def resolve_config(argv) -> PipelineConfig:
    args = vars(build_parser().parse_args(argv))
    settings: dict = {}
    if args.get("config"):
        path = args["config"]
        try:
            with open(path, encoding="utf-8") as fh:
                settings = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(settings, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
    settings = {k.replace("-", "_"): v for k, v in settings.items()}
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(settings) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for key, value in args.items():
        if key != "config" and value is not None:
            settings[key] = value
    for key, conv in _CONVERTERS.items():
        if key in settings:
            settings[key] = conv(settings[key])
    cfg = PipelineConfig(**settings)
    if cfg.command == "pca" and cfg.panel is None:
        cfg.panel = str(Path(cfg.out) / "panel.csv")
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- output helpers


class OutputWriter:
    """Atomic file writes into ``out`` with per-file metadata sidecars."""

    def __init__(self, cfg: PipelineConfig):
        self.dir = Path(cfg.out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.base = {"command": cfg.command, "task": cfg.task, "config_hash": cfg.digest(), "version": __version__}
        self.written: list[Path] = []

    def _atomic(self, path: Path, text: str) -> None:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def write(self, name: str, text: str, **meta) -> Path:
        path = self.dir / name
        self._atomic(path, text)
        sidecar = {**self.base, "file": name, "sha256": hashlib.sha256(text.encode()).hexdigest(), **meta}
        self._atomic(path.with_name(name + ".meta.json"), dump_json(sidecar))
        self.written.append(path)
        return path


def dump_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def frame_csv(df: pd.DataFrame, index: bool = True) -> str:
    buf = io.StringIO()
    df.to_csv(buf, index=index, lineterminator="\n", float_format=lambda v: repr(float(v)))
    return buf.getvalue()


# ---------------------------------------------------------------- readers


def _read_csv(path, required) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype={"sa2_code": str, "sa4_code": str, "city_group": str, "state": str, "word": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    missing = [c for c in required if c not in df.columns]
    if missing:
        raise InputError(f"{path}: missing columns {missing}")
    return df


def read_regions(path) -> pd.DataFrame:
    df = _read_csv(path, ["sa2_code"])
    if df["sa2_code"].duplicated().any():
        raise InputError(f"{path}: duplicate sa2_code rows")
    return df.set_index("sa2_code")


def read_scores(path) -> pd.DataFrame:
    df = _read_csv(path, ["sa2_code", score_col(1)])
    return df.set_index("sa2_code")


def read_cpi(path) -> pd.Series:
    df = _read_csv(path, ["month", "cpi"])
    try:
        idx = pd.PeriodIndex(df["month"].astype(str), freq="M", name="month")
    except (ValueError, TypeError) as exc:
        raise InputError(f"{path}: unparseable CPI month: {exc}") from exc
    if idx.duplicated().any():
        raise InputError(f"{path}: duplicate CPI months")
    return pd.Series(df["cpi"].to_numpy(dtype=float), index=idx, name="cpi")


def read_series(path) -> pd.Series:
    df = _read_csv(path, ["month"])
    if df.shape[1] != 2:
        raise InputError(f"{path}: series CSV needs exactly one value column after 'month'")
    idx = pd.PeriodIndex(df["month"].astype(str), freq="M", name="month")
    return pd.Series(df.iloc[:, 1].to_numpy(dtype=float), index=idx, name=df.columns[1])


def _volume(cfg: PipelineConfig) -> pd.Series:
    grid = parse_window(cfg.volume_window or cfg.window) if (cfg.volume_window or cfg.window) else None
    records = read_sales(cfg.sales, grid=grid).records
    vol = sales_volume(records)
    return pd.Series(vol, name="sales_volume", dtype=float)


def score_table(cfg: PipelineConfig) -> pd.DataFrame:
    """Scores joined with region metadata, sales volume and covariates."""
    table = read_scores(cfg.scores)
    if cfg.regions:
        meta = read_regions(cfg.regions)
        table = table.join(meta[[c for c in ("city_group", "state") if c in meta.columns]], how="left")
    if cfg.sales:
        table["sales_volume"] = _volume(cfg).reindex(table.index).fillna(0.0)
    if cfg.covariates:
        cov = _read_csv(cfg.covariates, ["sa2_code", "covariate_name", "value"])
        wide = cov.pivot_table(index="sa2_code", columns="covariate_name", values="value", aggfunc="mean")
        table = table.join(wide, how="left")
    return table


def _series(cfg: PipelineConfig) -> pd.Series:
    if cfg.series:
        return read_series(cfg.series)
    cfg.require("panel", "region")
    panel = IndexPanel.read(cfg.panel)
    if cfg.region not in panel.region_codes:
        raise ConfigError(f"region {cfg.region!r} not in panel {cfg.panel}")
    return panel_series(panel, cfg.region)


# ---------------------------------------------------------------- commands


def cmd_synth(cfg: PipelineConfig, out: OutputWriter) -> None:
    spec = SyntheticSpec(
        n_regions=cfg.n_regions,
        n_months=cfg.n_months,
        start_month=cfg.start_month,
        regions_per_batch=cfg.regions_per_batch,
        noise_sd=cfg.noise_sd,
        intensity=cfg.intensity,
        seed=cfg.seed,
    )
    try:
        spec.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    m = generate(spec)
    grid = m.truth.grid
    codes = m.region_codes
    out.write("sales.csv", sales_csv(m.records), n_records=len(m.records))
    out.write("adjacency.csv", "sa2_code_a,sa2_code_b\n" + "".join(f"{a},{b}\n" for a, b in m.edges))
    regions = m.metadata.assign(sa4_code=[m.parent_of[c] for c in codes])[["sa4_code", "city_group", "state"]]
    out.write("regions.csv", frame_csv(regions))
    out.write("truth_panel.csv", m.truth.to_csv())
    loadings = pd.DataFrame(m.loadings, index=pd.Index(codes, name="sa2_code"),
                            columns=["national", "mining", "lifestyle"][: m.loadings.shape[1]])
    out.write("truth_loadings.csv", frame_csv(loadings),
              mining_regions=m.mining_regions, lifestyle_regions=m.lifestyle_regions)
    share = m.mining_share(cfg.seed)
    cov = pd.DataFrame({"sa2_code": codes, "covariate_name": "mining_share", "value": share.to_numpy()})
    out.write("covariates.csv", frame_csv(cov, index=False))
    lifestyle = m.loadings[:, 2] if m.loadings.shape[1] > 2 else np.zeros(len(codes))
    years = range(grid.start_month.year, grid.month(grid.T - 1).year + 1)
    words = synthetic_words(codes, lifestyle, years, seed=cfg.seed)
    out.write("words.csv", frame_csv(words, index=False), planted_words=list(LIFESTYLE_WORDS[:10]))
    cpi = synthetic_cpi(grid, seed=cfg.seed)
    out.write("cpi.csv", frame_csv(cpi.rename(index=str).to_frame()))


def cmd_index(cfg: PipelineConfig, out: OutputWriter) -> None:
    cfg.require("sales", "adjacency")
    grid = parse_window(cfg.window) if cfg.window else None
    parsed = read_sales(cfg.sales, grid=grid)
    if not parsed.records:
        raise InputError(f"{cfg.sales}: no valid sales records")
    if grid is None:
        first = min(r.sale_date for r in parsed.records)
        last = max(r.sale_date for r in parsed.records)
        grid = TimeGrid.from_window(f"{first:%Y-%m}", f"{last:%Y-%m}")

    parent_of: dict[str, str] = {}
    for rec in parsed.records:
        parent_of.setdefault(rec.region_code, rec.parent_region_code)
    if cfg.regions:
        meta = read_regions(cfg.regions)
        universe = list(meta.index)
        if "sa4_code" in meta.columns:
            parent_of.update({c: p for c, p in meta["sa4_code"].items() if isinstance(p, str)})
    else:
        universe = sorted(parent_of)
    no_parent = [c for c in universe if c not in parent_of]
    if no_parent:
        raise InputError(f"regions without a parent region code: {no_parent[:10]}")
    inside = set(universe)
    records = [r for r in parsed.records if r.region_code in inside]

    try:
        edges = read_edges(cfg.adjacency)
        kept = [e for e in edges if e[0] in inside and e[1] in inside]
        graph = adjacency_laplacian(kept, universe)
    except (OSError, ValueError) as exc:
        raise InputError(f"{cfg.adjacency}: {exc}") from exc

    pairing = pair_repeat_sales(records, grid, universe)
    config = PenaltyConfig(anchor_policy=cfg.anchor_policy)
    panel, fits = fit_panel(
        pairing.pairs, universe, parent_of, graph, grid, config,
        cfg.gamma_st_grid, cfg.gamma_t_grid, cfg.folds, cfg.jobs, cfg.seed, cfg.global_gammas,
    )
    out.write("panel.csv", panel.to_csv(), window=f"{grid.labels()[0]}:{grid.labels()[-1]}", anchor_month=grid.labels()[0])
    out.write("rejects.csv", parsed.rejects_csv(), n_rejects=len(parsed.rejects))
    diagnostics = {
        "window": [grid.labels()[0], grid.labels()[-1]],
        "n_records": len(parsed.records),
        "n_rejects": len(parsed.rejects),
        "records_outside_universe": len(parsed.records) - len(records),
        "edges_outside_universe": len(edges) - len(kept),
        "n_properties": pairing.n_properties,
        "n_pairs": len(pairing.pairs),
        "dropped_same_month": pairing.dropped_same_month,
        "dropped_region_change": pairing.dropped_region_change,
        "global_gammas": cfg.global_gammas,
        "batches": [f.diagnostics() for f in fits],
    }
    out.write("diagnostics.json", dump_json(diagnostics))


def cmd_pca(cfg: PipelineConfig, out: OutputWriter) -> None:
    cfg.require("panel")
    panel = IndexPanel.read(cfg.panel)
    K = cfg.components
    if K > panel.p:
        raise ConfigError(f"--components {K} exceeds the panel's {panel.p} regions")
    decomp = fit_pca(panel)
    out.write("trends.csv", trends_csv(panel, decomp, K), components=K)
    scores = region_scores(panel, decomp, K)
    out.write("scores.csv", scores.to_csv(), components=K, score="pearson correlation of log index with trend")
    out.write("variance.json", variance_json(decomp) + "\n")
    if cfg.truncate:
        out.write("truncated_panel.csv", truncate_smooth(panel, decomp, K).to_csv(), components=K)


def cmd_analyze(cfg: PipelineConfig, out: OutputWriter) -> None:
    task = cfg.task
    if task == "city-means":
        cfg.require("scores", "regions", "sales")
        table = score_table(cfg)
        if "city_group" not in table.columns:
            raise InputError(f"{cfg.regions}: no city_group column")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            means = city_weighted_scores(table)
        out.write("city_means.csv", frame_csv(means), weights="sales volume",
                  volume_window=cfg.volume_window or cfg.window or "all sales",
                  excluded=[str(w.message) for w in caught])
    elif task == "covariate-corr":
        cfg.require("scores")
        table = score_table(cfg)
        names = [cfg.covariate] if cfg.covariate else []
        if not names:
            cfg.require("covariates")
            cov = _read_csv(cfg.covariates, ["covariate_name"])
            names = sorted(cov["covariate_name"].astype(str).unique())
        frames = []
        for name in names:
            if name not in table.columns:
                raise ConfigError(f"covariate {name!r} not found")
            frames.append(covariate_score_correlations(table, name).reset_index().assign(covariate=name))
        res = pd.concat(frames)[["covariate", "pc", "rho", "n", "dropped"]]
        out.write("covariate_corr.csv", frame_csv(res, index=False), method="spearman")
    elif task == "word-corr":
        cfg.require("scores", "words")
        pc = cfg.pc or 3
        table = read_scores(cfg.scores)
        if score_col(pc) not in table.columns:
            raise ConfigError(f"scores file has no {score_col(pc)} column")
        words = _read_csv(cfg.words, ["sa2_code", "year", "word", "rel_freq"])
        res = word_score_correlations(words, table, pc, cfg.word_group)
        out.write("word_ranking.csv", frame_csv(res.ranking, index=False), pc=pc, method="spearman",
                  excluded_constant=res.excluded)
        out.write("word_group_series.csv", frame_csv(res.group_series, index=False), pc=pc,
                  word_group=list(cfg.word_group))
    elif task == "composite":
        cfg.require("panel", "scores")
        pc = cfg.pc or 3
        panel = IndexPanel.read(cfg.panel)
        table = score_table(cfg)
        if cfg.state is not None and "state" not in table.columns:
            raise ConfigError("--state needs a --regions file with a state column")
        comp = composite_index(panel, table, pc, cfg.top_n, cfg.state)
        series = comp.series.rename(index=str)
        series.index.name = "month"
        out.write("composite.csv", frame_csv(series.to_frame()), pc=pc, top_n=cfg.top_n, state=cfg.state,
                  regions=comp.regions, weights=[float(w) for w in comp.weights],
                  weights_policy="sales volume" if "sales_volume" in table.columns else "equal")
    elif task == "deflate":
        cfg.require("cpi")
        series = _series(cfg)
        cpi, interpolated = monthly_cpi(read_cpi(cfg.cpi))
        base = cfg.base_month or str(series.index[0])
        real = deflate_and_normalize(series, cpi, base).rename("real_index").rename(index=str)
        real.index.name = "month"
        out.write("deflated.csv", frame_csv(real.to_frame()), base_month=base, cpi_interpolated=interpolated)
    elif task == "overlay":
        series = _series(cfg)
        if cfg.start_a is None or cfg.start_b is None:
            raise ConfigError("overlay needs --start-a and --start-b")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ov = boom_overlay(series, series, cfg.start_a, cfg.start_b, cfg.horizon)
        out.write("overlay.csv", frame_csv(ov, index=False), start_a=cfg.start_a, start_b=cfg.start_b,
                  horizon_years=cfg.horizon, warnings=[str(w.message) for w in caught])
    else:  # pragma: no cover - argparse restricts the choices
        raise ConfigError(f"unknown analyze task {task!r}")


COMMANDS = {"synth": cmd_synth, "index": cmd_index, "pca": cmd_pca, "analyze": cmd_analyze}
INPUT_ERRORS = (ConfigError, InputError, ConfigurationError, CoverageError, KeyError, FileNotFoundError)


def _report(exc: BaseException, code: int) -> int:
    msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(msg), "exit_code": code}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        out = OutputWriter(cfg)
        COMMANDS[cfg.command](cfg, out)
    except INPUT_ERRORS as exc:
        return _report(exc, 2)
    except Exception as exc:  # noqa: BLE001 - every other failure is a computation error
        return _report(exc, 1)
    for path in out.written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
