"""Downstream analyses on region scores and index series.

Region-level inputs are pandas DataFrames indexed by ``sa2_code`` with score
columns ``pc1_corr, pc2_corr, ...`` and optional ``sales_volume``,
``city_group``, ``state`` and covariate columns. Time series are pandas
Series on a monthly ``PeriodIndex``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .panel import IndexPanel
from .pca import ScoreTable

LIFESTYLE_WORDS = (
    "holiday", "little", "view", "acre", "coastal", "package", "sea", "value", "neat", "rural",
    "affordable", "ocean", "cottage", "country", "pin", "close", "beach", "gem", "life", "paradise",
)


class InsufficientDataError(ValueError):
    pass


class CoverageError(ValueError):
    pass


def score_col(pc: int) -> str:
    return f"pc{pc}_corr"


def score_frame(scores: ScoreTable, metadata: pd.DataFrame | None = None, covariates: pd.DataFrame | None = None) -> pd.DataFrame:
    """Join PCA scores with region metadata and long-format covariates.

    ``covariates`` has columns ``sa2_code, covariate_name, value`` and is
    pivoted to one column per covariate.
    """
    df = pd.DataFrame(
        scores.corr, index=pd.Index(scores.region_codes, name="sa2_code"),
        columns=[score_col(k + 1) for k in range(scores.K)],
    )
    for k in range(scores.K):
        df[f"pc{k + 1}_weight"] = scores.weight[:, k]
    if metadata is not None:
        df = df.join(metadata, how="left")
    if covariates is not None and len(covariates):
        wide = covariates.pivot_table(index="sa2_code", columns="covariate_name", values="value", aggfunc="mean")
        df = df.join(wide, how="left")
    return df


def _pcs(table: pd.DataFrame) -> list[int]:
    out = []
    k = 1
    while score_col(k) in table.columns:
        out.append(k)
        k += 1
    return out


def city_weighted_scores(table: pd.DataFrame, volume: str = "sales_volume", group: str = "city_group") -> pd.DataFrame:
    """Sales-volume weighted mean score per city group, sorted by PC 2 descending.

    Groups whose total volume is zero are dropped with a warning.
    """
    pcs = _pcs(table)
    if not pcs:
        raise ValueError("table has no pcN_corr columns")
    missing = table[group].isna() | (table[group].astype(str).str.strip() == "")
    if missing.any():
        raise ValueError(f"regions without a city group: {list(table.index[missing])}")
    if table[volume].isna().any() or (table[volume] < 0).any():
        raise ValueError("sales volumes must be present and non-negative")
    rows = {}
    for city, sub in table.groupby(group, sort=True):
        w = sub[volume].to_numpy(dtype=float)
        if w.sum() == 0:
            warnings.warn(f"city group {city!r} has zero total sales volume; excluded")
            continue
        rows[city] = {score_col(k): float(np.dot(sub[score_col(k)], w) / w.sum()) for k in pcs}
        rows[city]["total_volume"] = float(w.sum())
    out = pd.DataFrame.from_dict(rows, orient="index")
    out.index.name = group
    sort_pc = score_col(2) if 2 in pcs else score_col(1)
    return out.sort_values([sort_pc], ascending=False, kind="mergesort")


def complete_pairs(x, y) -> tuple[np.ndarray, np.ndarray, int]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    ok = np.isfinite(x) & np.isfinite(y)
    return x[ok], y[ok], int((~ok).sum())


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(len(x))
    starts = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1]])
    ends = np.r_[starts[1:], len(x)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + e + 1) / 2.0
    return ranks


def spearman(x, y) -> float:
    """Spearman's rho with average ranks for ties; incomplete pairs are dropped.

    Returns NaN if either ranked vector is constant.
    """
    x, y, _ = complete_pairs(x, y)
    if len(x) < 3:
        raise InsufficientDataError(f"need at least 3 complete pairs, got {len(x)}")
    rx = average_ranks(x)
    ry = average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    den = np.sqrt((rx @ rx) * (ry @ ry))
    if den == 0:
        return float("nan")
    return float(np.clip((rx @ ry) / den, -1.0, 1.0))


def covariate_score_correlations(table: pd.DataFrame, covariate: str) -> pd.DataFrame:
    """Spearman rho between ``covariate`` and each PC score across all regions."""
    if covariate not in table.columns:
        raise KeyError(f"covariate {covariate!r} not in table")
    rows = []
    for k in _pcs(table):
        x, y, dropped = complete_pairs(table[covariate], table[score_col(k)])
        rows.append({"pc": k, "rho": spearman(x, y), "n": len(x), "dropped": dropped})
    return pd.DataFrame(rows).set_index("pc")


@dataclass
class WordCorrelations:
    ranking: pd.DataFrame
    excluded: list[str]
    group_series: pd.DataFrame


def word_score_correlations(
    words: pd.DataFrame,
    table: pd.DataFrame,
    pc: int,
    group: Sequence[str] = LIFESTYLE_WORDS,
) -> WordCorrelations:
    """Rank words by spatial Spearman correlation with a PC score.

    ``words`` is long format ``sa2_code, year, word, rel_freq``. A region's
    frequency for a word is its mean over the available years. The group
    series gives, per year, the correlation between each region's mean
    frequency over ``group`` and the score.
    """
    if words.empty:
        raise ValueError("word panel is empty")
    if ((words["rel_freq"] < 0) | (words["rel_freq"] > 1)).any():
        raise ValueError("relative word frequencies must lie in [0, 1]")
    score = table[score_col(pc)]
    common = sorted(set(words["sa2_code"]) & set(score.index))
    if len(common) < 3:
        raise InsufficientDataError(f"only {len(common)} regions shared between word panel and scores")
    words = words[words["sa2_code"].isin(common)]

    per_region = words.groupby(["word", "sa2_code"])["rel_freq"].mean().unstack("sa2_code").reindex(columns=common)
    rows, excluded = [], []
    s = score.reindex(common).to_numpy()
    for word, freq in per_region.iterrows():
        f = freq.to_numpy()
        finite = f[np.isfinite(f)]
        if finite.size == 0 or np.ptp(finite) == 0:
            excluded.append(word)
            continue
        x, y, _ = complete_pairs(f, s)
        if len(x) < 3:
            excluded.append(word)
            continue
        rows.append({"word": word, "rho": spearman(x, y), "n": len(x)})
    ranking = pd.DataFrame(rows, columns=["word", "rho", "n"])
    ranking = ranking.sort_values(["rho", "word"], ascending=[False, True], kind="mergesort").reset_index(drop=True)

    series = []
    grp = words[words["word"].isin(group)]
    for year, sub in grp.groupby("year", sort=True):
        freq = sub.groupby("sa2_code")["rel_freq"].mean().reindex(common).to_numpy()
        x, y, _ = complete_pairs(freq, s)
        rho = spearman(x, y) if len(x) >= 3 else float("nan")
        series.append({"year": year, "rho": rho, "n": len(x)})
    return WordCorrelations(ranking, sorted(excluded), pd.DataFrame(series, columns=["year", "rho", "n"]))


def panel_series(panel: IndexPanel, code: str | None = None) -> pd.Series | pd.DataFrame:
    """Index levels of one region (or all regions) on a monthly PeriodIndex."""
    idx = pd.PeriodIndex(panel.grid.labels(), freq="M", name="month")
    levels = pd.DataFrame(panel.levels(), index=idx, columns=panel.region_codes)
    return levels if code is None else levels[code]


@dataclass
class CompositeIndex:
    series: pd.Series
    regions: list[str]
    weights: np.ndarray


def composite_index(
    panel: IndexPanel,
    table: pd.DataFrame,
    pc: int,
    n: int = 20,
    state: str | None = None,
    volume: str = "sales_volume",
) -> CompositeIndex:
    """Volume-weighted mean log index of the ``n`` top-scoring regions, exponentiated.

    Regions are ranked by the PC score (descending, region code breaks ties)
    after optional filtering on the ``state`` column.
    """
    cand = table[table.index.isin(panel.region_codes)]
    if state is not None:
        cand = cand[cand["state"] == state]
    if len(cand) < n:
        raise InsufficientDataError(f"composite needs {n} regions, only {len(cand)} available")
    ranked = cand.assign(_code=cand.index).sort_values(
        [score_col(pc), "_code"], ascending=[False, True], kind="mergesort"
    )
    chosen = list(ranked.index[:n])
    w = ranked[volume].to_numpy(dtype=float)[:n] if volume in ranked.columns else np.ones(n)
    if w.sum() <= 0:
        raise ValueError("selected regions have zero total sales volume")
    cols = [panel.region_codes.index(c) for c in chosen]
    log_idx = panel.F[:, cols] @ (w / w.sum())
    idx = pd.PeriodIndex(panel.grid.labels(), freq="M", name="month")
    return CompositeIndex(pd.Series(np.exp(log_idx), index=idx, name=f"pc{pc}_top{n}"), chosen, w)


def monthly_cpi(cpi: pd.Series) -> tuple[pd.Series, bool]:
    """Monthly CPI from monthly or quarterly input.

    Quarterly input (gaps between observations) is linearly interpolated;
    the flag reports whether that happened.
    """
    cpi = cpi.sort_index()
    if (cpi <= 0).any():
        raise ValueError("CPI levels must be positive")
    full = pd.period_range(cpi.index.min(), cpi.index.max(), freq="M")
    if len(full) == len(cpi):
        return cpi, False
    out = cpi.reindex(full).interpolate(method="linear")
    out.index.name = cpi.index.name
    return out, True


def deflate_and_normalize(series: pd.Series, cpi: pd.Series, base_month) -> pd.Series:
    """Real index ``series / cpi`` rescaled to 1 at ``base_month``."""
    base = pd.Period(base_month, freq="M")
    if base not in series.index:
        raise CoverageError(f"base month {base} outside series span")
    aligned = cpi.reindex(series.index)
    if aligned.isna().any():
        gaps = [str(m) for m in aligned.index[aligned.isna()]]
        raise CoverageError(f"CPI missing for months {gaps[:5]}{'...' if len(gaps) > 5 else ''}")
    real = series / aligned
    return real / real.loc[base]


def boom_overlay(
    series_a: pd.Series,
    series_b: pd.Series,
    start_a,
    start_b,
    horizon_years: float,
) -> pd.DataFrame:
    """Two segments rebased to 1 at their starts, aligned on elapsed years.

    A horizon longer than either segment's data is cut to the common available
    length with a warning.
    """
    sa = pd.Period(start_a, freq="M")
    sb = pd.Period(start_b, freq="M")
    for s, ser, name in ((sa, series_a, "a"), (sb, series_b, "b")):
        if s not in ser.index:
            raise CoverageError(f"start month {s} outside series {name}")
    n = int(round(horizon_years * 12)) + 1
    seg_a = series_a.loc[sa:].iloc[:n]
    seg_b = series_b.loc[sb:].iloc[:n]
    m = min(len(seg_a), len(seg_b))
    if m < n:
        warnings.warn(f"overlay horizon truncated from {n} to {m} months")
    a = seg_a.to_numpy()[:m] / seg_a.iloc[0]
    b = seg_b.to_numpy()[:m] / seg_b.iloc[0]
    return pd.DataFrame({"elapsed_years": np.arange(m) / 12.0, "a": a, "b": b})
