import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_panel, random_panel
from oracles import brute_spearman
from rsindex.analysis import (
    LIFESTYLE_WORDS,
    CoverageError,
    InsufficientDataError,
    average_ranks,
    boom_overlay,
    city_weighted_scores,
    composite_index,
    covariate_score_correlations,
    deflate_and_normalize,
    monthly_cpi,
    panel_series,
    spearman,
    word_score_correlations,
)
from rsindex.synth import synthetic_words


def table(pc1, pc2, volume, city=None, **extra):
    n = len(pc1)
    codes = [f"R{i:03d}" for i in range(n)]
    data = {"pc1_corr": pc1, "pc2_corr": pc2, "sales_volume": volume, "city_group": city or ["C"] * n}
    data.update(extra)
    return pd.DataFrame(data, index=pd.Index(codes, name="sa2_code"))


def monthly(values, start="2000-01"):
    idx = pd.period_range(start, periods=len(values), freq="M", name="month")
    return pd.Series(np.asarray(values, dtype=float), index=idx)


# city means


def test_city_single_region():
    out = city_weighted_scores(table([0.4], [-0.2], [7]))
    assert out.loc["C", "pc1_corr"] == 0.4 and out.loc["C", "pc2_corr"] == -0.2


def test_city_weighted_mean():
    out = city_weighted_scores(table([0.0, 0.0], [0.6, 0.2], [1, 3]))
    assert out.loc["C", "pc2_corr"] == pytest.approx(0.3, abs=1e-15)


def test_city_zero_volume_warns():
    t = table([0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [0, 0, 4], city=["A", "A", "B"])
    with pytest.warns(UserWarning, match="zero total"):
        out = city_weighted_scores(t)
    assert list(out.index) == ["B"]


def test_city_missing_group_rejected():
    with pytest.raises(ValueError):
        city_weighted_scores(table([0.1], [0.1], [1], city=[""]))


def test_city_sorted_by_pc2():
    t = table([0, 0, 0], [0.1, 0.9, -0.5], [1, 1, 1], city=["A", "B", "C"])
    assert list(city_weighted_scores(t).index) == ["B", "A", "C"]


city_rows = st.lists(
    st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.integers(1, 1000), st.sampled_from("ABCD")),
    min_size=1,
    max_size=30,
)


@settings(max_examples=80, deadline=None)
@given(city_rows, st.integers(2, 50))
def test_city_means_match_brute_force(rows, c):
    t = table(*[list(col) for col in zip(*rows[:])][:3], city=[r[3] for r in rows])
    out = city_weighted_scores(t)
    for city in {r[3] for r in rows}:
        members = [r for r in rows if r[3] == city]
        tot = sum(r[2] for r in members)
        for k, col in ((0, "pc1_corr"), (1, "pc2_corr")):
            want = sum(r[k] * r[2] for r in members) / tot
            assert out.loc[city, col] == pytest.approx(want, abs=1e-12)
    scaled = t.assign(sales_volume=t["sales_volume"] * c)
    assert np.allclose(city_weighted_scores(scaled)[["pc1_corr", "pc2_corr"]], out[["pc1_corr", "pc2_corr"]], atol=1e-12)


# rank correlation


def test_spearman_examples():
    assert spearman([1, 2, 3], [1, 2, 3]) == 1.0
    assert spearman([1, 2, 3], [3, 2, 1]) == -1.0
    assert np.isnan(spearman([1, 1, 1], [1, 2, 3]))
    with pytest.raises(InsufficientDataError):
        spearman([1, 2, np.nan], [1, 2, 3])


def test_spearman_tied_fixture():
    x = [1, 2, 2, 3, 4, 4, 4, 5]
    y = [2, 1, 3, 3, 5, 4, 6, 6]
    assert np.array_equal(average_ranks(x), [1, 2.5, 2.5, 4, 6, 6, 6, 8])
    assert spearman(x, y) == pytest.approx(brute_spearman(x, y), abs=1e-12)


@settings(max_examples=100, deadline=None)
# rounding keeps cubes of distinct values distinct (no underflow)
@given(st.lists(st.tuples(st.integers(-5, 5), st.floats(-10, 10).map(lambda v: round(v, 6))), min_size=3, max_size=40))
def test_spearman_matches_brute_and_is_rank_invariant(pairs):
    x = np.array([p[0] for p in pairs], float)
    y = np.array([p[1] for p in pairs], float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        assert np.isnan(spearman(x, y))
        return
    rho = spearman(x, y)
    assert rho == pytest.approx(brute_spearman(x, y), abs=1e-12)
    assert spearman(np.exp(x), y ** 3) == pytest.approx(rho, abs=1e-12)
    assert spearman(y, x) == pytest.approx(rho, abs=1e-12)
    assert -1 <= rho <= 1


def test_covariate_equal_to_score():
    rng = np.random.default_rng(0)
    t = table(rng.normal(size=50), rng.normal(size=50), np.ones(50))
    t["cov"] = t["pc2_corr"]
    t.loc[t.index[3], "cov"] = np.nan
    out = covariate_score_correlations(t, "cov")
    assert out.loc[2, "rho"] == 1.0
    assert out.loc[2, "n"] == 49 and out.loc[2, "dropped"] == 1
    with pytest.raises(KeyError):
        covariate_score_correlations(t, "absent")


def test_covariate_independent_noise_is_weak():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        t = table(rng.normal(size=200), rng.normal(size=200), np.ones(200), cov=rng.normal(size=200))
        hits += abs(covariate_score_correlations(t, "cov").loc[2, "rho"]) < 0.2
    assert hits >= 9


# word correlations


def words_frame(codes, columns, years=(2010,)):
    rows = [(c, y, w, float(v)) for w, vals in columns.items() for y in years for c, v in zip(codes, vals)]
    return pd.DataFrame(rows, columns=["sa2_code", "year", "word", "rel_freq"])


def test_word_equal_to_score_and_constant_excluded():
    rng = np.random.default_rng(1)
    t = table(np.zeros(20), rng.uniform(0, 1, 20), np.ones(20))
    words = words_frame(t.index, {"echo": t["pc2_corr"].to_numpy(), "flat": np.full(20, 0.01)})
    out = word_score_correlations(words, t, 2, group=["echo"])
    assert out.ranking.word.tolist() == ["echo"] and out.ranking.rho[0] == 1.0
    assert out.excluded == ["flat"]
    assert out.group_series.rho.tolist() == [1.0]


def test_word_input_validation():
    t = table(np.zeros(5), np.arange(5.0), np.ones(5))
    with pytest.raises(ValueError):
        word_score_correlations(words_frame(t.index, {"w": np.full(5, 2.0)}), t, 2)
    with pytest.raises(InsufficientDataError):
        word_score_correlations(words_frame(["X", "Y"], {"w": [0.1, 0.2]}), t, 2)


def test_planted_words_rank_top_and_group_band():
    n = 1000
    rng = np.random.default_rng(7)
    codes = [f"R{i:04d}" for i in range(n)]
    score = rng.normal(size=n)
    t = pd.DataFrame({"pc2_corr": score}, index=pd.Index(codes, name="sa2_code"))
    words = synthetic_words(codes, score, range(2006, 2016), seed=3)
    out = word_score_correlations(words, t, 2)
    assert set(out.ranking.word[:10]) == set(LIFESTYLE_WORDS[:10])
    g = out.group_series.rho.to_numpy()
    assert abs(g[0] - 0.32) < 0.04 and abs(g[-1] - 0.47) < 0.04
    assert np.polyfit(np.arange(len(g)), g, 1)[0] > 0


# composite index


def composite_setup(p=6, T=24, seed=0):
    rng = np.random.default_rng(seed)
    panel = make_panel(random_panel(rng, T, p), codes=[f"R{i:03d}" for i in range(p)])
    t = table(rng.normal(size=p), rng.normal(size=p), rng.integers(1, 50, size=p).astype(float))
    return panel, t


def test_composite_single_region():
    panel, t = composite_setup()
    top = t["pc2_corr"].idxmax()
    out = composite_index(panel, t, 2, n=1)
    assert out.regions == [top]
    assert np.allclose(out.series.to_numpy(), panel_series(panel, top).to_numpy(), rtol=1e-14)


def test_composite_two_regions_average_logs():
    panel, t = composite_setup()
    t["sales_volume"] = 5.0
    out = composite_index(panel, t, 2, n=2)
    a, b = (panel.column(c) for c in out.regions)
    assert np.allclose(np.log(out.series.to_numpy()), (a + b) / 2, atol=1e-14)


def test_composite_recomputed_by_hand():
    panel, t = composite_setup(p=30, T=36, seed=2)
    out = composite_index(panel, t, 2, n=20)
    ranked = sorted(t.index, key=lambda c: (-t.loc[c, "pc2_corr"], c))[:20]
    assert out.regions == ranked
    w = t.loc[ranked, "sales_volume"].to_numpy()
    want = np.exp(sum(wi * panel.column(c) for wi, c in zip(w, ranked)) / w.sum())
    assert np.allclose(out.series.to_numpy(), want, rtol=1e-12)


def test_composite_all_regions_and_affine_score_invariance():
    panel, t = composite_setup(p=8)
    t["sales_volume"] = 1.0
    full = composite_index(panel, t, 2, n=8)
    assert np.allclose(np.log(full.series.to_numpy()), panel.F.mean(axis=1), atol=1e-14)
    base = composite_index(panel, t, 2, n=3)
    moved = composite_index(panel, t.assign(pc2_corr=3 * t["pc2_corr"] + 1), 2, n=3)
    assert moved.regions == base.regions
    assert np.array_equal(moved.series.to_numpy(), base.series.to_numpy())


def test_composite_state_filter_and_shortfall():
    panel, t = composite_setup(p=6)
    t["state"] = ["A", "B", "A", "B", "A", "A"]
    out = composite_index(panel, t, 2, n=2, state="B")
    assert sorted(out.regions) == ["R001", "R003"]
    with pytest.raises(InsufficientDataError):
        composite_index(panel, t, 2, n=3, state="B")


# deflation


def test_deflate_constant_cpi():
    s = monthly([1.0, 1.2, 1.5, 1.1])
    out = deflate_and_normalize(s, monthly([120.0] * 4), "2000-01")
    assert np.allclose(out.to_numpy(), s.to_numpy(), rtol=1e-15)


def test_deflate_doubling_cpi():
    s = monthly([1.0, 2.0, 4.0])
    out = deflate_and_normalize(s, monthly([100.0, 200.0, 400.0]), "2000-01")
    assert np.allclose(out.to_numpy(), 1.0, atol=1e-15)


def test_deflate_spot_months():
    s = monthly([2.0, 3.0, 5.0, 7.0])
    cpi = monthly([100.0, 110.0, 125.0, 140.0])
    out = deflate_and_normalize(s, cpi, "2000-02")
    base = 3.0 / 110.0
    for m, i in (("2000-01", 0), ("2000-02", 1), ("2000-04", 3)):
        assert out.loc[pd.Period(m, freq="M")] == pytest.approx(s.iloc[i] / cpi.iloc[i] / base, rel=1e-14)


def test_deflate_idempotent_under_unit_cpi():
    s = monthly([2.0, 3.0, 5.0])
    once = deflate_and_normalize(s, monthly([100.0, 104.0, 109.0]), "2000-01")
    twice = deflate_and_normalize(once, monthly([1.0, 1.0, 1.0]), "2000-01")
    assert np.allclose(once.to_numpy(), twice.to_numpy(), rtol=1e-15)


def test_deflate_coverage_errors():
    s = monthly([1.0, 2.0, 3.0])
    with pytest.raises(CoverageError, match="2000-03"):
        deflate_and_normalize(s, monthly([1.0, 1.0]), "2000-01")
    with pytest.raises(CoverageError):
        deflate_and_normalize(s, monthly([1.0] * 3), "1999-01")


def test_quarterly_cpi_interpolated():
    q = pd.Series([100.0, 103.0, 109.0], index=pd.PeriodIndex(["2000-01", "2000-04", "2000-07"], freq="M"))
    m, flag = monthly_cpi(q)
    assert flag and len(m) == 7
    assert np.allclose(m.to_numpy(), [100, 101, 102, 103, 105, 107, 109], atol=1e-12)
    same, flag2 = monthly_cpi(m)
    assert not flag2 and same.equals(m)


# overlay


def test_overlay_identical_windows():
    s = monthly(np.exp(np.linspace(0, 1, 80)))
    out = boom_overlay(s, s, "2000-07", "2000-07", 5)
    assert np.array_equal(out["a"], out["b"])
    assert out["a"].iloc[0] == 1.0 and len(out) == 61
    assert out["elapsed_years"].iloc[-1] == pytest.approx(5.0)


def test_overlay_peak_ratio():
    rng = np.random.default_rng(3)
    a = monthly(np.exp(np.cumsum(rng.normal(0.01, 0.02, 120))))
    b = monthly(np.exp(np.cumsum(rng.normal(0.005, 0.02, 120))))
    out = boom_overlay(a, b, "2001-01", "2003-06", 4)
    seg_a = a.loc[pd.Period("2001-01", freq="M"):].iloc[:49]
    assert out["a"].max() == pytest.approx(seg_a.max() / seg_a.iloc[0], rel=1e-10)


def test_overlay_truncation_warns():
    s = monthly(np.linspace(1, 2, 30))
    with pytest.warns(UserWarning, match="truncated"):
        out = boom_overlay(s, s, "2000-01", "2001-01", 5)
    assert len(out) == 18
    with pytest.raises(CoverageError):
        boom_overlay(s, s, "1990-01", "2000-01", 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        boom_overlay(s, s, "2000-01", "2000-01", 1)
