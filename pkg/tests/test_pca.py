import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import make_panel, random_panel
from oracles import principal_angles_deg
from rsindex.pca import (
    PcaDecomposition,
    explained_variance,
    fit_pca,
    region_scores,
    trends_csv,
    truncate_smooth,
    variance_json,
)
from rsindex.synth import SyntheticSpec, factor_panel, generate


def test_rank_one_panel():
    z = np.linspace(0, 1, 10)
    d = fit_pca(np.column_stack([z, z, z]))
    shares = explained_variance(d)
    assert shares[0] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(d.eigenvalues[1:], 0, atol=1e-12)
    assert np.allclose(shares[1:], 0, atol=1e-12)


def test_shares_arithmetic():
    # orthogonal columns with squared norms 3 and 1 give eigenvalues (3, 1)
    F = np.zeros((4, 2))
    F[1, 0] = np.sqrt(3)
    F[2, 1] = 1.0
    assert np.allclose(explained_variance(fit_pca(F)), [0.75, 0.25], atol=1e-14)


def test_two_factor_span():
    rng = np.random.default_rng(0)
    T, p = 40, 6
    f = np.linalg.qr(rng.normal(size=(T, 2)))[0] * [3.0, 1.0]
    loadings = rng.normal(size=(p, 2))
    d = fit_pca(f @ loadings.T)
    assert principal_angles_deg(f, d.Z[:, :2]).max() < 1e-6


def test_eigenpairs_match_dense_solver():
    rng = np.random.default_rng(1)
    F = rng.normal(size=(8, 5))
    d = fit_pca(F)
    lam, V = np.linalg.eigh(F.T @ F)
    lam, V = lam[::-1], V[:, ::-1]
    assert np.allclose(d.eigenvalues, lam, atol=1e-9)
    for k in range(5):
        assert abs(abs(V[:, k] @ d.loadings[:, k]) - 1) <= 1e-9


def test_dual_path_matches_primal():
    rng = np.random.default_rng(2)
    F = rng.normal(size=(6, 15))
    d = fit_pca(F)
    lam = np.sort(np.linalg.eigvalsh(F.T @ F))[::-1]
    assert np.allclose(d.eigenvalues, np.clip(lam, 0, None), atol=1e-9)
    assert np.allclose(d.loadings.T @ d.loadings, np.eye(15), atol=1e-9)
    assert np.allclose(d.Z @ d.loadings.T, F, atol=1e-9)
    for k in range(6):
        assert np.allclose(F.T @ F @ d.loadings[:, k], d.eigenvalues[k] * d.loadings[:, k], atol=1e-8)


def test_first_share_matches_construction():
    shares = [0.92, 0.03, 0.015] + [0.035 / 7] * 7
    F, _ = factor_panel(60, 30, shares, seed=4)
    assert explained_variance(fit_pca(F))[0] == pytest.approx(0.92, abs=0.02)


def test_self_correlation_and_orthogonal_region():
    rng = np.random.default_rng(3)
    d = fit_pca(random_panel(rng, 30, 4))
    z1, z2 = d.Z[:, 0], d.Z[:, 1]
    fixed = PcaDecomposition(np.column_stack([z1, z2]), d.eigenvalues[:2], np.eye(2))
    # a region whose series is trend 1 itself
    same = region_scores(make_panel(np.column_stack([z1, z1])), fixed, 2)
    assert same.corr[0, 0] == pytest.approx(1.0, abs=1e-12)
    # a region orthogonal to centred trend 2
    z2c = z2 - z2.mean()
    v = rng.normal(size=z1.size)
    v -= v.mean()
    v -= (v @ z2c) / (z2c @ z2c) * z2c
    orth = region_scores(make_panel(np.column_stack([v - v[0], z1])), fixed, 2)
    assert abs(orth.corr[0, 1]) <= 1e-12
    assert np.all(np.abs(orth.corr) <= 1)


def test_zero_variance_region_flagged():
    rng = np.random.default_rng(4)
    F = random_panel(rng, 20, 3)
    F[:, 1] = 0.0
    sc = region_scores(make_panel(F), fit_pca(F), 2)
    assert sc.zero_variance.tolist() == [False, True, False]
    assert np.all(sc.corr[1] == 0)


def test_truncation_limits():
    rng = np.random.default_rng(5)
    F = random_panel(rng, 12, 6)
    panel = make_panel(F)
    d = fit_pca(panel)
    assert np.abs(truncate_smooth(panel, d, 6).F - F).max() <= 1e-9
    z = np.linspace(0, 2, 12)
    R = np.outer(z, [1.0, 2.0, -0.5])
    rp = make_panel(R)
    assert np.abs(truncate_smooth(rp, fit_pca(rp), 1).F - R).max() <= 1e-12
    with pytest.raises(ValueError):
        truncate_smooth(panel, d, 0)
    with pytest.raises(ValueError):
        region_scores(panel, d, 7)


def test_energy_identity_12x6():
    rng = np.random.default_rng(6)
    F = rng.normal(size=(12, 6))
    panel = make_panel(F)
    d = fit_pca(panel)
    for K in range(1, 7):
        resid = np.sum((F - truncate_smooth(panel, d, K).F) ** 2)
        assert resid == pytest.approx(d.eigenvalues[K:].sum(), abs=1e-8)


def test_non_finite_and_shape_errors():
    with pytest.raises(ValueError):
        fit_pca(np.array([[0.0, np.nan], [1.0, 2.0]]))
    with pytest.raises(ValueError):
        fit_pca(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        explained_variance(fit_pca(np.zeros((3, 2))))


def test_sign_convention():
    rng = np.random.default_rng(7)
    d = fit_pca(random_panel(rng, 25, 5))
    assert d.loadings[:, 0].mean() > 0
    for k in range(1, 5):
        col = d.loadings[:, k]
        assert col[np.argmax(np.abs(col))] > 0


def test_outputs_text():
    rng = np.random.default_rng(8)
    panel = make_panel(random_panel(rng, 5, 3))
    d = fit_pca(panel)
    lines = trends_csv(panel, d, 2).splitlines()
    assert lines[0] == "month,pc1,pc2" and lines[1].startswith("2000-01,") and len(lines) == 6
    header = region_scores(panel, d, 2).to_csv().splitlines()[0]
    assert header == "sa2_code,pc1_corr,pc2_corr,pc1_weight,pc2_weight,zero_variance"
    info = json.loads(variance_json(d))
    assert sum(info["explained_variance_share"]) == pytest.approx(1.0, abs=1e-10)


panels = st.tuples(st.integers(2, 14), st.integers(1, 9), st.integers(0, 2**31 - 1))


@settings(max_examples=60, deadline=None)
@given(panels)
def test_pca_invariants(args):
    T, p, seed = args
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(T, p))
    panel = make_panel(F)
    d = fit_pca(panel)
    lam = d.eigenvalues
    assert np.all(np.diff(lam) <= 1e-12 * max(lam[0], 1)) and np.all(lam >= 0)
    assert np.abs(d.loadings.T @ d.loadings - np.eye(p)).max() <= 1e-9
    assert np.abs(d.Z @ d.weights - F).max() <= 1e-9
    shares = explained_variance(d)
    assert abs(shares.sum() - 1) <= 1e-10
    G = d.Z.T @ d.Z
    norms = np.linalg.norm(d.Z, axis=0)
    off = np.abs(G - np.diag(np.diag(G)))
    assert np.all(off <= 1e-8 * np.outer(norms, norms) + 1e-12)
    prev = np.inf
    for K in range(1, p + 1):
        resid = np.sum((F - truncate_smooth(panel, d, K).F) ** 2)
        assert resid == pytest.approx(lam[K:].sum(), abs=1e-8 * max(1.0, lam.sum()))
        assert resid <= prev + 1e-10
        prev = resid


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 12), st.integers(2, 6), st.integers(0, 2**31 - 1), st.floats(0.1, 50))
def test_scale_behaviour_and_determinism(T, p, seed, c):
    rng = np.random.default_rng(seed)
    F = random_panel(rng, T, p)
    panel = make_panel(F)
    d1, d2 = fit_pca(panel), fit_pca(panel)
    K = min(p, 3)
    assert region_scores(panel, d1, K).to_csv() == region_scores(panel, d2, K).to_csv()
    scaled = make_panel(c * F)
    ds = fit_pca(scaled)
    assert np.allclose(ds.eigenvalues, c**2 * d1.eigenvalues, atol=1e-9 * c**2 * max(d1.eigenvalues[0], 1e-300))
    assert np.allclose(explained_variance(ds), explained_variance(d1), atol=1e-10)
    # correlations are only pinned down where the component is not degenerate
    lam = d1.eigenvalues
    gaps = np.minimum(np.abs(np.diff(np.r_[np.inf, lam])), np.abs(np.diff(np.r_[lam, -np.inf])))
    ok = (gaps[:K] > 1e-6 * lam[0]) & (lam[:K] > 1e-9 * lam[0])
    s1 = region_scores(panel, d1, K).corr[:, ok]
    s2 = region_scores(scaled, ds, K).corr[:, ok]
    assert np.allclose(s1, s2, atol=1e-10 * 1e3)


def test_planted_mining_regions_lead_pc2():
    for seed in range(10):
        market = generate(SyntheticSpec(n_regions=50, n_months=120, intensity=0.01, seed=seed))
        sc = region_scores(market.truth, fit_pca(market.truth), 3)
        mining = np.isin(market.region_codes, market.mining_regions)
        assert mining.sum() == 5
        assert sc.corr[mining, 1].min() > sc.corr[~mining, 1].max(), seed
