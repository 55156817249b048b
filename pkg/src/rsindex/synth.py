"""Synthetic housing markets with known factor structure.

Regions are grouped into batches of ``regions_per_batch`` (the parent-region
level); inside a batch they sit on a near-square grid with 4-neighbour
adjacency. The true log index of region ``r`` is ``factors @ loadings[r]``,
and every sale is priced at ``exp(property effect + true index + noise)``.
"""
from __future__ import annotations

import calendar
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .analysis import LIFESTYLE_WORDS
from .ingest import SalesRecord, TimeGrid, parse_month
from .panel import IndexPanel

FACTOR_NAMES = ("national", "mining", "lifestyle")


@dataclass
class SyntheticSpec:
    n_regions: int = 50
    n_months: int = 120
    start_month: str = "2000-01"
    regions_per_batch: int = 25
    noise_sd: float = 0.05
    intensity: float = 3.0
    sales_per_property: float = 3.0
    factor_trends: np.ndarray | None = None
    loadings: np.ndarray | None = None
    mining_fraction: float = 0.1
    lifestyle_fraction: float = 0.1
    background_sd: float = 0.3
    seed: int = 0

    def validate(self):
        if self.n_months < 2:
            raise ValueError(f"need at least 2 months, got {self.n_months}")
        if self.n_regions < 1:
            raise ValueError(f"need at least 1 region, got {self.n_regions}")
        if self.noise_sd < 0 or self.intensity < 0:
            raise ValueError("noise and intensity must be non-negative")
        if self.regions_per_batch < 1 or self.sales_per_property <= 0:
            raise ValueError("regions_per_batch and sales_per_property must be positive")
        if self.factor_trends is not None and self.loadings is not None:
            if np.shape(self.factor_trends)[1] != np.shape(self.loadings)[1]:
                raise ValueError("factor_trends and loadings disagree on the number of factors")
        if self.factor_trends is not None and np.shape(self.factor_trends)[0] != self.n_months:
            raise ValueError("factor_trends must have n_months rows")
        if self.loadings is not None and np.shape(self.loadings)[0] != self.n_regions:
            raise ValueError("loadings must have n_regions rows")


@dataclass
class SyntheticMarket:
    records: list[SalesRecord]
    truth: IndexPanel
    loadings: np.ndarray
    factors: np.ndarray
    parent_of: dict[str, str]
    edges: list[tuple[str, str]]
    metadata: pd.DataFrame
    mining_regions: list[str] = field(default_factory=list)
    lifestyle_regions: list[str] = field(default_factory=list)

    @property
    def region_codes(self) -> list[str]:
        return self.truth.region_codes

    def mining_share(self, seed: int = 0, noise: float = 0.01) -> pd.Series:
        """Planted mining-employment share: rises with the mining loading."""
        rng = np.random.default_rng(seed)
        b = self.loadings[:, 1] if self.loadings.shape[1] > 1 else np.zeros(len(self.region_codes))
        share = 0.02 + 0.3 * np.clip(b, 0, None) + noise * np.abs(rng.normal(size=b.size))
        return pd.Series(np.clip(share, 0, 1), index=pd.Index(self.region_codes, name="sa2_code"), name="mining_share")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def default_factors(T: int) -> np.ndarray:
    """``T x 3`` anchored log trends: monotone national, mid-sample hump, two surges."""
    t = np.linspace(0.0, 1.0, T)
    national = 0.8 * t + 0.4 * t**2
    mining = 0.8 * np.exp(-(((t - 0.55) / 0.15) ** 2))
    # boom, bust, boom
    lifestyle = 0.8 * (_sigmoid((t - 0.3) / 0.04) - _sigmoid((t - 0.55) / 0.06) + _sigmoid((t - 0.8) / 0.04))
    F = np.column_stack([national, mining, lifestyle])
    return F - F[0]


def layout(n_regions: int, per_batch: int):
    """Region codes, parent codes and within-batch grid edges."""
    codes = [f"SA2_{i:04d}" for i in range(n_regions)]
    parent_of, edges = {}, []
    for b0 in range(0, n_regions, per_batch):
        members = codes[b0 : b0 + per_batch]
        parent = f"SA4_{b0 // per_batch:03d}"
        ncol = math.ceil(math.sqrt(len(members)))
        for j, c in enumerate(members):
            parent_of[c] = parent
            row, col = divmod(j, ncol)
            if col + 1 < ncol and j + 1 < len(members):
                edges.append((c, members[j + 1]))
            if j + ncol < len(members):
                edges.append((c, members[j + ncol]))
    return codes, parent_of, edges


def _planted(n_regions, per_batch, fraction, batch):
    """Indices of a contiguous block of regions at the start of ``batch`` (wrapping)."""
    n_batches = math.ceil(n_regions / per_batch)
    b = batch % n_batches
    start = b * per_batch
    size = min(max(1, int(round(fraction * n_regions))), min(per_batch, n_regions - start))
    return list(range(start, start + size)) if fraction > 0 else []


def generate(spec: SyntheticSpec) -> SyntheticMarket:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    p, T = spec.n_regions, spec.n_months
    grid = TimeGrid(parse_month(spec.start_month), T)
    codes, parent_of, edges = layout(p, spec.regions_per_batch)

    factors = default_factors(T) if spec.factor_trends is None else np.asarray(spec.factor_trends, float)
    factors = factors - factors[0]
    mining = _planted(p, spec.regions_per_batch, spec.mining_fraction, 0)
    lifestyle = _planted(p, spec.regions_per_batch, spec.lifestyle_fraction, 1) if p > spec.regions_per_batch else []
    lifestyle = [i for i in lifestyle if i not in mining]
    if spec.loadings is None:
        K = factors.shape[1]
        L = np.zeros((p, K))
        L[:, 0] = 1.0 + 0.05 * rng.normal(size=p)
        if K > 1:
            L[:, 1] = spec.background_sd * rng.normal(size=p)
            L[mining, 1] = 1.2 + 0.3 * rng.random(len(mining))
            # mining exposure weakens the coupling to the national trend
            L[:, 0] -= 0.5 * np.clip(L[:, 1], 0, None)
        if K > 2:
            L[:, 2] = spec.background_sd * rng.normal(size=p)
            L[lifestyle, 2] = 1.2 + 0.3 * rng.random(len(lifestyle))
    else:
        L = np.asarray(spec.loadings, dtype=float)
    truth = factors @ L.T

    n_props = max(2, int(round(spec.intensity * T / spec.sales_per_property)))
    records: list[SalesRecord] = []
    for r, code in enumerate(codes):
        prop_effect = np.log(500_000.0) + 0.3 * rng.normal(size=n_props)
        counts = rng.poisson(spec.intensity, size=T)
        for t in range(T):
            k = counts[t]
            if k == 0:
                continue
            month = grid.month(t)
            days = rng.integers(1, calendar.monthrange(month.year, month.month)[1] + 1, size=k)
            props = rng.integers(0, n_props, size=k)
            noise = spec.noise_sd * rng.normal(size=k) if spec.noise_sd > 0 else np.zeros(k)
            for d, j, e in zip(days, props, noise):
                price = float(np.exp(prop_effect[j] + truth[t, r] + e))
                records.append(
                    SalesRecord(f"{code}-P{j:05d}", price, month.replace(day=int(d)), code, parent_of[code])
                )
    records.sort(key=lambda s: (s.sale_date, s.property_id))

    meta = pd.DataFrame(
        {
            "city_group": [f"Group {parent_of[c][-3:]}" for c in codes],
            "state": [f"S{int(parent_of[c][-3:]) % 3}" for c in codes],
        },
        index=pd.Index(codes, name="sa2_code"),
    )
    return SyntheticMarket(
        records,
        IndexPanel(grid, codes, truth),
        L,
        factors,
        parent_of,
        edges,
        meta,
        [codes[i] for i in mining],
        [codes[i] for i in lifestyle],
    )


def factor_panel(T: int, p: int, shares, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Panel whose ``F'F`` has eigenvalue shares exactly ``shares`` (padded with zeros).

    Returns the panel and the true orthonormal loadings (``p x len(shares)``).
    """
    shares = np.asarray(shares, dtype=float)
    K = shares.size
    if K > min(T, p):
        raise ValueError("more shares than the panel rank allows")
    rng = np.random.default_rng(seed)
    Z, _ = np.linalg.qr(rng.normal(size=(T, K)))
    A, _ = np.linalg.qr(rng.normal(size=(p, K)))
    return (Z * np.sqrt(shares / shares.sum())) @ A.T, A


def synthetic_words(
    region_codes,
    score,
    years,
    planted=LIFESTYLE_WORDS[:10],
    n_filler: int = 30,
    rho_start: float = 0.32,
    rho_end: float = 0.47,
    seed: int = 0,
) -> pd.DataFrame:
    """Long-format word panel ``sa2_code, year, word, rel_freq``.

    Planted words share one region-level nuisance term, so both single-word
    and word-group correlations with ``score`` sit near a target that rises
    linearly from ``rho_start`` to ``rho_end`` over ``years``.
    """
    rng = np.random.default_rng(seed)
    s = np.asarray(score, dtype=float)
    s = (s - s.mean()) / s.std()
    n = len(region_codes)
    years = list(years)
    targets = np.linspace(rho_start, rho_end, len(years))
    shared = rng.normal(size=n)
    # orthogonal to the score so the log-scale correlation equals the target
    shared -= shared.mean() + (shared @ s) / (s @ s) * s
    shared /= shared.std()
    rows = []
    filler = [f"word{i:03d}" for i in range(n_filler)]
    base = {w: 10 ** rng.uniform(-4, -2.5) for w in (*planted, *filler)}
    filler_noise = {w: rng.normal(size=n) for w in filler}
    for y, rho in zip(years, targets):
        # Spearman target mapped to the Gaussian Pearson correlation
        r = 2 * math.sin(math.pi * rho / 6)
        beta = r / math.sqrt(1 - r**2)
        for w in planted:
            eps = 0.05 * rng.normal(size=n)
            f = base[w] * np.exp(0.5 * (beta * s + shared) + eps)
            rows += [(c, y, w, float(v)) for c, v in zip(region_codes, f)]
        for w in filler:
            eps = 0.05 * rng.normal(size=n)
            f = base[w] * np.exp(0.5 * filler_noise[w] + eps)
            rows += [(c, y, w, float(v)) for c, v in zip(region_codes, f)]
    return pd.DataFrame(rows, columns=["sa2_code", "year", "word", "rel_freq"])


def synthetic_cpi(grid: TimeGrid, annual_inflation: float = 0.025, seed: int = 0) -> pd.Series:
    rng = np.random.default_rng(seed)
    monthly = np.log1p(annual_inflation) / 12 + 0.001 * rng.normal(size=grid.T)
    level = 100 * np.exp(np.cumsum(monthly) - monthly[0])
    idx = pd.PeriodIndex(grid.labels(), freq="M", name="month")
    return pd.Series(level, index=idx, name="cpi")


def sales_csv(records) -> str:
    lines = ["property_id,price,sale_date,sa2_code,sa4_code"]
    for s in records:
        lines.append(f"{s.property_id},{s.price!r},{s.sale_date.isoformat()},{s.region_code},{s.parent_region_code}")
    return "\n".join(lines) + "\n"


__all__ = [
    "SyntheticSpec", "SyntheticMarket", "generate", "default_factors", "factor_panel",
    "synthetic_words", "synthetic_cpi", "sales_csv", "layout", "FACTOR_NAMES",
]
