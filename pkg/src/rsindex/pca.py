"""PCA of an index panel: trends, loadings, explained variance, scores, truncation.

The panel is decomposed without mean-centering: ``R = F'F`` is eigendecomposed
directly, the trends are ``Z = F A`` and ``F = Z A'`` recovers every column as a
weighted sum of trends.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .panel import IndexPanel


@dataclass
class PcaDecomposition:
    """Eigen-decomposition of ``F'F``.

    Attributes
    ----------
    Z : (T, p) array
        Principal-component trends, ``Z[:, k] = F @ loadings[:, k]``.
    eigenvalues : (p,) array
        Descending and clipped at 0.
    loadings : (p, p) array
        Orthonormal eigenvectors, one component per column. The weight
        coupling region ``r`` to component ``k`` is ``loadings[r, k]``.
    """

    Z: np.ndarray
    eigenvalues: np.ndarray
    loadings: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        """Weights matrix with one row per component and one column per region."""
        return self.loadings.T

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size


def _orient(A: np.ndarray) -> np.ndarray:
    A = A.copy()
    for k in range(A.shape[1]):
        col = A[:, k]
        if k == 0:
            s = np.sign(col.mean())
        else:
            s = np.sign(col[np.argmax(np.abs(col))])
        if s < 0:
            A[:, k] = -col
    return A


def _complete_basis(A: np.ndarray, p: int) -> np.ndarray:
    """Extend ``p x m`` orthonormal columns to a full ``p x p`` orthonormal basis."""
    m = A.shape[1]
    if m == p:
        return A
    # project the identity onto the orthogonal complement and keep its leading directions
    comp = np.eye(p) - A @ A.T
    u, s, _ = np.linalg.svd(comp)
    return np.column_stack([A, u[:, : p - m]])


def fit_pca(panel: IndexPanel | np.ndarray) -> PcaDecomposition:
    """Eigen-decompose ``F'F`` (via the smaller Gram matrix) with a fixed sign convention.

    Sign convention: component 1 has a positive mean loading; every later
    component has its largest-magnitude loading positive.
    """
    F = panel.F if isinstance(panel, IndexPanel) else np.asarray(panel, dtype=float)
    if F.ndim != 2 or F.shape[0] < 2 or F.shape[1] < 1:
        raise ValueError(f"panel must be T x p with T >= 2 and p >= 1, got shape {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("panel contains non-finite values")
    T, p = F.shape
    if p <= T:
        lam, A = np.linalg.eigh(F.T @ F)
        order = np.argsort(lam)[::-1]
        lam, A = lam[order], A[:, order]
    else:
        mu, U = np.linalg.eigh(F @ F.T)
        order = np.argsort(mu)[::-1]
        mu, U = mu[order], U[:, order]
        keep = mu > mu[0] * 1e-13 if mu[0] > 0 else np.zeros_like(mu, dtype=bool)
        A = F.T @ U[:, keep] / np.sqrt(mu[keep])
        # re-orthonormalise to remove rounding drift before completing the basis
        A, _ = np.linalg.qr(A)
        A = _complete_basis(A, p)
        lam = np.concatenate([mu[keep], np.zeros(p - keep.sum())])
    lam = np.clip(lam, 0.0, None)
    A = _orient(A)
    return PcaDecomposition(F @ A, lam, A)


def explained_variance(decomp: PcaDecomposition) -> np.ndarray:
    lam = decomp.eigenvalues
    total = lam.sum()
    if total == 0:
        raise ValueError("panel has zero total variance")
    return lam / total


@dataclass
class ScoreTable:
    """Per-region scores for the first ``K`` components.

    ``corr`` holds Pearson correlations between each region's log index and
    each trend; ``weight`` the eigenvector loadings. ``zero_variance`` flags
    regions (or components) whose correlation was undefined and set to 0.
    """

    region_codes: list[str]
    corr: np.ndarray
    weight: np.ndarray
    zero_variance: np.ndarray

    @property
    def K(self) -> int:
        return self.corr.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        K = self.K
        w.writerow(
            ["sa2_code", *(f"pc{k + 1}_corr" for k in range(K)), *(f"pc{k + 1}_weight" for k in range(K)), "zero_variance"]
        )
        for i, code in enumerate(self.region_codes):
            w.writerow(
                [code, *(repr(float(v)) for v in self.corr[i]), *(repr(float(v)) for v in self.weight[i]), int(self.zero_variance[i])]
            )
        return buf.getvalue()


def _pearson_columns(F: np.ndarray, Z: np.ndarray):
    Fc = F - F.mean(axis=0)
    Zc = Z - Z.mean(axis=0)
    fn = np.linalg.norm(Fc, axis=0)
    zn = np.linalg.norm(Zc, axis=0)
    scale = max(np.abs(F).max(initial=0.0), 1e-300)
    f_zero = fn <= 1e-12 * scale * np.sqrt(F.shape[0])
    z_zero = zn <= 1e-12 * max(np.abs(Z).max(initial=0.0), 1e-300) * np.sqrt(Z.shape[0])
    with np.errstate(invalid="ignore", divide="ignore"):
        C = (Fc.T @ Zc) / np.outer(fn, zn)
    bad = f_zero[:, None] | z_zero[None, :]
    C[bad] = 0.0
    return np.clip(C, -1.0, 1.0), bad


def region_scores(panel: IndexPanel, decomp: PcaDecomposition, K: int) -> ScoreTable:
    p = panel.p
    if not 1 <= K <= p:
        raise ValueError(f"K must be in [1, {p}], got {K}")
    C, bad = _pearson_columns(panel.F, decomp.Z[:, :K])
    return ScoreTable(list(panel.region_codes), C, decomp.loadings[:, :K].copy(), bad.any(axis=1))


def truncate_smooth(panel: IndexPanel, decomp: PcaDecomposition, K: int) -> IndexPanel:
    """Panel rebuilt from the first ``K`` trends: column ``r`` is ``sum_k<K loadings[r,k] Z[:,k]``."""
    if not 1 <= K <= panel.p:
        raise ValueError(f"K must be in [1, {panel.p}], got {K}")
    FK = decomp.Z[:, :K] @ decomp.loadings[:, :K].T
    return IndexPanel(panel.grid, list(panel.region_codes), FK)


def trends_csv(panel: IndexPanel, decomp: PcaDecomposition, K: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["month", *(f"pc{k + 1}" for k in range(K))])
    for label, row in zip(panel.grid.labels(), decomp.Z[:, :K]):
        w.writerow([label, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def variance_json(decomp: PcaDecomposition) -> str:
    shares = explained_variance(decomp)
    return json.dumps(
        {
            "eigenvalues": [float(v) for v in decomp.eigenvalues],
            "explained_variance_share": [float(v) for v in shares],
            "cumulative_share": [float(v) for v in np.cumsum(shares)],
        },
        indent=2,
    )
