"""Spatio-temporally regularised repeat-sales regression.

The model for a batch of ``p`` regions on ``T`` months is::

    y = D_st vec(H) + D_t mu + eps

and the fit minimises::

    ||y - D_st vec(H) - D_t mu||^2 + gamma_st vec(H)' (L_s ⊗ L_t) vec(H)
        + gamma_t mu' L_t mu + ridge ||N(H)||^2

The index of region ``r`` is ``mu + H[:, r]``. Repeat-sales data only
identify index differences, so every series is anchored at 0 in month 0.
Under the default ``"first-month-centered"`` policy the regional deviations
also average to zero across the batch in each month, which makes ``mu`` the
batch's main trend; the plain ``"first-month"`` policy leaves that split to
the penalties alone.

``N(H)`` is the part of ``H`` the spatio-temporal penalty cannot see: the
per-connected-component spatial means of ``H`` (all of ``H`` when
``gamma_st = 0``). The same tiny ridge covers ``mu`` when ``gamma_t = 0``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

from .graph import RegionGraph, SpatioTemporalPenalty, from_adjacency, kronecker_penalty, path_laplacian
from .ingest import RepeatSalePair, TimeGrid
from .panel import IndexPanel

log = logging.getLogger(__name__)

ANCHOR_POLICIES = ("first-month-centered", "first-month")
DEFAULT_GAMMA_GRID = tuple(10.0**k for k in range(-2, 5))


class NonIdentifiableError(ValueError):
    """The penalised system has no unique solution for some regions or months."""


class ConfigurationError(ValueError):
    pass


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class PenaltyConfig:
    gamma_st: float = 1.0
    gamma_t: float = 1.0
    anchor_policy: str = "first-month-centered"
    tol: float = 1e-10
    max_iter: int | None = None
    ridge: float = 1e-8

    def __post_init__(self):
        if not (np.isfinite(self.gamma_st) and self.gamma_st >= 0):
            raise ConfigurationError(f"gamma_st must be finite and >= 0, got {self.gamma_st}")
        if not (np.isfinite(self.gamma_t) and self.gamma_t >= 0):
            raise ConfigurationError(f"gamma_t must be finite and >= 0, got {self.gamma_t}")
        if not self.tol > 0:
            raise ConfigurationError(f"tolerance must be > 0, got {self.tol}")
        if self.ridge < 0:
            raise ConfigurationError("ridge must be >= 0")
        if self.anchor_policy not in ANCHOR_POLICIES:
            raise ConfigurationError(f"unknown anchor policy {self.anchor_policy!r}")


@dataclass
class DesignSystem:
    y: np.ndarray
    D_t: sp.csr_matrix
    D_s: sp.csr_matrix
    D_st: sp.csr_matrix
    p: int
    T: int

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def X(self) -> sp.csr_matrix:
        """Full design ``[D_t, D_st]`` acting on ``[mu; vec(H)]``."""
        return sp.hstack([self.D_t, self.D_st], format="csr")


def build_design(pairs: Sequence[RepeatSalePair], p: int, T: int) -> DesignSystem:
    n = len(pairs)
    reg = np.fromiter((q.region_index for q in pairs), dtype=np.int64, count=n)
    t0 = np.fromiter((q.first_time for q in pairs), dtype=np.int64, count=n)
    t1 = np.fromiter((q.second_time for q in pairs), dtype=np.int64, count=n)
    y = np.fromiter((q.log_return for q in pairs), dtype=float, count=n)
    if n and (reg.min() < 0 or reg.max() >= p):
        raise ValueError(f"region index out of range [0, {p})")
    if n and (min(t0.min(), t1.min()) < 0 or max(t0.max(), t1.max()) >= T):
        raise ValueError(f"month index out of range [0, {T})")
    if np.any(t0 == t1):
        raise ValueError("pair with identical first and second month")

    rows = np.repeat(np.arange(n), 2)
    vals = np.tile([-1.0, 1.0], n)
    tcols = np.column_stack([t0, t1]).ravel()
    D_t = sp.csr_matrix((vals, (rows, tcols)), shape=(n, T))
    D_s = sp.csr_matrix((np.ones(n), (np.arange(n), reg)), shape=(n, p))
    # row-wise Kronecker of D_s and D_t: region r owns columns r*T .. r*T+T-1
    D_st = sp.csr_matrix((vals, (rows, np.repeat(reg, 2) * T + tcols)), shape=(n, p * T))
    return DesignSystem(y, D_t, D_s, D_st, p, T)


@dataclass
class FitResult:
    mu: np.ndarray
    H: np.ndarray
    objective_value: float
    converged: bool
    iterations: int
    residual_norm: float
    gradient_norm: float
    ridge: float
    config: PenaltyConfig

    @property
    def x(self) -> np.ndarray:
        """Stacked parameter vector ``[mu; vec(H)]``."""
        return np.concatenate([self.mu, self.H.T.ravel()])

    @property
    def index(self) -> np.ndarray:
        """``T x p`` log index, column ``r`` equal to ``mu + H[:, r]``."""
        return self.mu[:, None] + self.H

    def predict(self, pairs: Sequence[RepeatSalePair]) -> np.ndarray:
        F = self.index
        return np.array([F[q.second_time, q.region_index] - F[q.first_time, q.region_index] for q in pairs])

    def diagnostics(self) -> dict:
        return {
            "gamma_st": self.config.gamma_st,
            "gamma_t": self.config.gamma_t,
            "anchor_policy": self.config.anchor_policy,
            "ridge": self.ridge,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "gradient_norm": self.gradient_norm,
            "objective": self.objective_value,
        }


class _NormalOperator:
    """Projected normal-equation operator ``P A P`` on ``x = [mu; vec(H)]``."""

    def __init__(self, design: DesignSystem, penalty: SpatioTemporalPenalty, L_t, config: PenaltyConfig):
        self.p, self.T = design.p, design.T
        self.centered = config.anchor_policy == "first-month-centered"
        X = design.X
        self.X = X
        self.G = (X.T @ X).tocsr()
        self.b = np.asarray(X.T @ design.y).ravel()
        self.penalty = penalty
        self.L_t = sp.csr_matrix(L_t)
        self.g_st, self.g_t = config.gamma_st, config.gamma_t
        dim = self.T * (self.p + 1)
        scale = max(1.0, self.G.diagonal().sum() / dim)
        self.ridge = config.ridge * scale
        self.ridge_mu = self.ridge if self.g_t == 0 else 0.0
        if self.g_st == 0:
            self.null_proj = np.eye(self.p)
        else:
            _, labels = csgraph.connected_components(penalty.L_s, directed=False)
            member = (labels[:, None] == labels[None, :]).astype(float)
            self.null_proj = member / member.sum(axis=1, keepdims=True)
        self._init_preconditioner(penalty)

    def _init_preconditioner(self, penalty: SpatioTemporalPenalty):
        # Block-Jacobi: exact data curvature of mu and of each region's column,
        # plus the diagonal (degree) part of the spatial penalty; month 0 is
        # excluded by the anchor.
        T, p = self.T, self.p
        Lt_red = self.L_t[1:, 1:]
        eye = sp.identity(T - 1, format="csc")
        deg = penalty.L_s.diagonal()
        blocks = [(self.G[1:T, 1:T] + self.g_t * Lt_red + self.ridge * eye).tocsc()]
        for r in range(p):
            lo = T + r * T
            blk = self.G[lo + 1 : lo + T, lo + 1 : lo + T] + self.g_st * deg[r] * Lt_red + self.ridge * eye
            blocks.append(blk.tocsc())
        self._lu = [splu(b) for b in blocks]
        self._init_coarse()

    def _init_coarse(self):
        # Coarse space: mu together with the spatially constant profiles of H on
        # each connected component. The spatial penalty is blind to these, so
        # block-Jacobi alone converges slowly along them.
        T, p = self.T, self.p
        S = self.null_proj if self.g_st == 0 else np.unique(self.null_proj, axis=1) > 0
        S = np.asarray(S, dtype=float)
        if self.centered:
            S = S - S.mean(axis=0)
        u, sv, _ = np.linalg.svd(S, full_matrices=False)
        S = u[:, sv > 1e-10 * max(sv.max(initial=0.0), 1.0)]
        J = sp.eye(T, T - 1, k=-1, format="csr")
        Lt_red = (J.T @ self.L_t @ J).tocsc()
        coarse_blocks = [self.g_t * Lt_red + self.ridge_mu * sp.identity(T - 1)]
        if S.shape[1]:
            E = sp.block_diag([J, sp.kron(sp.csr_matrix(S), J)], format="csc")
            coarse_blocks.append(
                sp.kron(self.g_st * (S.T @ (self.penalty.L_s @ S)), Lt_red)
                + sp.kron(self.ridge * (S.T @ self.null_proj @ S), sp.identity(T - 1))
            )
        else:
            E = sp.vstack([J, sp.csr_matrix((p * T, T - 1))], format="csc")
        A_c = E.T @ self.G @ E + sp.block_diag(coarse_blocks)
        self._E = E
        self._coarse = splu(sp.csc_matrix(A_c))

    def precondition(self, r: np.ndarray) -> np.ndarray:
        out = np.zeros_like(r)
        T = self.T
        for k, lu in enumerate(self._lu):
            lo = k * T
            out[lo + 1 : lo + T] = lu.solve(r[lo + 1 : lo + T])
        out += self._E @ self._coarse.solve(self._E.T @ r)
        return out

    def split(self, x):
        return x[: self.T], x[self.T :].reshape(self.p, self.T).T

    def project(self, x: np.ndarray) -> np.ndarray:
        mu, H = self.split(x)
        mu = mu.copy()
        mu[0] = 0.0
        H = H.copy()
        H[0] = 0.0
        if self.centered:
            H -= H.mean(axis=1, keepdims=True)
        return np.concatenate([mu, H.T.ravel()])

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``A x`` without projection."""
        mu, H = self.split(x)
        out = self.G @ x
        out[: self.T] += self.g_t * (self.L_t @ mu)
        out[self.T :] += self.g_st * self.penalty.apply_matrix(H).T.ravel()
        out[: self.T] += self.ridge_mu * mu
        out[self.T :] += self.ridge * (H @ self.null_proj).T.ravel()
        return out

    def objective(self, x: np.ndarray, y: np.ndarray) -> float:
        mu, H = self.split(x)
        r = y - self.X @ x
        return float(
            r @ r
            + self.g_st * self.penalty.quadratic(H)
            + self.g_t * mu @ (self.L_t @ mu)
            + self.ridge_mu * mu @ mu
            + self.ridge * np.sum((H @ self.null_proj) ** 2)
        )


def _check_identifiable(design: DesignSystem, penalty: SpatioTemporalPenalty, config: PenaltyConfig, region_codes):
    if design.n == 0:
        raise NonIdentifiableError("batch has no repeat-sale pairs")
    counts = np.bincount(design.D_s.indices, minlength=design.p)
    degree = np.asarray(abs(penalty.L_s).sum(axis=1)).ravel() > 0
    codes = list(region_codes) if region_codes is not None else list(range(design.p))
    if design.p > 1 or config.anchor_policy == "first-month":
        for r in np.flatnonzero(counts == 0):
            if config.gamma_st == 0 or not degree[r]:
                why = "gamma_st = 0" if config.gamma_st == 0 else "region has no spatial neighbours"
                raise NonIdentifiableError(f"region block {codes[r]!r} has no pairs and {why}")
    if config.gamma_t == 0:
        touched = np.zeros(design.T, dtype=bool)
        touched[design.D_t.indices] = True
        gaps = np.flatnonzero(~touched[1:]) + 1
        if gaps.size:
            raise NonIdentifiableError(
                f"main trend unidentified at month(s) {gaps.tolist()} with gamma_t = 0"
            )


def solve_penalized(
    design: DesignSystem,
    penalty: SpatioTemporalPenalty,
    L_t,
    config: PenaltyConfig = PenaltyConfig(),
    region_codes: Sequence[str] | None = None,
    x0: np.ndarray | None = None,
) -> FitResult:
    """Minimise the penalised least-squares objective by projected Jacobi-PCG.

    The projection enforces the anchor policy, so iterates never leave the
    constraint set. Convergence means the projected residual dropped below
    ``config.tol`` times the projected right-hand side.
    """
    if penalty.p != design.p or penalty.T != design.T:
        raise ValueError(f"penalty is {penalty.p}x{penalty.T} but design is {design.p}x{design.T}")
    if isinstance(L_t, RegionGraph):
        L_t = L_t.L
    _check_identifiable(design, penalty, config, region_codes)
    op = _NormalOperator(design, penalty, L_t, config)
    dim = op.b.size
    max_iter = config.max_iter or 10 * dim

    b = op.project(op.b)
    bnorm = np.linalg.norm(b)
    x = np.zeros(dim) if x0 is None else op.project(np.asarray(x0, dtype=float))
    r = b - op.project(op.apply(x))
    target = config.tol * bnorm
    rnorm = np.linalg.norm(r)
    it = 0
    if rnorm > target:
        z = op.project(op.precondition(r))
        d = z.copy()
        rz = r @ z
        while it < max_iter:
            it += 1
            Ad = op.project(op.apply(d))
            dAd = d @ Ad
            if dAd <= 0:
                break
            step = rz / dAd
            x += step * d
            r -= step * Ad
            rnorm = np.linalg.norm(r)
            if rnorm <= target:
                break
            z = op.project(op.precondition(r))
            rz_new = r @ z
            d = z + (rz_new / rz) * d
            rz = rz_new
        # recompute the true residual to guard against drift in the recursion
        r = b - op.project(op.apply(x))
        rnorm = np.linalg.norm(r)
    converged = bool(rnorm <= max(target, 1e-300))
    if not converged:
        log.warning("PCG stopped after %d iterations, residual %.3e > %.3e", it, rnorm, target)
    mu, H = op.split(x)
    return FitResult(
        mu=mu.copy(),
        H=H.copy(),
        objective_value=op.objective(x, design.y),
        converged=converged,
        iterations=it,
        residual_norm=float(rnorm),
        gradient_norm=float(2 * rnorm),
        ridge=op.ridge,
        config=config,
    )


def fit_batch(
    pairs: Sequence[RepeatSalePair],
    graph: RegionGraph,
    T: int,
    config: PenaltyConfig = PenaltyConfig(),
) -> FitResult:
    """Fit one batch; ``pairs`` index regions by position in ``graph.node_ids``."""
    design = build_design(pairs, graph.n, T)
    L_t = path_laplacian(T).L
    return solve_penalized(design, kronecker_penalty(graph.L, L_t), L_t, config, graph.node_ids)


@dataclass
class GridSearchResult:
    config: PenaltyConfig
    table: list[dict] = field(default_factory=list)


def fold_assignment(n: int, folds: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % folds
    return labels[rng.permutation(n)]


def grid_search(
    pairs: Sequence[RepeatSalePair],
    graph: RegionGraph,
    T: int,
    gamma_st_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
    gamma_t_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
    folds: int = 5,
    base: PenaltyConfig = PenaltyConfig(),
    seed: int = 0,
) -> GridSearchResult:
    """K-fold out-of-sample search over the gamma grids.

    Each held-out pair is predicted as the difference of the fitted index
    between its two months. The pair of gammas with the lowest mean squared
    prediction error wins; ties go to the larger ``gamma_st``, then the larger
    ``gamma_t``.
    """
    if not len(gamma_st_grid) or not len(gamma_t_grid):
        raise ConfigurationError("gamma grids must be non-empty")
    if folds < 2:
        raise ConfigurationError(f"need at least 2 folds, got {folds}")
    candidates = [(float(a), float(b)) for a in gamma_st_grid for b in gamma_t_grid]
    if len(candidates) == 1:
        g_st, g_t = candidates[0]
        return GridSearchResult(replace(base, gamma_st=g_st, gamma_t=g_t), [])

    n = len(pairs)
    labels = fold_assignment(n, folds, seed)
    for k in range(folds):
        if not np.any(labels == k):
            raise ConfigurationError(f"fold {k} has no held-out pairs ({n} pairs, {folds} folds)")

    L_t = path_laplacian(T).L
    penalty = kronecker_penalty(graph.L, L_t)
    y = np.array([q.log_return for q in pairs])
    splits = []
    for k in range(folds):
        train = [q for q, lab in zip(pairs, labels) if lab != k]
        test = [q for q, lab in zip(pairs, labels) if lab == k]
        splits.append((build_design(train, graph.n, T), test, y[labels == k]))

    sse = np.zeros(len(candidates))
    failed = np.zeros(len(candidates), dtype=bool)
    for design, test, y_test in splits:
        x0 = None
        for i, (g_st, g_t) in enumerate(candidates):
            if failed[i]:
                continue
            cfg = replace(base, gamma_st=g_st, gamma_t=g_t)
            try:
                fit = solve_penalized(design, penalty, L_t, cfg, graph.node_ids, x0=x0)
            except NonIdentifiableError:
                failed[i] = True
                continue
            x0 = fit.x
            sse[i] += float(np.sum((y_test - fit.predict(test)) ** 2))
    mse = np.where(failed, np.inf, sse / n)
    table = [
        {"gamma_st": g_st, "gamma_t": g_t, "cv_mse": float(e)} for (g_st, g_t), e in zip(candidates, mse)
    ]
    best = min(row["cv_mse"] for row in table)
    if not np.isfinite(best):
        raise NonIdentifiableError("no candidate in the gamma grid yields an identifiable fit")
    tied = [row for row in table if row["cv_mse"] <= best * (1 + 1e-12)]
    win = max(tied, key=lambda row: (row["gamma_st"], row["gamma_t"]))
    return GridSearchResult(replace(base, gamma_st=win["gamma_st"], gamma_t=win["gamma_t"]), table)


@dataclass
class BatchFit:
    batch: str
    region_codes: list[str]
    fit: FitResult
    search: GridSearchResult | None = None

    def diagnostics(self) -> dict:
        out = {"batch": self.batch, "regions": list(self.region_codes), **self.fit.diagnostics()}
        if self.search is not None:
            out["cv_table"] = self.search.table
        return out


def assemble_panel(fits: Sequence[BatchFit], region_order: Sequence[str], grid: TimeGrid) -> IndexPanel:
    """Stack per-batch fitted indexes into one balanced panel in ``region_order``."""
    columns: dict[str, np.ndarray] = {}
    for bf in fits:
        index = bf.fit.index
        if index.shape[0] != grid.T:
            raise AssemblyError(f"batch {bf.batch!r} has {index.shape[0]} months, expected {grid.T}")
        for j, code in enumerate(bf.region_codes):
            if code in columns:
                raise AssemblyError(f"region {code!r} appears in more than one batch")
            columns[code] = index[:, j]
    missing = [c for c in region_order if c not in columns]
    if missing:
        raise AssemblyError(f"regions without a fitted index: {missing}")
    extra = sorted(set(columns) - set(region_order))
    if extra:
        raise AssemblyError(f"fitted regions not in region order: {extra}")
    F = np.column_stack([columns[c] for c in region_order]) if region_order else np.zeros((grid.T, 0))
    return IndexPanel(grid, list(region_order), F)


@dataclass(frozen=True)
class BatchJob:
    batch: str
    region_codes: list[str]
    pairs: list[RepeatSalePair]
    graph: RegionGraph
    T: int
    config: PenaltyConfig
    gamma_st_grid: tuple | None = None
    gamma_t_grid: tuple | None = None
    folds: int = 5
    seed: int = 0


def run_batch(job: BatchJob) -> BatchFit:
    search = None
    config = job.config
    if job.gamma_st_grid is not None and job.gamma_t_grid is not None:
        search = grid_search(
            job.pairs, job.graph, job.T, job.gamma_st_grid, job.gamma_t_grid, job.folds, job.config, job.seed
        )
        config = search.config
    fit = fit_batch(job.pairs, job.graph, job.T, config)
    return BatchFit(job.batch, job.region_codes, fit, search)


def split_batches(
    pairs: Sequence[RepeatSalePair],
    region_codes: Sequence[str],
    parent_of: Mapping[str, str],
    graph: RegionGraph,
) -> list[tuple[str, list[str], list[RepeatSalePair], RegionGraph]]:
    """Group regions by parent code and re-index pairs within each batch.

    ``graph`` must be defined on ``region_codes``; each batch receives the
    induced subgraph of its regions.
    """
    members: dict[str, list[str]] = {}
    for code in region_codes:
        members.setdefault(parent_of[code], []).append(code)
    local = {}
    for parent, codes in members.items():
        for j, c in enumerate(codes):
            local[c] = (parent, j)
    grouped: dict[str, list[RepeatSalePair]] = {k: [] for k in members}
    for q in pairs:
        parent, j = local[region_codes[q.region_index]]
        grouped[parent].append(RepeatSalePair(j, q.first_time, q.second_time, q.log_return))
    return [(k, members[k], grouped[k], graph.subgraph(members[k])) for k in sorted(members)]


def fit_panel(
    pairs: Sequence[RepeatSalePair],
    region_codes: Sequence[str],
    parent_of: Mapping[str, str],
    graph: RegionGraph,
    grid: TimeGrid,
    config: PenaltyConfig = PenaltyConfig(),
    gamma_st_grid: Sequence[float] | None = None,
    gamma_t_grid: Sequence[float] | None = None,
    folds: int = 5,
    jobs: int = 1,
    seed: int = 0,
    global_gammas: bool = False,
) -> tuple[IndexPanel, list[BatchFit]]:
    """Fit every parent-region batch and assemble the panel.

    With grids given, gammas are tuned per batch by :func:`grid_search`, or
    once on the pooled data when ``global_gammas`` is set (the pooled search
    uses the full graph with all batches side by side).
    """
    batches = split_batches(pairs, region_codes, parent_of, graph)
    grids = None
    if gamma_st_grid is not None and gamma_t_grid is not None:
        grids = (tuple(gamma_st_grid), tuple(gamma_t_grid))
        if global_gammas:
            block = sp.block_diag([b[3].W for b in batches], format="csr")
            order = [c for b in batches for c in b[1]]
            offset, pooled = 0, []
            for _, codes, bp, _ in batches:
                pooled += [RepeatSalePair(q.region_index + offset, q.first_time, q.second_time, q.log_return) for q in bp]
                offset += len(codes)
            config = grid_search(pooled, from_adjacency(block, order), grid.T, *grids, folds, config, seed).config
            grids = None
    job_list = [
        BatchJob(name, codes, bp, g, grid.T, config, *(grids or (None, None)), folds, seed)
        for name, codes, bp, g in batches
    ]
    if jobs > 1 and len(job_list) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            fits = list(pool.map(run_batch, job_list))
    else:
        fits = [run_batch(j) for j in job_list]
    return assemble_panel(fits, list(region_codes), grid), fits
