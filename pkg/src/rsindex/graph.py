"""Graph Laplacians for spatial, temporal and spatio-temporal smoothing penalties."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph


@dataclass(frozen=True)
class RegionGraph:
    """Undirected, unweighted graph on ``node_ids`` with sparse W, D and L = D - W."""

    node_ids: tuple
    W: sp.csr_matrix
    D: sp.csr_matrix
    L: sp.csr_matrix

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def degrees(self) -> np.ndarray:
        return self.D.diagonal()

    def edges(self) -> list[tuple[int, int]]:
        upper = sp.triu(self.W, k=1).tocoo()
        return sorted(zip(upper.row.tolist(), upper.col.tolist()))

    def subgraph(self, nodes: Sequence) -> "RegionGraph":
        """Induced subgraph on ``nodes`` (kept in the given order)."""
        pos = {c: i for i, c in enumerate(self.node_ids)}
        idx = [pos[c] for c in nodes]
        return from_adjacency(self.W[idx][:, idx], tuple(nodes))

    def components(self) -> list[list[int]]:
        n, labels = csgraph.connected_components(self.W, directed=False)
        return [np.flatnonzero(labels == k).tolist() for k in range(n)]


def from_adjacency(W, node_ids) -> RegionGraph:
    W = sp.csr_matrix(W, dtype=float)
    W.eliminate_zeros()
    deg = np.asarray(W.sum(axis=1)).ravel()
    D = sp.diags(deg, format="csr")
    return RegionGraph(tuple(node_ids), W, D, (D - W).tocsr())


def path_laplacian(T: int, node_ids: Sequence | None = None) -> RegionGraph:
    """Path graph on ``T`` nodes: month ``t`` linked to month ``t + 1``."""
    if T < 2:
        raise ValueError(f"path graph needs T >= 2, got {T}")
    off = np.ones(T - 1)
    W = sp.diags([off, off], [-1, 1], shape=(T, T), format="csr")
    return from_adjacency(W, tuple(node_ids) if node_ids is not None else tuple(range(T)))


def adjacency_laplacian(edges: Iterable[tuple], node_ids: Sequence) -> RegionGraph:
    """Binary adjacency graph from an undirected edge list.

    Duplicate edges (in either orientation) collapse to one. Nodes without
    edges are kept with degree 0.
    """
    pos = {c: i for i, c in enumerate(node_ids)}
    if len(pos) != len(node_ids):
        raise ValueError("node_ids contains duplicates")
    rows, cols = [], []
    seen = set()
    for a, b in edges:
        for code in (a, b):
            if code not in pos:
                raise ValueError(f"edge refers to unknown region code {code!r}")
        if a == b:
            raise ValueError(f"self-loop on region {a!r}")
        i, j = sorted((pos[a], pos[b]))
        if (i, j) in seen:
            continue
        seen.add((i, j))
        rows += [i, j]
        cols += [j, i]
    n = len(node_ids)
    W = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return from_adjacency(W, tuple(node_ids))


def read_edges(path) -> list[tuple[str, str]]:
    """Read an adjacency CSV with header ``sa2_code_a,sa2_code_b``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"sa2_code_a", "sa2_code_b"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: adjacency CSV needs columns sa2_code_a,sa2_code_b")
        return [(row["sa2_code_a"].strip(), row["sa2_code_b"].strip()) for row in reader]


class SpatioTemporalPenalty:
    """Matrix-free ``L_s ⊗ L_t`` acting on region-major ``vec(H)``.

    ``H`` is ``T x p`` with one region per column, and ``vec`` stacks the
    columns, so entry ``(t, r)`` sits at position ``r * T + t``. With that
    ordering ``(L_s ⊗ L_t) vec(H) = vec(L_t H L_s^T)``.
    """

    def __init__(self, L_s, L_t):
        self.L_s = sp.csr_matrix(L_s, dtype=float)
        self.L_t = sp.csr_matrix(L_t, dtype=float)
        self.p = self.L_s.shape[0]
        self.T = self.L_t.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        n = self.p * self.T
        return n, n

    def apply_matrix(self, H: np.ndarray) -> np.ndarray:
        """``L_t H L_s^T`` for a ``T x p`` array."""
        return np.asarray(self.L_t @ (self.L_s @ np.asarray(H).T).T)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        H = np.reshape(x, (self.p, self.T)).T
        return self.apply_matrix(H).T.ravel()

    def quadratic(self, H: np.ndarray) -> float:
        return float(np.sum(H * self.apply_matrix(H)))

    def toarray(self) -> np.ndarray:
        return sp.kron(self.L_s, self.L_t).toarray()


def kronecker_penalty(L_s, L_t) -> SpatioTemporalPenalty:
    if isinstance(L_s, RegionGraph):
        L_s = L_s.L
    if isinstance(L_t, RegionGraph):
        L_t = L_t.L
    return SpatioTemporalPenalty(L_s, L_t)
