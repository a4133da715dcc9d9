"""Attributed-graph data model, adjacency operators, and file ingestion."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised when an input file violates the canonical graph format."""


@dataclass(frozen=True)
class AttributedGraph:
    """Undirected, unweighted graph with dense node features.

    Edges are stored as a sorted array of (i, j) pairs with i < j; the
    constructor rejects self-loops, duplicates, and out-of-range endpoints.
    """

    n: int
    edges: np.ndarray  # (m, 2) int array, each row i < j, sorted lexicographically
    features: np.ndarray  # (n, f) float array
    labels: Optional[np.ndarray] = None  # (n,) int array

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != self.n:
            raise GraphFormatError(
                f"feature matrix has {features.shape[0]} rows, expected {self.n}"
            )
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise GraphFormatError("edge endpoint out of range")
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise GraphFormatError("edges must satisfy i < j (no self-loops)")
            if len(np.unique(edges, axis=0)) != len(edges):
                raise GraphFormatError("duplicate edges")
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            edges = edges[order]
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (self.n,):
                raise GraphFormatError(
                    f"label vector has length {labels.shape}, expected ({self.n},)"
                )
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}


def canonical_edges(pairs, n: int) -> np.ndarray:
    """Symmetrize, deduplicate, and drop self-loops from raw (i, j) pairs."""
    arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
    if arr.size == 0:
        return arr
    if arr.min() < 0 or arr.max() >= n:
        bad = arr[(arr < 0).any(axis=1) | (arr >= n).any(axis=1)][0]
        raise GraphFormatError(f"edge {tuple(bad)} references node outside [0, {n})")
    lo = arr.min(axis=1)
    hi = arr.max(axis=1)
    keep = lo != hi
    dropped_self = int((~keep).sum())
    arr = np.stack([lo[keep], hi[keep]], axis=1)
    before = len(arr)
    arr = np.unique(arr, axis=0)
    dropped_dup = before - len(arr)
    if dropped_self or dropped_dup:
        logger.info(
            "dropped %d self-loop(s) and %d duplicate edge(s)", dropped_self, dropped_dup
        )
    return arr


def load_graph(
    edge_path: str | Path,
    feature_path: str | Path,
    label_path: str | Path | None = None,
) -> AttributedGraph:
    """Load a graph from canonical whitespace-separated text files."""
    features = _read_matrix(feature_path)
    n = features.shape[0]

    raw = []
    with open(edge_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(
                    f"{edge_path}:{lineno}: expected two integers, got {line!r}"
                )
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(
                    f"{edge_path}:{lineno}: non-integer edge endpoint in {line!r}"
                ) from None
            if u < 0 or v < 0:
                raise GraphFormatError(f"{edge_path}:{lineno}: negative node index")
            raw.append((u, v))

    if raw and max(max(u, v) for u, v in raw) >= n:
        u, v = next((u, v) for u, v in raw if max(u, v) >= n)
        raise GraphFormatError(
            f"edge ({u}, {v}) references node outside [0, {n}) "
            f"(feature file has {n} rows)"
        )
    edges = canonical_edges(raw, n) if raw else np.zeros((0, 2), dtype=np.int64)

    labels = None
    if label_path is not None:
        labels = _read_labels(label_path)
        if labels.shape[0] != n:
            raise GraphFormatError(
                f"label file has {labels.shape[0]} lines, expected {n}"
            )
    return AttributedGraph(n=n, edges=edges, features=features, labels=labels)


def write_graph(
    g: AttributedGraph,
    edge_path: str | Path,
    feature_path: str | Path,
    label_path: str | Path | None = None,
) -> None:
    """Write a graph in the canonical text format (inverse of load_graph)."""
    with open(edge_path, "w") as fh:
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")
    with open(feature_path, "w") as fh:
        for row in g.features:
            fh.write(" ".join(f"{v:.10g}" for v in row) + "\n")
    if label_path is not None:
        if g.labels is None:
            raise ValueError("graph has no labels to write")
        with open(label_path, "w") as fh:
            for lab in g.labels:
                fh.write(f"{lab}\n")


def _read_matrix(path: str | Path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split()]
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-numeric value") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected {width} values, got {len(row)}"
                )
            rows.append(row)
    if not rows:
        raise GraphFormatError(f"{path}: empty feature file")
    return np.asarray(rows, dtype=np.float64)


def _read_labels(path: str | Path) -> np.ndarray:
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-integer label") from None
    return np.asarray(labels, dtype=np.int64)


def adjacency(g: AttributedGraph) -> sp.csr_matrix:
    """Binary symmetric adjacency matrix with zero diagonal."""
    if g.num_edges == 0:
        return sp.csr_matrix((g.n, g.n))
    i, j = g.edges[:, 0], g.edges[:, 1]
    data = np.ones(2 * len(i))
    a = sp.coo_matrix(
        (data, (np.concatenate([i, j]), np.concatenate([j, i]))), shape=(g.n, g.n)
    )
    return a.tocsr()


def normalize_adjacency(a: sp.spmatrix) -> sp.csr_matrix:
    """Symmetrically normalized adjacency with self-loops: D^-1/2 (A+I) D^-1/2."""
    n = a.shape[0]
    a_tilde = (a + sp.eye(n, format="csr")).tocsr()
    deg = np.asarray(a_tilde.sum(axis=1)).ravel()
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    d_mat = sp.diags(d_inv_sqrt)
    return (d_mat @ a_tilde @ d_mat).tocsr()


def knn_graph(x: np.ndarray, k: int) -> AttributedGraph:
    """Mutual-or k-NN graph: edge iff either endpoint is among the other's
    k nearest by Euclidean distance. Ties break toward lower node index."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k >= n:
        raise ValueError(f"k={k} must be < number of nodes n={n}")
    d2 = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    pairs = set()
    idx = np.arange(n)
    for i in range(n):
        # stable sort on (distance, index) implements the lower-index tie rule
        order = np.lexsort((idx, d2[i]))[:k]
        for j in order:
            pairs.add((min(i, int(j)), max(i, int(j))))
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return AttributedGraph(n=n, edges=edges, features=x)
