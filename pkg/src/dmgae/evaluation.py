"""Node-clustering and link-prediction protocols and metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata
from sklearn.cluster import KMeans
from sklearn.metrics import f1_score, normalized_mutual_info_score

from .graph import AttributedGraph


@dataclass(frozen=True)
class ClusteringResult:
    pred: np.ndarray
    acc: float
    nmi: float
    f1: float


@dataclass(frozen=True)
class EdgeSplit:
    train_edges: np.ndarray  # (m_train, 2)
    val_pos: np.ndarray
    val_neg: np.ndarray
    test_pos: np.ndarray
    test_neg: np.ndarray


def kmeans(z: np.ndarray, c: int, seed: int = 0) -> np.ndarray:
    """K-means with k-means++ init and 20 restarts, best inertia kept."""
    if c > len(z):
        raise ValueError(f"cluster count {c} exceeds number of points {len(z)}")
    km = KMeans(n_clusters=c, n_init=20, random_state=seed)
    return km.fit_predict(np.asarray(z, dtype=np.float64))


def best_cluster_mapping(pred: np.ndarray, truth: np.ndarray) -> dict[int, int]:
    """Optimal cluster-id -> class-id assignment (Hungarian on the contingency)."""
    clusters = np.unique(pred)
    classes = np.unique(truth)
    size = max(len(clusters), len(classes))
    w = np.zeros((size, size), dtype=np.int64)
    cl_index = {c: i for i, c in enumerate(clusters)}
    la_index = {c: i for i, c in enumerate(classes)}
    for p, t in zip(pred, truth):
        w[cl_index[p], la_index[t]] += 1
    rows, cols = linear_sum_assignment(w.max() - w)
    mapping = {}
    for r, c in zip(rows, cols):
        if r < len(clusters):
            # unmatched clusters (padding columns) map to the majority class
            mapping[int(clusters[r])] = int(classes[c]) if c < len(classes) else int(classes[0])
    return mapping


def clustering_metrics(pred: np.ndarray, truth: np.ndarray) -> ClusteringResult:
    """ACC under optimal matching, NMI (arithmetic-mean norm), macro-F1."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if len(pred) != len(truth):
        raise ValueError("prediction and truth lengths differ")
    mapping = best_cluster_mapping(pred, truth)
    mapped = np.array([mapping[int(p)] for p in pred])
    acc = float(np.mean(mapped == truth))
    nmi = float(normalized_mutual_info_score(truth, pred, average_method="arithmetic"))
    f1 = float(f1_score(truth, mapped, average="macro"))
    return ClusteringResult(pred=pred, acc=acc, nmi=nmi, f1=f1)


def split_edges(
    g: AttributedGraph,
    val_frac: float = 0.05,
    test_frac: float = 0.10,
    seed: int = 0,
) -> EdgeSplit:
    """Hide random positive edges for validation/test and sample matching
    negatives uniformly from non-edges; the train graph keeps the rest."""
    rng = np.random.default_rng(seed)
    edges = g.edges
    m = len(edges)
    n_val = int(np.floor(val_frac * m))
    n_test = int(np.floor(test_frac * m))
    if n_val + n_test >= m:
        raise ValueError("not enough edges for the requested split fractions")
    perm = rng.permutation(m)
    val_pos = edges[perm[:n_val]]
    test_pos = edges[perm[n_val : n_val + n_test]]
    train = edges[np.sort(perm[n_val + n_test :])]

    n_pairs = g.n * (g.n - 1) // 2
    n_neg = n_val + n_test
    if n_pairs - m < n_neg:
        raise ValueError(
            f"graph has only {n_pairs - m} non-edges; cannot sample {n_neg} negatives"
        )
    edge_set = g.edge_set()
    negatives: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    while len(negatives) < n_neg:
        i = int(rng.integers(0, g.n))
        j = int(rng.integers(0, g.n))
        if i == j:
            continue
        pair = (min(i, j), max(i, j))
        if pair in edge_set or pair in seen:
            continue
        seen.add(pair)
        negatives.append(pair)
    neg = np.array(negatives, dtype=np.int64)
    return EdgeSplit(
        train_edges=train,
        val_pos=val_pos,
        val_neg=neg[:n_val],
        test_pos=test_pos,
        test_neg=neg[n_val:],
    )


def pair_scores(z: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Decoded edge probabilities sigmoid(z_i . z_j) for the given pairs."""
    logits = np.sum(z[pairs[:, 0]] * z[pairs[:, 1]], axis=1)
    return 1.0 / (1.0 + np.exp(-logits))


def auc_score(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Mann-Whitney AUC with midranks for ties."""
    scores = np.concatenate([pos_scores, neg_scores])
    ranks = rankdata(scores)
    n_pos = len(pos_scores)
    n_neg = len(neg_scores)
    rank_sum = ranks[:n_pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Area under the precision-recall curve by step interpolation over
    score-sorted pairs: sum over recall increments of the running precision."""
    scores = np.concatenate([pos_scores, neg_scores])
    labels = np.concatenate(
        [np.ones(len(pos_scores), dtype=bool), np.zeros(len(neg_scores), dtype=bool)]
    )
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    tp = np.cumsum(labels)
    precision = tp / np.arange(1, len(labels) + 1)
    n_pos = labels.sum()
    return float(precision[labels].sum() / n_pos)


def link_prediction_metrics(z: np.ndarray, split: EdgeSplit) -> tuple[float, float]:
    """Test-set AUC and AP of decoded pair probabilities."""
    pos = pair_scores(z, split.test_pos)
    neg = pair_scores(z, split.test_neg)
    return auc_score(pos, neg), average_precision(pos, neg)


def split_graph(g: AttributedGraph, split: EdgeSplit) -> AttributedGraph:
    """The training graph: the input graph minus hidden positive edges."""
    return AttributedGraph(
        n=g.n, edges=split.train_edges, features=g.features, labels=g.labels
    )


def separation_ratio(coords: np.ndarray, labels: np.ndarray) -> float:
    """Mean inter-class centroid distance over mean intra-class spread.

    Used as a scalar proxy for how crowded a 2D projection is: higher means
    classes are better separated relative to their internal scatter.
    """
    coords = np.asarray(coords, dtype=np.float64)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    centroids = np.stack([coords[labels == c].mean(axis=0) for c in classes])
    spreads = [
        np.linalg.norm(coords[labels == c] - centroids[k], axis=1).mean()
        for k, c in enumerate(classes)
    ]
    inter = [
        np.linalg.norm(centroids[a] - centroids[b])
        for a in range(len(classes))
        for b in range(a + 1, len(classes))
    ]
    return float(np.mean(inter) / np.mean(spreads))
