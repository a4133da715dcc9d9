"""Synthetic graphs with known structure, for sanity experiments and tests."""
from __future__ import annotations

import numpy as np

from .graph import AttributedGraph


def sbm_graph(
    n: int = 40,
    n_blocks: int = 2,
    p_in: float = 0.5,
    p_out: float = 0.02,
    feature_dim: int = 8,
    mean_sep: float = 2.0,
    noise: float = 1.0,
    seed: int = 0,
) -> AttributedGraph:
    """Stochastic block model with Gaussian features whose means depend on the block."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(n_blocks), int(np.ceil(n / n_blocks)))[:n]
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if labels[i] == labels[j] else p_out
            if rng.random() < p:
                pairs.append((i, j))
    means = rng.normal(0.0, 1.0, size=(n_blocks, feature_dim))
    means = means / np.linalg.norm(means, axis=1, keepdims=True) * mean_sep
    features = means[labels] + rng.normal(0.0, noise, size=(n, feature_dim))
    edges = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return AttributedGraph(n=n, edges=edges, features=features, labels=labels)
