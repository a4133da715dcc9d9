"""Conversion of Planetoid-style citation datasets (ind.<name>.*) to the
canonical edge/feature/label text format."""
from __future__ import annotations

import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .graph import AttributedGraph, canonical_edges

PLANETOID_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


class DatasetLayoutError(ValueError):
    """Raised when a source directory does not look like a Planetoid dataset."""


def _load_pickle(path: Path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def load_planetoid(directory: str | Path, name: str) -> AttributedGraph:
    """Assemble a Planetoid dataset (ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}).

    Test nodes are reordered to their original ids; datasets with gaps in the
    test index range (CiteSeer) get zero feature rows and label -1 for the
    isolated filler nodes.
    """
    directory = Path(directory)
    parts = {}
    for part in PLANETOID_PARTS:
        path = directory / f"ind.{name}.{part}"
        if not path.exists():
            raise DatasetLayoutError(f"missing {path}")
        parts[part] = _load_pickle(path)
    index_path = directory / f"ind.{name}.test.index"
    if not index_path.exists():
        raise DatasetLayoutError(f"missing {index_path}")
    test_idx = np.loadtxt(index_path, dtype=np.int64)

    allx = sp.csr_matrix(parts["allx"])
    tx = sp.csr_matrix(parts["tx"])
    ally = np.asarray(parts["ally"])
    ty = np.asarray(parts["ty"])

    test_sorted = np.sort(test_idx)
    full_range = np.arange(test_sorted.min(), test_sorted.max() + 1)

    # tx/ty rows arrive in test.index order; scatter them to their node ids,
    # leaving zero rows for any gaps in the test range (CiteSeer)
    tx_full = sp.lil_matrix((len(full_range), tx.shape[1]))
    ty_full = np.zeros((len(full_range), ty.shape[1]))
    tx_full[test_idx - full_range.min()] = tx
    ty_full[test_idx - full_range.min()] = ty

    features = sp.vstack([allx, tx_full.tocsr()]).toarray().astype(np.float64)
    labels_onehot = np.vstack([ally, ty_full])
    labels = labels_onehot.argmax(axis=1).astype(np.int64)
    labels[labels_onehot.sum(axis=1) == 0] = -1  # filler nodes without a label

    n = features.shape[0]
    graph = parts["graph"]
    pairs = [(int(u), int(v)) for u, nbrs in graph.items() for v in nbrs]
    pairs = [(u, v) for u, v in pairs if u < n and v < n]
    edges = canonical_edges(pairs, n)
    return AttributedGraph(n=n, edges=edges, features=features, labels=labels)
