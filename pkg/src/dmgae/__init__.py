"""Deep manifold (variational) graph auto-encoder for attributed graphs.

Learns node embeddings that preserve geodesic similarity under a
t-distribution kernel while training a (variational) graph auto-encoder,
and evaluates them with node clustering and link prediction.
"""

from .graph import AttributedGraph, adjacency, knn_graph, load_graph, normalize_adjacency
from .similarity import KernelParams, similarity_pipeline
from .training import TrainConfig, fit

__all__ = [
    "AttributedGraph",
    "adjacency",
    "knn_graph",
    "load_graph",
    "normalize_adjacency",
    "KernelParams",
    "similarity_pipeline",
    "TrainConfig",
    "fit",
]
