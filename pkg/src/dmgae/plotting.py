"""2D PCA projection of embeddings with CSV and SVG scatter output."""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402


def pca_2d(x: np.ndarray) -> np.ndarray:
    """Project onto the top-2 principal axes of the centered data.

    Component signs are fixed (largest-magnitude loading positive) so the
    projection is deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    centered = x - x.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / max(len(x) - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:2]
    comps = vecs[:, order]
    for k in range(comps.shape[1]):
        pivot = np.argmax(np.abs(comps[:, k]))
        if comps[pivot, k] < 0:
            comps[:, k] = -comps[:, k]
    proj = centered @ comps
    if proj.shape[1] < 2:
        proj = np.pad(proj, ((0, 0), (0, 2 - proj.shape[1])))
    return proj


def write_scatter(
    coords: np.ndarray,
    labels: Optional[np.ndarray],
    csv_path: str | Path,
    svg_path: str | Path,
) -> None:
    """Write (x, y, label) CSV rows and an SVG scatter colored by label."""
    n = len(coords)
    lab = labels if labels is not None else np.zeros(n, dtype=np.int64)
    with open(csv_path, "w") as fh:
        fh.write("x,y,label\n")
        for (x, y), l in zip(coords, lab):
            fh.write(f"{x:.8g},{y:.8g},{int(l)}\n")

    fig, ax = plt.subplots(figsize=(6, 6))
    ax.scatter(coords[:, 0], coords[:, 1], c=lab, cmap="tab10", s=8, linewidths=0)
    ax.set_xlabel("PC1")
    ax.set_ylabel("PC2")
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
