"""Geodesic distance matrices, t-distribution kernel, perplexity calibration,
and symmetrized joint similarities.

The input-space path (numpy) is precomputed once before training; the
latent-space path (torch, `latent_similarity`) is differentiable and uses
fixed bandwidth sigma=1 and offset rho=0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

# scale factor for the marker distance assigned to non-adjacent pairs
LARGE_FACTOR = 1e6

# conditional probabilities are kept strictly below 1 so that the
# symmetrization and logistic loss stay well defined
P_MAX = 1.0 - 1e-7

SIGMA_LO = 1e-10
SIGMA_HI = 1e10
CALIBRATION_TOL = 1e-5
CALIBRATION_ITERS = 64


@dataclass(frozen=True)
class KernelParams:
    """t-kernel hyperparameters for one similarity computation."""

    nu: float
    q_p: float = 15.0

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("degrees of freedom nu must be positive")
        if self.q_p <= 1:
            raise ValueError("perplexity q_p must exceed 1")


@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise distances with a finite marker value for non-adjacent pairs."""

    values: np.ndarray  # (n, n), symmetric, zero diagonal, all finite
    large: float  # marker assigned to non-adjacent pairs (prior mode)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def finite_mask(self) -> np.ndarray:
        """True for off-diagonal entries that carry a real distance."""
        mask = self.values < self.large
        np.fill_diagonal(mask, False)
        return mask


def t_coefficient(nu: float) -> float:
    """Normalizing coefficient sqrt(2*pi) * Gamma((nu+1)/2) / (sqrt(nu*pi) * Gamma(nu/2))."""
    log_c = (
        0.5 * math.log(2.0 * math.pi)
        + math.lgamma((nu + 1.0) / 2.0)
        - 0.5 * math.log(nu * math.pi)
        - math.lgamma(nu / 2.0)
    )
    return math.exp(log_c)


def t_kernel(d, sigma, nu: float):
    """Heavy-tailed similarity C_nu * (1 + d/(sigma*nu))^(-(nu+1)/2).

    Negative distances (floating error after the min-shift) are clamped to 0.
    Works elementwise on arrays; `sigma` may be a scalar or a column vector.
    """
    d = np.maximum(d, 0.0)
    return t_coefficient(nu) * np.power(1.0 + d / (sigma * nu), -(nu + 1.0) / 2.0)


def geodesic_distances(
    coords: np.ndarray,
    edges: Optional[np.ndarray],
    mode: str,
) -> DistanceMatrix:
    """Pairwise Euclidean distance matrix over node coordinates.

    mode="complete": every off-diagonal pair gets its Euclidean distance.
    mode="prior": non-adjacent pairs are set to a large marker value
    (LARGE_FACTOR times the max finite pairwise distance).
    """
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    sq = np.sum(coords**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * coords @ coords.T
    dist = np.sqrt(np.maximum(d2, 0.0))
    np.fill_diagonal(dist, 0.0)
    dist = 0.5 * (dist + dist.T)

    d_max = float(dist.max()) if n > 1 else 0.0
    large = LARGE_FACTOR * (d_max if d_max > 0 else 1.0)

    if mode == "complete":
        return DistanceMatrix(values=dist, large=large)
    if mode != "prior":
        raise ValueError(f"unknown mode {mode!r}")

    out = np.full((n, n), large)
    np.fill_diagonal(out, 0.0)
    if edges is not None and len(edges):
        i, j = edges[:, 0], edges[:, 1]
        out[i, j] = dist[i, j]
        out[j, i] = dist[j, i]
    return DistanceMatrix(values=out, large=large)


def preprocess_distances(dm: DistanceMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Shift each row by its smallest real off-diagonal distance: d_i|j = d_ij - rho_i.

    rho_i ignores the diagonal and the large-marker entries; a row with no
    real neighbor gets rho_i = 0. Returns (shifted matrix, rho vector); the
    shifted matrix is generally asymmetric.
    """
    vals = dm.values
    mask = dm.finite_mask()
    masked = np.where(mask, vals, np.inf)
    rho = masked.min(axis=1)
    rho = np.where(np.isfinite(rho), rho, 0.0)
    out = vals - rho[:, None]
    np.fill_diagonal(out, 0.0)
    return out, rho


def calibrate_sigma(
    row: np.ndarray, nu: float, q_p: float, *, skip: Optional[np.ndarray] = None
) -> tuple[float, bool]:
    """Binary-search the bandwidth so the row's similarity mass hits log2(q_p).

    `row` is a preprocessed distance row; `skip` marks entries excluded from
    the sum (the diagonal entry at least). Returns (sigma, flagged); flagged
    means the target was unreachable and the upper bracket was returned.
    """
    sigmas, flags = calibrate_sigma_all(row[None, :], nu, q_p,
                                        skip=None if skip is None else skip[None, :])
    return float(sigmas[0]), bool(flags[0])


def calibrate_sigma_all(
    d_cond: np.ndarray, nu: float, q_p: float, *, skip: Optional[np.ndarray] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-row bandwidth calibration over a preprocessed matrix.

    By default only the diagonal is excluded from each row's sum.
    """
    n_rows, n_cols = d_cond.shape
    if skip is None:
        skip = np.zeros_like(d_cond, dtype=bool)
        if n_rows == n_cols:
            np.fill_diagonal(skip, True)
    include = ~skip
    target = math.log2(q_p)
    d = np.maximum(d_cond, 0.0)

    lo = np.full(n_rows, SIGMA_LO)
    hi = np.full(n_rows, SIGMA_HI)

    def mass(sigma):
        p = t_kernel(d, sigma[:, None], nu)
        return np.sum(np.where(include, p, 0.0), axis=1)

    # rows whose mass at the upper bracket still falls short are unreachable
    flagged = mass(hi) < target - CALIBRATION_TOL

    sigma = np.sqrt(lo * hi)
    done = np.zeros(n_rows, dtype=bool)
    for _ in range(CALIBRATION_ITERS):
        mid = 0.5 * (lo + hi)
        s = mass(mid)
        too_low = s < target
        lo = np.where(too_low & ~done, mid, lo)
        hi = np.where(~too_low & ~done, mid, hi)
        hit = np.abs(s - target) <= CALIBRATION_TOL
        sigma = np.where(hit & ~done, mid, sigma)
        done |= hit
    sigma = np.where(done, sigma, 0.5 * (lo + hi))
    sigma = np.where(flagged, SIGMA_HI, sigma)
    return sigma, flagged


def conditional_similarity(
    d_cond: np.ndarray, sigma: np.ndarray | float, nu: float
) -> np.ndarray:
    """Row-wise kernel application with diagonal zeroed and values capped below 1."""
    sig = np.asarray(sigma, dtype=np.float64)
    if sig.ndim == 1:
        sig = sig[:, None]
    p = t_kernel(d_cond, sig, nu)
    p = np.clip(p, 0.0, P_MAX)
    if p.shape[0] == p.shape[1]:
        np.fill_diagonal(p, 0.0)
    return p


def symmetrize(p_cond: np.ndarray) -> np.ndarray:
    """Joint probability p_ij = p_i|j + p_j|i - 2 p_i|j p_j|i, zero diagonal."""
    p = p_cond + p_cond.T - 2.0 * p_cond * p_cond.T
    np.fill_diagonal(p, 0.0)
    return np.clip(p, 0.0, 1.0)


def similarity_pipeline(
    coords: np.ndarray,
    edges: Optional[np.ndarray],
    mode: str,
    params: KernelParams,
    space: str = "input",
) -> np.ndarray:
    """Full distance -> shift -> kernel -> symmetrize composition.

    space="input": per-row bandwidths are calibrated to the perplexity target.
    space="latent": sigma_i = 1 and rho_i = 0, no calibration.
    """
    dm = geodesic_distances(coords, edges, mode)
    if space == "input":
        d_cond, _ = preprocess_distances(dm)
        sigma, _ = calibrate_sigma_all(d_cond, params.nu, params.q_p)
        p_cond = conditional_similarity(d_cond, sigma, params.nu)
    elif space == "latent":
        p_cond = conditional_similarity(dm.values, 1.0, params.nu)
    else:
        raise ValueError(f"unknown space {space!r}")
    return symmetrize(p_cond)


def latent_similarity(z: torch.Tensor, adj_mask: torch.Tensor, nu: float) -> torch.Tensor:
    """Differentiable prior-graph similarity in the latent space.

    Euclidean distances on edges, a large constant elsewhere; sigma=1, rho=0;
    t-kernel then symmetrization. `adj_mask` is a boolean (b, b) matrix.
    """
    sq = (z * z).sum(dim=1)
    d2 = torch.clamp(sq[:, None] + sq[None, :] - 2.0 * z @ z.T, min=0.0)
    d2 = 0.5 * (d2 + d2.T)
    eye = torch.eye(z.shape[0], dtype=torch.bool, device=z.device)
    keep = adj_mask & ~eye
    # sqrt only where the value is used; clamping keeps the backward finite
    # even if two embeddings coincide exactly
    d_edges = torch.sqrt(torch.clamp(torch.where(keep, d2, torch.ones_like(d2)), min=1e-24))
    # the marker stays differentiable so autograd matches finite differences
    large = LARGE_FACTOR * torch.clamp(torch.sqrt(d2.max() + 1e-24), min=1e-12)
    d = torch.where(keep, d_edges, large.expand_as(d2))
    d = torch.where(eye, torch.zeros_like(d), d)
    c = t_coefficient(nu)
    p = c * torch.pow(1.0 + d / nu, -(nu + 1.0) / 2.0)
    p = torch.clamp(p, max=P_MAX)
    p = p.masked_fill(eye, 0.0)
    p = p + p.T - 2.0 * p * p.T
    p = p.masked_fill(eye, 0.0)
    return torch.clamp(p, 0.0, 1.0)


def export_tsv(matrix: np.ndarray, path) -> None:
    """Row-major TSV dump with %.10g formatting (debugging aid)."""
    with open(path, "w") as fh:
        for row in np.asarray(matrix):
            fh.write("\t".join(f"{v:.10g}" for v in row) + "\n")
