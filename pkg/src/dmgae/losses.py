"""Loss terms: weighted edge reconstruction, Gaussian KL, logistic manifold
loss, structure-preserving loss, and their weighted combinations."""
from __future__ import annotations

import logging
from dataclasses import dataclass, asdict
from typing import Sequence

import torch

logger = logging.getLogger(__name__)

B_EPS = 1e-7


@dataclass
class LossReport:
    recon: float
    kl: float
    manifold_prior: float
    manifold_complete: float
    total: float
    alpha: float
    beta: float

    def to_dict(self) -> dict:
        return asdict(self)


def recon_loss(a: torch.Tensor, logits: torch.Tensor) -> torch.Tensor:
    """Class-reweighted binary cross-entropy between adjacency and decoded scores.

    Positive entries are upweighted by (n^2 - 2|E|) / (2|E|) and the mean is
    rescaled by n^2 / (2 (n^2 - 2|E|)), the usual convention for the ~99.9%%
    sparse graphs this trains on. `logits` are pre-sigmoid inner products.
    """
    n = a.shape[0]
    n_pos = a.sum()
    n_total = float(n * n)
    if n_pos.item() == 0:
        logger.warning("reconstruction target has no positive entries; using unweighted BCE")
        return torch.nn.functional.binary_cross_entropy_with_logits(logits, a)
    # n_pos counts both (i,j) and (j,i), i.e. 2|E|
    pos_weight = (n_total - n_pos) / n_pos
    norm = n_total / (2.0 * (n_total - n_pos))
    bce = torch.nn.functional.binary_cross_entropy_with_logits(
        logits, a, pos_weight=pos_weight
    )
    return norm * bce


def kl_loss(mu: torch.Tensor, log_std: torch.Tensor) -> torch.Tensor:
    """KL(q || N(0, I)) averaged over nodes: (1/n) sum 0.5 (e^{2s} + mu^2 - 1 - 2s)."""
    n = mu.shape[0]
    per_entry = 0.5 * (torch.exp(2.0 * log_std) + mu**2 - 1.0 - 2.0 * log_std)
    return per_entry.sum() / n

def logistic_term(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Elementwise a log(a/b) + (1-a) log((1-a)/(1-b)) with 0 log 0 = 0.

    `b` is clamped away from {0, 1}; nonnegative, zero iff a == b.
    """
    b = torch.clamp(b, B_EPS, 1.0 - B_EPS)
    # split so b never appears inside xlogy, whose gradient is NaN at a=0
    entropy = torch.xlogy(a, a) + torch.xlogy(1.0 - a, 1.0 - a)
    cross = a * torch.log(b) + (1.0 - a) * torch.log(1.0 - b)
    return entropy - cross


def manifold_loss(p_target: torch.Tensor, p_model: torch.Tensor) -> torch.Tensor:
    """Logistic loss averaged over distinct node pairs i < j (diagonal excluded)."""
    n = p_target.shape[0]
    iu = torch.triu_indices(n, n, offset=1)
    return logistic_term(p_target[iu[0], iu[1]], p_model[iu[0], iu[1]]).mean()


def structure_loss(
    p_prior: torch.Tensor,
    p_complete: torch.Tensor,
    p_latents: Sequence[torch.Tensor],
    alpha: float,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Average over latent samples of prior-graph plus alpha-weighted
    complete-graph manifold losses. Returns (L2, prior term, complete term)."""
    if not p_latents:
        raise ValueError("need at least one latent similarity matrix")
    prior_terms = []
    complete_terms = []
    for p_z in p_latents:
        prior_terms.append(manifold_loss(p_prior, p_z))
        complete_terms.append(manifold_loss(p_complete, p_z))
    prior_mean = torch.stack(prior_terms).mean()
    complete_mean = torch.stack(complete_terms).mean()
    return prior_mean + alpha * complete_mean, prior_mean, complete_mean


def total_loss(
    l2: torch.Tensor,
    recon: torch.Tensor,
    kl: torch.Tensor | None,
    beta: float,
    variational: bool,
) -> torch.Tensor:
    """L = L2 + beta * (recon + kl) in variational mode, L' = L2 + beta * recon otherwise."""
    if variational:
        if kl is None:
            raise ValueError("variational mode requires a KL term")
        return l2 + beta * (recon + kl)
    return l2 + beta * recon
