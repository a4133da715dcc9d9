"""Training orchestration: input-space similarity precomputation, mini-batch
epochs with K latent samples, loss assembly, and Adam updates."""
from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field, asdict, fields
from typing import Callable, Optional

import numpy as np
import torch

from . import similarity as sim
from .graph import AttributedGraph, adjacency, knn_graph, normalize_adjacency
from .losses import LossReport, kl_loss, recon_loss, structure_loss, total_loss
from .model import (
    GraphEncoderModel,
    decode_logits,
    sample_latent,
    sparse_to_torch,
)

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Raised when a loss or gradient goes non-finite; params are rolled back."""


@dataclass
class TrainConfig:
    """All hyperparameters of one training run."""

    alpha: float = 1.0  # weight of the complete-graph manifold term
    beta: float = 1.0  # weight of the reconstruction / ELBO term
    nu_input: float = 100.0  # t-kernel degrees of freedom in the input space
    nu_latent: float = 1.0  # t-kernel degrees of freedom in the latent space
    q_p: float = 15.0  # perplexity target for bandwidth calibration
    k_samples: int = 5  # latent samples per step (K)
    fc_layers: int = 1
    fc_hidden: int = 256
    gcn_hidden: int = 256
    latent_dim: int = 16
    lr: float = 0.001
    batch_size: int = 0  # 0 means min(n, 1024)
    epochs: int = 400
    seed: int = 0
    variational: bool = True  # False selects the non-probabilistic DMGAE path
    use_structure: bool = True  # False disables L2 (plain (V)GAE ablation)
    prior_graph: str = "given"  # "given" or "knn"
    knn_k: int = 10
    normalize_features: bool = False  # opt-in row-L2 feature normalization

    def validate(self, n: Optional[int] = None) -> list[str]:
        errs = []
        for name in ("alpha", "beta"):
            if getattr(self, name) < 0:
                errs.append(f"{name} must be >= 0")
        for name in ("nu_input", "nu_latent", "lr"):
            if getattr(self, name) <= 0:
                errs.append(f"{name} must be > 0")
        if self.q_p <= 1:
            errs.append("q_p must be > 1")
        for name in ("k_samples", "fc_hidden", "gcn_hidden", "latent_dim", "knn_k"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1")
        if self.fc_layers < 0:
            errs.append("fc_layers must be >= 0")
        if self.epochs < 0:
            errs.append("epochs must be >= 0")
        if self.batch_size < 0:
            errs.append("batch_size must be >= 0")
        if n is not None and self.batch_size > n:
            errs.append(f"batch_size must be <= n={n}")
        if self.prior_graph not in ("given", "knn"):
            errs.append("prior_graph must be 'given' or 'knn'")
        return errs

    def resolved_batch_size(self, n: int) -> int:
        return self.batch_size if self.batch_size else min(n, 1024)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainState:
    model: GraphEncoderModel
    optimizer: torch.optim.Adam
    epoch: int
    x: torch.Tensor  # (n, f) model input
    a_norm: torch.Tensor  # sparse normalized adjacency
    adj_dense: torch.Tensor  # (n, n) float 0/1 reconstruction target
    prior_mask: torch.Tensor  # (n, n) bool prior-graph edge mask
    p_prior: torch.Tensor  # cached input-space similarity on the prior graph
    p_complete: torch.Tensor  # cached input-space similarity on the complete graph
    noise_gen: torch.Generator
    batch_rng: np.random.Generator


def prepared_features(g: AttributedGraph, cfg: TrainConfig) -> np.ndarray:
    x = g.features
    if cfg.normalize_features:
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.maximum(norms, 1e-12)
    return x


def prior_edges(g: AttributedGraph, cfg: TrainConfig, x: np.ndarray) -> np.ndarray:
    if cfg.prior_graph == "knn":
        return knn_graph(x, cfg.knn_k).edges
    return g.edges


def precompute(g: AttributedGraph, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Input-space similarity matrices on the prior graph and the complete graph.

    Computed once before training with per-row calibrated bandwidths.
    """
    x = prepared_features(g, cfg)
    params = sim.KernelParams(nu=cfg.nu_input, q_p=cfg.q_p)
    edges = prior_edges(g, cfg, x)
    p_prior = sim.similarity_pipeline(x, edges, "prior", params, space="input")
    p_complete = sim.similarity_pipeline(x, None, "complete", params, space="input")
    return p_prior, p_complete


def init_state(g: AttributedGraph, cfg: TrainConfig) -> TrainState:
    errs = cfg.validate(g.n)
    if errs:
        raise ValueError("; ".join(errs))
    x_np = prepared_features(g, cfg)
    p_prior_np, p_complete_np = precompute(g, cfg)

    model = GraphEncoderModel(
        in_dim=g.num_features,
        fc_hidden=cfg.fc_hidden,
        fc_layers=cfg.fc_layers,
        gcn_hidden=cfg.gcn_hidden,
        latent_dim=cfg.latent_dim,
        seed=cfg.seed,
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    a = adjacency(g)
    a_norm = sparse_to_torch(normalize_adjacency(a))
    adj_dense = torch.from_numpy(a.toarray().astype(np.float32))

    pe = prior_edges(g, cfg, x_np)
    prior_mask = torch.zeros((g.n, g.n), dtype=torch.bool)
    if len(pe):
        i = torch.from_numpy(pe[:, 0])
        j = torch.from_numpy(pe[:, 1])
        prior_mask[i, j] = True
        prior_mask[j, i] = True

    noise_gen = torch.Generator()
    noise_gen.manual_seed(cfg.seed + 1)
    return TrainState(
        model=model,
        optimizer=optimizer,
        epoch=0,
        x=torch.from_numpy(x_np.astype(np.float32)),
        a_norm=a_norm,
        adj_dense=adj_dense,
        prior_mask=prior_mask,
        p_prior=torch.from_numpy(p_prior_np.astype(np.float32)),
        p_complete=torch.from_numpy(p_complete_np.astype(np.float32)),
        noise_gen=noise_gen,
        batch_rng=np.random.default_rng(cfg.seed + 2),
    )


def train_epoch(state: TrainState, cfg: TrainConfig) -> LossReport:
    """One pass over shuffled mini-batches; returns the epoch-mean loss report."""
    n = state.x.shape[0]
    bs = cfg.resolved_batch_size(n)
    perm = state.batch_rng.permutation(n)
    start_params = copy.deepcopy(state.model.state_dict())
    start_opt = copy.deepcopy(state.optimizer.state_dict())

    sums = np.zeros(5)  # recon, kl, manifold_prior, manifold_complete, total
    n_batches = 0
    for lo in range(0, n, bs):
        idx_np = np.sort(perm[lo : lo + bs])
        idx = torch.from_numpy(idx_np)
        state.optimizer.zero_grad()

        mu, log_std = state.model(state.x, state.a_norm)
        samples = sample_latent(
            mu, log_std, cfg.k_samples, state.noise_gen, cfg.variational
        )

        adj_bb = state.adj_dense[idx][:, idx]
        recon_terms = [
            recon_loss(adj_bb, decode_logits(z[idx])) for z, _ in samples
        ]
        recon = torch.stack(recon_terms).mean()
        kl = kl_loss(mu, log_std) if cfg.variational else torch.zeros(())

        if cfg.use_structure:
            mask_bb = state.prior_mask[idx][:, idx]
            p_latents = [
                sim.latent_similarity(z[idx], mask_bb, cfg.nu_latent)
                for z, _ in samples
            ]
            l2, m_prior, m_complete = structure_loss(
                state.p_prior[idx][:, idx],
                state.p_complete[idx][:, idx],
                p_latents,
                cfg.alpha,
            )
        else:
            l2 = torch.zeros(())
            m_prior = torch.zeros(())
            m_complete = torch.zeros(())

        loss = total_loss(l2, recon, kl, cfg.beta, cfg.variational)
        if not torch.isfinite(loss):
            state.model.load_state_dict(start_params)
            state.optimizer.load_state_dict(start_opt)
            raise TrainingDiverged(
                f"non-finite loss at epoch {state.epoch}, batch {n_batches}"
            )
        loss.backward()
        for name, p in state.model.named_parameters():
            if p.grad is not None and not torch.isfinite(p.grad).all():
                state.model.load_state_dict(start_params)
                state.optimizer.load_state_dict(start_opt)
                raise TrainingDiverged(
                    f"non-finite gradient in {name} at epoch {state.epoch}"
                )
        state.optimizer.step()

        sums += np.array(
            [recon.item(), kl.item(), m_prior.item(), m_complete.item(), loss.item()]
        )
        n_batches += 1

    state.epoch += 1
    means = sums / max(n_batches, 1)
    return LossReport(
        recon=float(means[0]),
        kl=float(means[1]),
        manifold_prior=float(means[2]),
        manifold_complete=float(means[3]),
        total=float(means[4]),
        alpha=cfg.alpha,
        beta=cfg.beta,
    )


def embedding_of(state: TrainState) -> np.ndarray:
    """Deterministic output embedding: the posterior mean over the full graph."""
    with torch.no_grad():
        mu, _ = state.model(state.x, state.a_norm)
    return mu.numpy().astype(np.float64)


def fit(
    g: AttributedGraph,
    cfg: TrainConfig,
    epoch_callback: Optional[Callable[[int, LossReport], None]] = None,
    checkpoint_callback: Optional[Callable[[int, GraphEncoderModel], None]] = None,
    checkpoint_every: int = 50,
) -> tuple[TrainState, np.ndarray, list[LossReport]]:
    """Run the full training loop; returns (state, embedding, per-epoch reports)."""
    state = init_state(g, cfg)
    reports: list[LossReport] = []
    for epoch in range(cfg.epochs):
        report = train_epoch(state, cfg)
        reports.append(report)
        if epoch_callback is not None:
            epoch_callback(epoch, report)
        if checkpoint_callback is not None and (epoch + 1) % checkpoint_every == 0:
            checkpoint_callback(epoch, state.model)
    return state, embedding_of(state), reports
