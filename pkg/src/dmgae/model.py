"""FC feature transform, two-layer GCN variational encoder, reparameterized
sampling, and inner-product decoder."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import torch
import torch.nn as nn

LOG_STD_CLAMP = 10.0

CHECKPOINT_VERSION = 1


def glorot_(w: torch.Tensor, generator: torch.Generator | None = None) -> None:
    fan_in, fan_out = w.shape[0], w.shape[1]
    limit = (6.0 / (fan_in + fan_out)) ** 0.5
    with torch.no_grad():
        w.uniform_(-limit, limit, generator=generator)


class GraphEncoderModel(nn.Module):
    """FC stack followed by a shared GCN layer with mean / log-std heads.

    Propagation uses the normalized adjacency: H = relu(A~ X' W0),
    mu = A~ H Wmu, log_std = A~ H Wstd (clamped).
    """

    def __init__(
        self,
        in_dim: int,
        fc_hidden: int = 256,
        fc_layers: int = 1,
        gcn_hidden: int = 256,
        latent_dim: int = 16,
        seed: int | None = None,
    ):
        super().__init__()
        gen = None
        if seed is not None:
            gen = torch.Generator()
            gen.manual_seed(seed)
        dims = [in_dim] + [fc_hidden] * fc_layers
        self.fc = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1]) for i in range(fc_layers)
        )
        self.w_shared = nn.Parameter(torch.empty(fc_hidden if fc_layers else in_dim, gcn_hidden))
        self.w_mu = nn.Parameter(torch.empty(gcn_hidden, latent_dim))
        self.w_logstd = nn.Parameter(torch.empty(gcn_hidden, latent_dim))
        self.latent_dim = latent_dim
        for layer in self.fc:
            glorot_(layer.weight.data.T, gen)
            nn.init.zeros_(layer.bias)
        glorot_(self.w_shared, gen)
        glorot_(self.w_mu, gen)
        glorot_(self.w_logstd, gen)

    def fc_forward(self, x: torch.Tensor) -> torch.Tensor:
        """ReLU-activated fully connected transform of the raw features."""
        for layer in self.fc:
            x = torch.relu(layer(x))
        return x

    def encode(self, x_prime: torch.Tensor, a_norm: torch.Tensor):
        """Two-layer GCN producing the posterior mean and log standard deviation."""
        h = torch.relu(torch.sparse.mm(a_norm, x_prime @ self.w_shared))
        mu = torch.sparse.mm(a_norm, h @ self.w_mu)
        log_std = torch.sparse.mm(a_norm, h @ self.w_logstd)
        log_std = torch.clamp(log_std, -LOG_STD_CLAMP, LOG_STD_CLAMP)
        return mu, log_std

    def forward(self, x: torch.Tensor, a_norm: torch.Tensor):
        return self.encode(self.fc_forward(x), a_norm)


def sample_latent(
    mu: torch.Tensor,
    log_std: torch.Tensor,
    k: int,
    generator: torch.Generator,
    variational: bool = True,
) -> list[tuple[torch.Tensor, torch.Tensor]]:
    """Draw k reparameterized samples z = mu + exp(log_std) * eps.

    Non-variational mode returns k copies of mu with zero noise. Returns
    (z, eps) pairs so runs are reproducible from the recorded noise.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    samples = []
    for _ in range(k):
        if variational:
            eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
            z = mu + torch.exp(log_std) * eps
        else:
            eps = torch.zeros_like(mu)
            z = mu
        samples.append((z, eps))
    return samples


def decode_logits(z: torch.Tensor) -> torch.Tensor:
    """Inner-product pre-sigmoid edge scores z z^T."""
    return z @ z.T


def decode(z: torch.Tensor) -> torch.Tensor:
    """Edge probability matrix sigmoid(z_i . z_j); symmetric by construction."""
    return torch.sigmoid(decode_logits(z))


def sparse_to_torch(a: sp.spmatrix) -> torch.Tensor:
    """Scipy sparse matrix -> torch sparse COO (coalesced, float32)."""
    coo = a.tocoo()
    idx = torch.from_numpy(np.stack([coo.row, coo.col]).astype(np.int64))
    vals = torch.from_numpy(coo.data.astype(np.float32))
    return torch.sparse_coo_tensor(idx, vals, size=coo.shape).coalesce()


def save_checkpoint(model: GraphEncoderModel, directory: str | Path, extra: dict | None = None) -> None:
    """Write a versioned checkpoint: tensors.npz plus a manifest of names/shapes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tensors = {name: p.detach().cpu().numpy() for name, p in model.state_dict().items()}
    np.savez(directory / "tensors.npz", **tensors)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "tensors": [
            {"name": name, "shape": list(arr.shape)} for name, arr in tensors.items()
        ],
    }
    if extra:
        manifest.update(extra)
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_checkpoint(model: GraphEncoderModel, directory: str | Path) -> None:
    directory = Path(directory)
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"unsupported checkpoint format version {manifest.get('format_version')!r}"
        )
    data = np.load(directory / "tensors.npz")
    state = {name: torch.from_numpy(data[name]) for name in data.files}
    model.load_state_dict(state)
