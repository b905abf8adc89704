"""
Training objectives for the PFGC network.
Topology reconstruction (L_HS), scaled cosine feature reconstruction (L_RE)
and the self-training clustering loss (L_CLU) with its Student-t soft
assignment and sharpened target.
"""

from typing import Union

import numpy as np
import torch

ArrayLike = Union[np.ndarray, torch.Tensor]


def high_order_target(adj_norm: np.ndarray, k_order: int) -> np.ndarray:
    """Σ_{i=1..k} Ã^i, powers by repeated multiplication."""
    power = np.array(adj_norm, dtype=np.float64)
    total = power.copy()
    for _ in range(k_order - 1):
        power = power @ adj_norm
        total += power
    return total


def loss_hs(embedding: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """
    High-order structure loss (1/N²)·‖H̃H̃ᵀ − Σ Ã^i‖²_F.

    Args:
        embedding: H̃, N×d_h
        target: Precomputed Σ_{i=1..k} Ã^i (see high_order_target)
    """
    n = embedding.shape[0]
    residual = embedding @ embedding.T - target
    return (residual * residual).sum() / (n * n)


def loss_re(features: torch.Tensor, reconstruction: torch.Tensor) -> torch.Tensor:
    """
    Scaled cosine error Σ_i (1 − cos(X_i, X̄_i))².

    Rows where either side has zero norm use cos = 0, contributing exactly 1.
    """
    dot = (features * reconstruction).sum(dim=1)
    norm_sq = (features * features).sum(dim=1) * (reconstruction * reconstruction).sum(dim=1)
    valid = norm_sq > 0
    cosine = torch.where(valid, dot / torch.sqrt(torch.where(valid, norm_sq, torch.ones_like(norm_sq))), torch.zeros_like(dot))
    return ((1.0 - cosine) ** 2).sum()


def soft_assign(embedding: torch.Tensor, centers: torch.Tensor, beta: float = 1.0) -> torch.Tensor:
    """
    Student-t soft assignment p_ij ∝ (1 + ‖H̃_i − c_j‖²/β)^{−(β+1)/2}.

    Returns:
        torch.Tensor: N×C row-stochastic matrix
    """
    dist_sq = ((embedding[:, None, :] - centers[None, :, :]) ** 2).sum(dim=2)
    kernel = (1.0 + dist_sq / beta) ** (-(beta + 1.0) / 2.0)
    return kernel / kernel.sum(dim=1, keepdim=True)


def target_distribution(soft: torch.Tensor) -> torch.Tensor:
    """
    Sharpened target q_ij ∝ p_ij² / Σ_i p_ij.

    Clusters whose column of P sums to zero contribute zero instead of NaN.
    """
    column_mass = soft.sum(dim=0, keepdim=True)
    safe_mass = torch.where(column_mass > 0, column_mass, torch.ones_like(column_mass))
    weight = torch.where(column_mass > 0, soft * soft / safe_mass, torch.zeros_like(soft))
    row_mass = weight.sum(dim=1, keepdim=True)
    return weight / torch.where(row_mass > 0, row_mass, torch.ones_like(row_mass))


def loss_clu(soft: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """KL(Q ‖ P) = Σ q log(q/p) with 0·log0 = 0; Q carries no gradient."""
    target = target.detach()
    positive = target > 0
    safe_target = torch.where(positive, target, torch.ones_like(target))
    terms = torch.where(positive, target * (torch.log(safe_target) - torch.log(soft)), torch.zeros_like(target))
    return terms.sum()


def predict(soft: ArrayLike) -> np.ndarray:
    """Hard labels z_i = argmax_j p_ij; ties go to the smallest j."""
    if isinstance(soft, torch.Tensor):
        soft = soft.detach().cpu().numpy()
    return np.argmax(np.asarray(soft), axis=1).astype(np.int64)
