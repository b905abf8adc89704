"""
The PFGC network: filter-bank encoder, squeeze-and-excitation block,
linear feature decoder and trainable cluster centers.
All tensors are float64.
"""

from typing import Dict, NamedTuple, Optional

import numpy as np
import torch
from torch import nn

from models.base_models import Activation, ModelConfig, ModelState, SpectralBasis
from network.propagation import propagation_operator

DTYPE = torch.float64


class NetworkOutput(NamedTuple):
    hidden: torch.Tensor
    embedding: torch.Tensor
    attention: torch.Tensor
    reconstruction: torch.Tensor


def squeeze_excite(hidden: torch.Tensor, se_down: torch.Tensor, se_up: torch.Tensor) -> torch.Tensor:
    """Per-feature gate s̃ = sigmoid(relu(s·W₁)·W₂), s the column mean of H."""
    squeeze = hidden.mean(dim=0)
    return torch.sigmoid(torch.relu(squeeze @ se_down) @ se_up)


def _glorot(n_in: int, n_out: int) -> torch.Tensor:
    weight = torch.empty(n_in, n_out, dtype=DTYPE)
    nn.init.xavier_uniform_(weight)
    return weight


class PFGCNetwork(nn.Module):
    """
    Encoder H^{(l)} = P·H^{(l−1)}·W^{(l−1)} with P the mixed filter operator,
    followed by SE recalibration and a single linear decoder.

    Weight matrices are stored in the H @ W orientation so a ModelState maps
    onto parameters one to one.
    """

    def __init__(self, n_features: int, n_clusters: int, config: ModelConfig):
        super().__init__()
        self.config = config
        dims = [n_features, *config.hidden_dims]
        self.layer_weights = nn.ParameterList(
            [nn.Parameter(_glorot(d_in, d_out)) for d_in, d_out in zip(dims[:-1], dims[1:])]
        )
        hidden = config.hidden_dim
        squeezed = hidden // config.se_ratio
        self.se_down = nn.Parameter(_glorot(hidden, squeezed))
        self.se_up = nn.Parameter(_glorot(squeezed, hidden))
        self.decoder = nn.Parameter(_glorot(hidden, n_features))
        self.centers = nn.Parameter(torch.zeros(n_clusters, hidden, dtype=DTYPE))
        self.centers_initialized = False

    @property
    def n_clusters(self) -> int:
        return self.centers.shape[0]

    def encode(self, features: torch.Tensor, operator: torch.Tensor) -> torch.Tensor:
        h = features
        last = len(self.layer_weights) - 1
        for index, weight in enumerate(self.layer_weights):
            h = operator @ (h @ weight)
            if index < last and self.config.hidden_activation is Activation.RELU:
                h = torch.relu(h)
        return h

    def attention(self, hidden: torch.Tensor) -> torch.Tensor:
        if not self.config.use_se:
            return torch.ones(hidden.shape[1], dtype=hidden.dtype)
        return squeeze_excite(hidden, self.se_down, self.se_up)

    def forward(self, features: torch.Tensor, operator: torch.Tensor) -> NetworkOutput:
        hidden = self.encode(features, operator)
        attention = self.attention(hidden)
        embedding = hidden * attention[None, :]
        return NetworkOutput(hidden, embedding, attention, embedding @ self.decoder)

    def set_centers(self, centers: np.ndarray) -> None:
        with torch.no_grad():
            self.centers.copy_(torch.as_tensor(centers, dtype=DTYPE))
        self.centers_initialized = True

    def to_state(self, optimizer: Optional[torch.optim.Optimizer] = None) -> ModelState:
        """Detached numpy copy of all parameters and, if given, the Adam moments."""
        moments: Dict[str, tuple] = {}
        step = 0
        if optimizer is not None:
            for name, param in self.named_parameters():
                slot = optimizer.state.get(param)
                if slot:
                    moments[name] = (
                        slot["exp_avg"].detach().numpy().copy(),
                        slot["exp_avg_sq"].detach().numpy().copy(),
                    )
                    step = max(step, int(slot["step"]))
        return ModelState(
            layer_weights=[w.detach().numpy().copy() for w in self.layer_weights],
            se_down=self.se_down.detach().numpy().copy(),
            se_up=self.se_up.detach().numpy().copy(),
            decoder_weights=self.decoder.detach().numpy().copy(),
            n_clusters=self.n_clusters,
            centers=self.centers.detach().numpy().copy() if self.centers_initialized else None,
            optimizer_moments=moments,
            optimizer_step=step,
        )

    @classmethod
    def from_state(cls, state: ModelState, config: ModelConfig) -> "PFGCNetwork":
        network = cls(state.layer_weights[0].shape[0], state.n_clusters, config)
        with torch.no_grad():
            for param, value in zip(network.layer_weights, state.layer_weights):
                param.copy_(torch.as_tensor(value, dtype=DTYPE))
            network.se_down.copy_(torch.as_tensor(state.se_down, dtype=DTYPE))
            network.se_up.copy_(torch.as_tensor(state.se_up, dtype=DTYPE))
            network.decoder.copy_(torch.as_tensor(state.decoder_weights, dtype=DTYPE))
        if state.centers is not None:
            network.set_centers(state.centers)
        return network


def initialize_state(n_features: int, n_clusters: int, config: ModelConfig) -> ModelState:
    """Fresh Glorot-initialized state, seeded by config.seed."""
    torch.manual_seed(config.seed)
    return PFGCNetwork(n_features, n_clusters, config).to_state()


def encode(
    features: np.ndarray,
    basis_low: SpectralBasis,
    basis_high: SpectralBasis,
    state: ModelState,
    config: ModelConfig,
) -> np.ndarray:
    """
    Run the encoder on numpy inputs.

    Args:
        features: X, N×d
        basis_low: Basis of the homophilic graph's Laplacian
        basis_high: Basis of the heterophilic graph's Laplacian
        state: Weights to use
        config: Model configuration (μ, filter combo, activation)

    Returns:
        np.ndarray: H, N×d_h
    """
    operator = torch.as_tensor(propagation_operator(basis_low, basis_high, config), dtype=DTYPE)
    network = PFGCNetwork.from_state(state, config)
    with torch.no_grad():
        hidden = network.encode(torch.as_tensor(features, dtype=DTYPE), operator)
    return hidden.numpy()


def se_block(hidden: np.ndarray, state: ModelState, use_se: bool = True) -> np.ndarray:
    """H̃ = H scaled column-wise by s̃ = sigmoid(relu(mean(H)·W₁)·W₂)."""
    if not use_se:
        return np.array(hidden, dtype=np.float64)
    h = torch.as_tensor(hidden, dtype=DTYPE)
    gate = squeeze_excite(h, torch.as_tensor(state.se_down, dtype=DTYPE), torch.as_tensor(state.se_up, dtype=DTYPE))
    return (h * gate[None, :]).numpy()
