"""
Filter bank construction for the PFGC encoder.
Turns a graph and its restructured pair into the dense propagation operator
(1 − μ)·F_low + μ·F_high and the high-order reconstruction target.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import structlog

from graph.graph_core import normalize
from models.base_models import AttributedGraph, GraphSource, ModelConfig, RestructuredGraphs, SpectralBasis
from models.errors import ShapeError
from network.objectives import high_order_target
from spectral.eig_cache import EigenCache
from spectral.spectral_filters import eig_sym, filter_operator

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class PropagationPlan:
    """Everything the network needs from the graph side, precomputed once."""
    operator: np.ndarray
    hs_target: np.ndarray
    basis_low: SpectralBasis
    basis_high: SpectralBasis


def propagation_operator(basis_low: SpectralBasis, basis_high: SpectralBasis, config: ModelConfig) -> np.ndarray:
    """
    Mix the low-pass and high-pass filters chosen by config.filter_combo.

    Raises:
        ShapeError: If the two bases cover different node counts
    """
    if basis_low.size != basis_high.size:
        raise ShapeError(f"bases cover {basis_low.size} and {basis_high.size} nodes")
    low_kind, high_kind = config.filter_combo.kinds()
    operator = np.zeros((basis_low.size, basis_low.size))
    # a zero-weighted branch is omitted, not multiplied by zero
    if config.mu < 1.0:
        operator += (1.0 - config.mu) * filter_operator(low_kind, basis_low)
    if config.mu > 0.0:
        operator += config.mu * filter_operator(high_kind, basis_high)
    return operator


def build_propagation(
    graph: AttributedGraph,
    restructured: Optional[RestructuredGraphs],
    config: ModelConfig,
    cache: Optional[EigenCache] = None,
) -> PropagationPlan:
    """
    Decompose the filter graphs and assemble the propagation operator.

    Args:
        graph: Original graph; its adjacency gives the L_HS target
        restructured: M and G; unused when config.graph_source is raw
        config: Model configuration
        cache: Eigen cache shared across runs on the same graphs

    Returns:
        PropagationPlan: Dense operator, L_HS target and both bases
    """
    if config.graph_source is GraphSource.RAW or restructured is None:
        low_graph = high_graph = graph.adjacency
    else:
        low_graph, high_graph = restructured.homophilic, restructured.heterophilic

    basis_low = eig_sym(normalize(low_graph).laplacian, cache)
    basis_high = basis_low if high_graph is low_graph else eig_sym(normalize(high_graph).laplacian, cache)
    logger.debug(
        "filter bases ready",
        graph_source=config.graph_source.value,
        lambda_max_low=basis_low.lambda_max,
        lambda_max_high=basis_high.lambda_max,
    )
    return PropagationPlan(
        operator=propagation_operator(basis_low, basis_high, config),
        hs_target=high_order_target(normalize(graph.adjacency).adj_norm, config.k_order),
        basis_low=basis_low,
        basis_high=basis_high,
    )
