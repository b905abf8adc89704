"""
Graph restructuring for the PFGC toolkit.
Builds a homophilic graph M and a heterophilic graph G from features and
topology, without looking at labels.
"""

from pathlib import Path
from typing import Any, Dict

import numpy as np
import pandas as pd
import structlog
from sklearn.metrics.pairwise import cosine_similarity

from graph.graph_core import adjacency_homophily
from models.base_models import AttributedGraph, RestructuredGraphs, SimilarityKernels
from models.errors import ConfigError

logger = structlog.get_logger(__name__)

DEFAULT_EPSILON = 0.01
GRID_EPSILONS = (0.001, 0.05)
DEFAULT_TOP_K = 5


def _cosine_kernel(rows: np.ndarray) -> np.ndarray:
    """Cosine similarity with zero rows mapped to zero similarity."""
    sim = np.clip(cosine_similarity(rows), -1.0, 1.0)
    sim = 0.5 * (sim + sim.T)
    nonzero = np.linalg.norm(rows, axis=1) > 0
    sim[~nonzero, :] = 0.0
    sim[:, ~nonzero] = 0.0
    np.fill_diagonal(sim, nonzero.astype(np.float64))
    return sim


def similarity_kernels(graph: AttributedGraph) -> SimilarityKernels:
    """
    Cosine similarity between nodes in attribute space and topology space.

    Args:
        graph: Input graph; B uses the raw adjacency rows

    Returns:
        SimilarityKernels: K (features) and B (adjacency rows)
    """
    return SimilarityKernels(
        attr_sim=_cosine_kernel(graph.features),
        topo_sim=_cosine_kernel(graph.adjacency),
    )


def build_homophilic(kernels: SimilarityKernels, epsilon: float) -> np.ndarray:
    """
    Keep pairs that are similar in both spaces: M_ij = 1 iff (K_ij·B_ij)² ≥ ε.

    Raises:
        ConfigError: If epsilon is not positive
    """
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    score = (kernels.attr_sim * kernels.topo_sim) ** 2
    homophilic = (score >= epsilon).astype(np.float64)
    return np.maximum(homophilic, homophilic.T)


def build_heterophilic(kernels: SimilarityKernels, homophilic: np.ndarray, top_k: int = DEFAULT_TOP_K) -> np.ndarray:
    """
    Complementary graph: score (1 - K) ⊙ (1 - M), keep each row's top_k
    positive scores (ties go to the smaller node index), symmetrize by max.

    Raises:
        ConfigError: If top_k is not in [1, N)
    """
    n_nodes = homophilic.shape[0]
    if top_k < 1 or top_k >= n_nodes:
        raise ConfigError(f"top_k must lie in [1, {n_nodes}), got {top_k}")
    score = (1.0 - kernels.attr_sim) * (1.0 - homophilic)
    np.fill_diagonal(score, 0.0)

    order = np.argsort(-score, axis=1, kind="stable")[:, :top_k]
    rows = np.repeat(np.arange(n_nodes), top_k)
    cols = order.ravel()
    keep = score[rows, cols] > 0

    heterophilic = np.zeros_like(score)
    heterophilic[rows[keep], cols[keep]] = 1.0
    return np.maximum(heterophilic, heterophilic.T)


def restructure(graph: AttributedGraph, epsilon: float = DEFAULT_EPSILON, top_k: int = DEFAULT_TOP_K) -> RestructuredGraphs:
    """
    Build M and G for one graph.

    Args:
        graph: Input graph
        epsilon: Threshold on the squared joint similarity
        top_k: Edges kept per node in G before symmetrization

    Returns:
        RestructuredGraphs: Binary symmetric M and G
    """
    kernels = similarity_kernels(graph)
    homophilic = build_homophilic(kernels, epsilon)
    heterophilic = build_heterophilic(kernels, homophilic, top_k)
    logger.info(
        "graph restructured",
        dataset=graph.name,
        epsilon=epsilon,
        top_k=top_k,
        m_edges=int(np.count_nonzero(np.triu(homophilic, k=1))),
        g_edges=int(np.count_nonzero(np.triu(heterophilic, k=1))),
    )
    return RestructuredGraphs(homophilic=homophilic, heterophilic=heterophilic, epsilon=epsilon, top_k=top_k)


def restructure_report(graph: AttributedGraph, restructured: RestructuredGraphs) -> Dict[str, Any]:
    """Edge counts of A, M, G and, for labelled graphs, their homophily ratios."""
    report: Dict[str, Any] = {
        "epsilon": restructured.epsilon,
        "top_k": restructured.top_k,
        "edges": {
            "A": graph.n_edges,
            "M": int(np.count_nonzero(np.triu(restructured.homophilic, k=1))),
            "G": int(np.count_nonzero(np.triu(restructured.heterophilic, k=1))),
        },
    }
    if graph.has_labels:
        report["homophily"] = {
            "A": adjacency_homophily(graph.adjacency, graph.labels),
            "M": adjacency_homophily(restructured.homophilic, graph.labels),
            "G": adjacency_homophily(restructured.heterophilic, graph.labels),
        }
    return report


def write_edge_csv(matrix: np.ndarray, path: Path) -> int:
    """
    Write the upper-triangular edges of a binary symmetric matrix as src,dst rows.

    Returns:
        int: Number of edges written
    """
    rows, cols = np.nonzero(np.triu(matrix, k=1))
    frame = pd.DataFrame({"src": rows, "dst": cols})
    frame.to_csv(path, index=False, lineterminator="\n")
    return len(frame)
