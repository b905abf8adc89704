"""
Filter discriminativeness lab.

Checks on stochastic block model graphs that the global low-pass filter
separates clusters better than the local one when r > 1/C, and that the
local high-pass filter does better than the global one when r < 1/C. The
expected gap is evaluated in closed form and estimated by Monte-Carlo over
random unit signals.
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import structlog

from graph.graph_core import edge_homophily, homophily_ratio, normalize
from models.base_models import AttributedGraph, DiscriminativenessReport, FilterPair, SpectralBasis, Verdict
from models.errors import ConfigError, UsageError
from spectral.eig_cache import EigenCache
from spectral.spectral_filters import eig_sym, filter_response

logger = structlog.get_logger(__name__)

DEFAULT_MEAN_DEGREE = 12.0
INCONCLUSIVE_BAND = 0.05
SIGNIFICANCE = 2.0


@dataclass(frozen=True)
class SbmConfig:
    """Balanced stochastic block model: C blocks of N/C nodes each."""
    n_nodes: int
    n_clusters: int
    p_in: float
    p_out: float
    seed: int = 0
    feature_dim: int = 0
    feature_noise: float = 1.0

    def __post_init__(self):
        if self.n_clusters < 2:
            raise ConfigError(f"need at least 2 clusters, got {self.n_clusters}")
        if self.n_nodes < self.n_clusters or self.n_nodes % self.n_clusters != 0:
            raise ConfigError(f"n_nodes={self.n_nodes} is not a positive multiple of n_clusters={self.n_clusters}")
        for name, p in (("p_in", self.p_in), ("p_out", self.p_out)):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {p}")
        if self.feature_dim < 0:
            raise ConfigError("feature_dim must be non-negative")

    @property
    def block_size(self) -> int:
        return self.n_nodes // self.n_clusters

    @property
    def expected_homophily(self) -> float:
        """Expected share of a node's edges inside its block."""
        inside = self.p_in * (self.block_size - 1)
        outside = self.p_out * (self.n_nodes - self.block_size)
        total = inside + outside
        return inside / total if total > 0 else 0.0

    @classmethod
    def from_homophily(
        cls,
        n_nodes: int,
        n_clusters: int,
        homophily: float,
        mean_degree: float = DEFAULT_MEAN_DEGREE,
        seed: int = 0,
        **kwargs,
    ) -> "SbmConfig":
        """
        Pick p_in and p_out so the expected homophily is r and the expected degree d̄.

        p_in = r·d̄/(N/C − 1), p_out = (1 − r)·d̄/(N − N/C), both clipped to [0, 1].
        """
        if not 0.0 <= homophily <= 1.0:
            raise ConfigError(f"homophily must lie in [0, 1], got {homophily}")
        block = n_nodes // max(n_clusters, 1)
        p_in = homophily * mean_degree / max(block - 1, 1)
        p_out = (1.0 - homophily) * mean_degree / max(n_nodes - block, 1)
        return cls(
            n_nodes=n_nodes,
            n_clusters=n_clusters,
            p_in=float(np.clip(p_in, 0.0, 1.0)),
            p_out=float(np.clip(p_out, 0.0, 1.0)),
            seed=seed,
            **kwargs,
        )


def sbm_generate(config: SbmConfig) -> AttributedGraph:
    """
    Sample a graph from the block model.

    Labels are block ids. With feature_dim > 0 each node gets its block's
    Gaussian mean plus noise; otherwise a single constant feature column.
    """
    sizes = [config.block_size] * config.n_clusters
    probs = np.full((config.n_clusters, config.n_clusters), config.p_out)
    np.fill_diagonal(probs, config.p_in)
    sampled = nx.stochastic_block_model(sizes, probs.tolist(), seed=config.seed)
    adjacency = nx.to_numpy_array(sampled, nodelist=range(config.n_nodes), dtype=np.float64)
    labels = np.repeat(np.arange(config.n_clusters), config.block_size)

    if config.feature_dim > 0:
        rng = np.random.default_rng(config.seed)
        means = rng.normal(size=(config.n_clusters, config.feature_dim))
        features = means[labels] + config.feature_noise * rng.normal(size=(config.n_nodes, config.feature_dim))
    else:
        features = np.ones((config.n_nodes, 1))
    return AttributedGraph(
        features=features,
        adjacency=adjacency,
        labels=labels,
        n_clusters=config.n_clusters,
        name=f"sbm-n{config.n_nodes}-c{config.n_clusters}-s{config.seed}",
    )


def pair_responses(basis: SpectralBasis, pair: FilterPair) -> Tuple[np.ndarray, np.ndarray]:
    """Responses of both filters of a pair; local filters divide by the measured λ_N."""
    lambda_max = basis.lambda_max if basis.lambda_max > 0 else 1.0
    kind_a, kind_b = FilterPair(pair).kinds()
    return (
        filter_response(kind_a, basis, local_lambda_max=lambda_max),
        filter_response(kind_b, basis, local_lambda_max=lambda_max),
    )


def expected_edge_gap(basis: SpectralBasis, pair: FilterPair) -> float:
    """
    E[Δd] = Σ_t λ_t (h_a²(λ_t) − h_b²(λ_t)) / N for unit signals with iid coefficients.

    Args:
        basis: Eigenbasis of the graph's normalized Laplacian
        pair: Global filter a against local filter b

    Returns:
        float: Expected difference of the edge-distance totals
    """
    h_a, h_b = pair_responses(basis, pair)
    return float(np.sum(basis.eigvals * (h_a ** 2 - h_b ** 2)) / basis.size)


def random_unit_coefficients(n_nodes: int, n_trials: int, rng: np.random.Generator) -> np.ndarray:
    """N×T matrix of iid standard-normal columns, each scaled to unit norm."""
    coefficients = rng.standard_normal((n_nodes, n_trials))
    return coefficients / np.linalg.norm(coefficients, axis=0, keepdims=True)


def edge_distance_totals(adjacency: np.ndarray, labels: np.ndarray, filtered: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Intra-cluster and inter-cluster totals Σ_E (y_i − y_j)² per signal column.

    The distance is measured on y = D̃^{−1/2}·x̄ so the sum over all edges
    equals x̄ᵀLx̄ for the normalized Laplacian L.
    """
    scaled = filtered / np.sqrt(adjacency.sum(axis=1) + 1.0)[:, None]
    rows, cols = np.nonzero(np.triu(adjacency, k=1))
    squared = (scaled[rows] - scaled[cols]) ** 2
    intra = labels[rows] == labels[cols]
    return squared[intra].sum(axis=0), squared[~intra].sum(axis=0)


def _averaged_gap(intra: np.ndarray, inter: np.ndarray, n_nodes: int, n_clusters: int) -> np.ndarray:
    intra_mean = 2.0 * n_clusters * intra / n_nodes ** 2
    inter_mean = 2.0 * n_clusters * inter / ((n_clusters - 1) * n_nodes ** 2)
    return inter_mean - intra_mean


def mc_cluster_gap(
    graph: AttributedGraph,
    basis: SpectralBasis,
    pair: FilterPair,
    n_trials: int,
    seed: int = 0,
) -> Tuple[float, float]:
    """
    Monte-Carlo estimate of E[S̄⁽ᵃ⁾ − S̄⁽ᵇ⁾], the gain in inter-minus-intra cluster distance.

    Args:
        graph: Labelled graph whose normalized Laplacian produced basis
        basis: Eigenbasis of that Laplacian
        pair: Filters a and b
        n_trials: Number of random unit signals
        seed: Seed of the signal generator

    Returns:
        Tuple[float, float]: Mean and standard error across trials

    Raises:
        UsageError: If n_trials < 2 or the graph has no labels
    """
    if n_trials < 2:
        raise UsageError(f"need at least 2 trials for a standard error, got {n_trials}")
    if not graph.has_labels:
        raise UsageError("cluster gaps need labels")
    coefficients = random_unit_coefficients(basis.size, n_trials, np.random.default_rng(seed))
    h_a, h_b = pair_responses(basis, pair)
    gaps = []
    for response in (h_a, h_b):
        filtered = basis.eigvecs @ (response[:, None] * coefficients)
        intra, inter = edge_distance_totals(graph.adjacency, graph.labels, filtered)
        gaps.append(_averaged_gap(intra, inter, graph.n_nodes, graph.n_clusters))
    per_trial = gaps[0] - gaps[1]
    return float(per_trial.mean()), float(per_trial.std(ddof=1) / np.sqrt(n_trials))


def expected_intra_totals(graph: AttributedGraph, basis: SpectralBasis, pair: FilterPair) -> Tuple[float, float]:
    """E[S_in] under filters a and b, from the diagonal of UᵀM_inU."""
    a = graph.adjacency
    intra_adjacency = a * (graph.labels[:, None] == graph.labels[None, :])
    intra_laplacian = np.diag(intra_adjacency.sum(axis=1)) - intra_adjacency
    d_inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1) + 1.0)
    operator = d_inv_sqrt[:, None] * intra_laplacian * d_inv_sqrt[None, :]
    energy = np.einsum("it,ij,jt->t", basis.eigvecs, operator, basis.eigvecs)
    h_a, h_b = pair_responses(basis, pair)
    return float(np.sum(h_a ** 2 * energy) / basis.size), float(np.sum(h_b ** 2 * energy) / basis.size)


def predicted_cluster_gap(graph: AttributedGraph, basis: SpectralBasis, pair: FilterPair) -> Tuple[float, float]:
    """
    Closed-form E[S̄⁽ᵃ⁾ − S̄⁽ᵇ⁾] = (2C/((C−1)N²))·E[Δd]·(1 − C·r_eff).

    r_eff is the share of E[Δd] carried by intra-cluster edges. When E[Δd]
    vanishes the edge homophily stands in for it.

    Returns:
        Tuple[float, float]: Predicted gap and r_eff
    """
    n, c = graph.n_nodes, graph.n_clusters
    delta = expected_edge_gap(basis, pair)
    intra_a, intra_b = expected_intra_totals(graph, basis, pair)
    if abs(delta) > 1e-15:
        r_eff = (intra_a - intra_b) / delta
    else:
        r_eff = edge_homophily(graph.adjacency, graph.labels)
    return 2.0 * c / ((c - 1) * n ** 2) * delta * (1.0 - c * r_eff), float(r_eff)


def judge(homophily: float, n_clusters: int, mean: float, stderr: float) -> Verdict:
    """
    PASS when the gap is significant and its sign is the one the theorem predicts.

    The predicted sign is that of C·r − 1. Graphs with |1 − C·r| < 0.05 or a
    gap within 2 standard errors of zero are INCONCLUSIVE.
    """
    balance = 1.0 - n_clusters * homophily
    if abs(balance) < INCONCLUSIVE_BAND or abs(mean) <= SIGNIFICANCE * stderr:
        return Verdict.INCONCLUSIVE
    return Verdict.PASS if np.sign(mean) == -np.sign(balance) else Verdict.FAIL


def discriminativeness_report(
    graph: AttributedGraph,
    basis: SpectralBasis,
    pair: FilterPair,
    n_trials: int,
    seed: int = 0,
) -> DiscriminativenessReport:
    pair = FilterPair(pair)
    homophily = homophily_ratio(graph)
    mean, stderr = mc_cluster_gap(graph, basis, pair, n_trials, seed)
    predicted, r_eff = predicted_cluster_gap(graph, basis, pair)
    return DiscriminativenessReport(
        pair=pair,
        homophily=homophily,
        edge_homophily=edge_homophily(graph.adjacency, graph.labels),
        effective_homophily=r_eff,
        n_clusters=graph.n_clusters,
        lambda_min=basis.lambda_min,
        analytic_gap=expected_edge_gap(basis, pair),
        predicted_gap=predicted,
        mc_gap_mean=mean,
        mc_gap_stderr=stderr,
        n_trials=n_trials,
        verdict=judge(homophily, graph.n_clusters, mean, stderr),
    )


def verify_theorem(
    sweep: Sequence[SbmConfig],
    pairs: Iterable[FilterPair] = (FilterPair.H1_VS_H2, FilterPair.H3_VS_H4),
    n_trials: int = 200,
    seed: int = 0,
    cache: Optional[EigenCache] = None,
) -> List[DiscriminativenessReport]:
    """
    Run the lab over a sweep of block models.

    Args:
        sweep: Graph configurations, ideally with r on both sides of 1/C
        pairs: Filter pairs to compare on every graph
        n_trials: Random signals per (graph, pair)
        seed: Seed of the signal generator
        cache: Eigen cache for the Laplacian bases

    Returns:
        List[DiscriminativenessReport]: One report per (config, pair), sweep order
    """
    pairs = [FilterPair(p) for p in pairs]
    reports = []
    for config in sweep:
        graph = sbm_generate(config)
        basis = eig_sym(normalize(graph.adjacency).laplacian, cache)
        # the closed form assumes λ_1 ≈ 0; a large value flags a broken premise, not a failed check
        logger.info("sbm graph ready", graph=graph.name, homophily=homophily_ratio(graph), lambda_min=basis.lambda_min)
        for pair in pairs:
            report = discriminativeness_report(graph, basis, pair, n_trials, seed)
            logger.info(
                "discriminativeness checked",
                graph=graph.name,
                pair=pair.value,
                mc_mean=report.mc_gap_mean,
                predicted=report.predicted_gap,
                verdict=report.verdict.value,
            )
            reports.append(report)
    return reports
