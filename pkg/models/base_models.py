"""
Base models and interfaces for the PFGC toolkit.
This file defines the domain types shared by every package and the
interfaces that concrete loaders and configuration managers implement.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from models.errors import ConfigError, DataError, ShapeError


class GraphFormat(Enum):
    """On-disk dataset layouts understood by the loaders."""
    CANONICAL_CSV = "canonical_csv"
    WEBKB = "webkb"
    PLANETOID = "planetoid"


class FilterKind(Enum):
    """The four spectral filters compared by the toolkit."""
    GLOBAL_LOW_PASS = "h1"
    LOCAL_LOW_PASS = "h2"
    GLOBAL_HIGH_PASS = "h3"
    LOCAL_HIGH_PASS = "h4"

    @property
    def is_global(self) -> bool:
        return self in (FilterKind.GLOBAL_LOW_PASS, FilterKind.GLOBAL_HIGH_PASS)


class FilterCombo(Enum):
    """Low-pass/high-pass filter pairs used by the encoder."""
    PFGC = "PFGC"
    PFGC1 = "PFGC1"
    PFGC2 = "PFGC2"
    PFGC3 = "PFGC3"

    def kinds(self) -> Tuple[FilterKind, FilterKind]:
        """Return (filter on M, filter on G)."""
        return _COMBO_KINDS[self]


_COMBO_KINDS = {
    FilterCombo.PFGC: (FilterKind.GLOBAL_LOW_PASS, FilterKind.LOCAL_HIGH_PASS),
    FilterCombo.PFGC1: (FilterKind.LOCAL_LOW_PASS, FilterKind.LOCAL_HIGH_PASS),
    FilterCombo.PFGC2: (FilterKind.GLOBAL_LOW_PASS, FilterKind.GLOBAL_HIGH_PASS),
    FilterCombo.PFGC3: (FilterKind.LOCAL_LOW_PASS, FilterKind.GLOBAL_HIGH_PASS),
}


class GraphSource(Enum):
    """Which graphs feed the encoder filters."""
    RESTRUCTURED = "restructured"
    RAW = "raw"


class Activation(Enum):
    """Nonlinearity between encoder layers; the final layer is always linear."""
    RELU = "relu"
    IDENTITY = "identity"


class MaskBand(Enum):
    """Attention-weight bands masked in the SE analysis."""
    TOP_THIRD = "top_third"
    MID_THIRD = "mid_third"
    BOTTOM_THIRD = "bottom_third"
    NONE = "none"


class FilterPair(Enum):
    """Global-versus-local comparisons checked by the theorem lab."""
    H1_VS_H2 = "h1_vs_h2"
    H3_VS_H4 = "h3_vs_h4"

    def kinds(self) -> Tuple[FilterKind, FilterKind]:
        if self is FilterPair.H1_VS_H2:
            return FilterKind.GLOBAL_LOW_PASS, FilterKind.LOCAL_LOW_PASS
        return FilterKind.GLOBAL_HIGH_PASS, FilterKind.LOCAL_HIGH_PASS


class Verdict(Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class AttributedGraph:
    """
    Undirected attributed graph with optional ground-truth labels.

    The constructor validates the invariants every downstream operation
    relies on: symmetric binary adjacency without self-loops, finite
    features, and labels that use every value in [0, C).
    """
    features: np.ndarray
    adjacency: np.ndarray
    labels: Optional[np.ndarray] = None
    n_clusters: Optional[int] = None
    name: str = "graph"

    def __post_init__(self):
        x, a = self.features, self.adjacency
        if x.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {x.shape}")
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] != x.shape[0]:
            raise ShapeError(f"adjacency has {a.shape[0]} rows but features have {x.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite entries")
        if not np.array_equal(a, a.T):
            raise ShapeError("adjacency is not symmetric")
        if np.any(np.diag(a) != 0):
            raise ShapeError("adjacency has self-loops")
        if self.labels is not None:
            labels = self.labels
            if labels.shape != (x.shape[0],):
                raise ShapeError(f"labels must have length {x.shape[0]}, got shape {labels.shape}")
            n_clusters = self.n_clusters if self.n_clusters is not None else int(labels.max()) + 1
            if labels.min() < 0 or labels.max() >= n_clusters:
                raise DataError(f"labels must lie in [0, {n_clusters})")
            if np.unique(labels).size != n_clusters:
                raise DataError("labels do not use every cluster id at least once")
            object.__setattr__(self, "n_clusters", n_clusters)

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, k=1)))

    @property
    def has_labels(self) -> bool:
        return self.labels is not None


@dataclass(frozen=True)
class NormalizedOperators:
    """Renormalized adjacency and the matching normalized Laplacian."""
    adj_norm: np.ndarray
    laplacian: np.ndarray


@dataclass(frozen=True)
class SimilarityKernels:
    """Cosine similarity in attribute space (K) and topology space (B)."""
    attr_sim: np.ndarray
    topo_sim: np.ndarray


@dataclass(frozen=True)
class RestructuredGraphs:
    """Homophilic graph M and heterophilic graph G built from one input graph."""
    homophilic: np.ndarray
    heterophilic: np.ndarray
    epsilon: float
    top_k: int = 5


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenvectors U (columns) and ascending eigenvalues of a symmetric matrix."""
    eigvecs: np.ndarray
    eigvals: np.ndarray
    source_hash: str

    @property
    def size(self) -> int:
        return self.eigvals.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.eigvals[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigvals[-1])


@dataclass(frozen=True)
class CommonalityReport:
    """Per-edge neighbour-commonality verdicts scored against labels."""
    edges: np.ndarray
    jaccard: np.ndarray
    predicted_homophilic: np.ndarray
    truly_homophilic: np.ndarray
    homophilic_recall: float
    heterophilic_recall: float
    homophilic_precision: float
    heterophilic_precision: float

    def summary(self) -> Dict[str, float]:
        return {
            "n_edges": int(self.edges.shape[0]),
            "homophilic_edges": int(self.truly_homophilic.sum()),
            "heterophilic_edges": int((~self.truly_homophilic).sum()),
            "homophilic_recall": self.homophilic_recall,
            "heterophilic_recall": self.heterophilic_recall,
            "homophilic_precision": self.homophilic_precision,
            "heterophilic_precision": self.heterophilic_precision,
        }


@dataclass(frozen=True)
class ClusterMetrics:
    """Clustering quality of one prediction against ground truth."""
    acc: float
    nmi: float
    matched_permutation: Dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class DiscriminativenessReport:
    """Outcome of one (graph, filter pair) check of the discriminativeness theorem."""
    pair: FilterPair
    homophily: float
    edge_homophily: float
    effective_homophily: float
    n_clusters: int
    lambda_min: float
    analytic_gap: float
    predicted_gap: float
    mc_gap_mean: float
    mc_gap_stderr: float
    n_trials: int
    verdict: Verdict

    def to_row(self) -> Dict[str, Any]:
        return {
            "r": self.homophily,
            "pair": self.pair.value,
            "analytic_gap": self.analytic_gap,
            "mc_mean": self.mc_gap_mean,
            "mc_stderr": self.mc_gap_stderr,
            "verdict": self.verdict.value,
            "predicted_gap": self.predicted_gap,
            "edge_r": self.edge_homophily,
            "effective_r": self.effective_homophily,
            "lambda_min": self.lambda_min,
            "n_trials": self.n_trials,
        }


@dataclass(frozen=True)
class ModelConfig:
    """
    Hyper-parameters of one network and its training run.

    Validation happens on construction so a bad value never reaches the trainer.
    """
    n_layers: int = 2
    hidden_dims: Tuple[int, ...] = (256, 64)
    se_ratio: int = 4
    mu: float = 0.3
    k_order: int = 5
    beta: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    lr: float = 1e-2
    epochs: int = 200
    warmup_epochs: int = 50
    q_update_interval: int = 5
    seed: int = 0
    filter_combo: FilterCombo = FilterCombo.PFGC
    use_se: bool = True
    graph_source: GraphSource = GraphSource.RESTRUCTURED
    hidden_activation: Activation = Activation.RELU
    kmeans_restarts: int = 10

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        object.__setattr__(self, "filter_combo", FilterCombo(self.filter_combo))
        object.__setattr__(self, "graph_source", GraphSource(self.graph_source))
        object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))

        if self.n_layers < 1 or len(self.hidden_dims) != self.n_layers:
            raise ConfigError(f"n_layers={self.n_layers} does not match hidden_dims={list(self.hidden_dims)}")
        if any(d < 1 for d in self.hidden_dims):
            raise ConfigError("hidden dimensions must be positive")
        if self.se_ratio < 1 or self.hidden_dims[-1] % self.se_ratio != 0:
            raise ConfigError(f"final hidden dimension {self.hidden_dims[-1]} is not divisible by se_ratio={self.se_ratio}")
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigError(f"mu must lie in [0, 1], got {self.mu}")
        if self.k_order < 1:
            raise ConfigError(f"k_order must be at least 1, got {self.k_order}")
        if not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ConfigError("loss weights gamma1 and gamma2 must be non-negative")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.epochs < 0 or self.warmup_epochs < 0:
            raise ConfigError("epochs and warmup_epochs must be non-negative")
        if self.q_update_interval < 1:
            raise ConfigError("q_update_interval must be at least 1")
        if self.kmeans_restarts < 1:
            raise ConfigError("kmeans_restarts must be at least 1")

    @property
    def hidden_dim(self) -> int:
        return self.hidden_dims[-1]

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready echo of every field."""
        return {
            "n_layers": self.n_layers,
            "hidden_dims": list(self.hidden_dims),
            "se_ratio": self.se_ratio,
            "mu": self.mu,
            "k_order": self.k_order,
            "beta": self.beta,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "lr": self.lr,
            "epochs": self.epochs,
            "warmup_epochs": self.warmup_epochs,
            "q_update_interval": self.q_update_interval,
            "seed": self.seed,
            "filter_combo": self.filter_combo.value,
            "use_se": self.use_se,
            "graph_source": self.graph_source.value,
            "hidden_activation": self.hidden_activation.value,
            "kmeans_restarts": self.kmeans_restarts,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class ModelState:
    """
    Snapshot of every trainable tensor, in the orientation H @ W.

    layer_weights[l] is d_l × d_{l+1}, se_down is d_h × d_h/ratio, se_up is
    d_h/ratio × d_h, decoder_weights is d_h × d. centers stays None until the
    warm-up k-means has run.
    """
    layer_weights: List[np.ndarray]
    se_down: np.ndarray
    se_up: np.ndarray
    decoder_weights: np.ndarray
    n_clusters: int
    centers: Optional[np.ndarray] = None
    optimizer_moments: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    optimizer_step: int = 0

    def parameters(self) -> Dict[str, np.ndarray]:
        """Named parameter tensors, in a fixed order."""
        named = {f"layer_weights.{i}": w for i, w in enumerate(self.layer_weights)}
        named["se_down"] = self.se_down
        named["se_up"] = self.se_up
        named["decoder"] = self.decoder_weights
        if self.centers is not None:
            named["centers"] = self.centers
        return named

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.parameters().values())


@dataclass
class TrainReport:
    """
    Outcome of one training run.

    losses holds one dict per epoch with l_re, l_hs, l_clu and total.
    """
    losses: List[Dict[str, float]]
    soft_assignment: np.ndarray
    labels: np.ndarray
    embedding: np.ndarray
    attention: np.ndarray
    wall_clock_seconds: float = 0.0

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        report: Dict[str, Any] = {
            "epochs": len(self.losses),
            "losses": self.losses,
            "final_loss": self.losses[-1]["total"] if self.losses else None,
            "labels": self.labels.tolist(),
        }
        if include_timing:
            report["wall_clock_seconds"] = self.wall_clock_seconds
        return report


# Abstract Base Classes (Interfaces)

class IGraphLoader(ABC):
    """
    Any dataset loader must implement this interface.
    """

    @abstractmethod
    def load(self, path: Path) -> AttributedGraph:
        """
        Load a dataset directory.

        Args:
            path: Directory holding the dataset files

        Returns:
            AttributedGraph: The validated graph
        """
        pass


class IConfigurationManager(ABC):
    """
    Interface for configuration management.
    Handles all configuration-related operations.
    """

    @abstractmethod
    def get_cache_dir(self) -> Path:
        """Directory for eigendecomposition sidecars."""
        pass

    @abstractmethod
    def get_dataset_profile(self, name: str) -> Dict[str, Any]:
        """Known statistics and default hyper-parameters for a dataset."""
        pass

    @abstractmethod
    def load_configuration(self, config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> Any:
        """Load a run configuration from file and flag overrides."""
        pass


# Abstract Base Classes for Implementation

@dataclass
class RawGraph:
    """Unvalidated loader output: features, an edge list and raw labels."""
    features: np.ndarray
    edges: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = "graph"


class BaseGraphLoader(IGraphLoader):
    """
    Base implementation for dataset loaders.
    Follows Template Method Pattern - subclasses only parse their layout,
    cleaning and validation are shared.
    """

    def __init__(self, graph_format: GraphFormat):
        self._format = graph_format

    def get_format(self) -> GraphFormat:
        return self._format

    @abstractmethod
    def _read_raw(self, path: Path) -> RawGraph:
        """Parse the files of one layout. Must be implemented by subclasses."""
        pass

    def load(self, path: Path) -> AttributedGraph:
        """
        Load a dataset using the Template Method Pattern.
        Symmetrizes the edge list, strips self-loops and duplicates, and
        remaps labels to 0..C-1 before validation.
        """
        raw = self._read_raw(Path(path))
        n_nodes = raw.features.shape[0]
        adjacency = self._edges_to_adjacency(raw.edges, n_nodes)
        labels, n_clusters = self._remap_labels(raw.labels)
        return AttributedGraph(
            features=np.ascontiguousarray(raw.features, dtype=np.float64),
            adjacency=adjacency,
            labels=labels,
            n_clusters=n_clusters,
            name=raw.name,
        )

    @staticmethod
    def _edges_to_adjacency(edges: np.ndarray, n_nodes: int) -> np.ndarray:
        adjacency = np.zeros((n_nodes, n_nodes), dtype=np.float64)
        if edges.size == 0:
            return adjacency
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.min() < 0 or edges.max() >= n_nodes:
            raise ShapeError(
                f"edge endpoints must lie in [0, {n_nodes}), found range [{edges.min()}, {edges.max()}]"
            )
        adjacency[edges[:, 0], edges[:, 1]] = 1.0
        adjacency = np.maximum(adjacency, adjacency.T)
        np.fill_diagonal(adjacency, 0.0)
        return adjacency

    @staticmethod
    def _remap_labels(labels: Optional[np.ndarray]) -> Tuple[Optional[np.ndarray], Optional[int]]:
        if labels is None:
            return None, None
        labels = np.asarray(labels)
        if labels.dtype.kind in "iu":
            known = labels >= 0
            if not known.any():
                return None, None
            if not known.all():
                raise DataError(f"{int((~known).sum())} nodes have unknown labels; partial labelling is not supported")
        values, remapped = np.unique(labels, return_inverse=True)
        return remapped.astype(np.int64), int(values.size)
