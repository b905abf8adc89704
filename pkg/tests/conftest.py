"""Shared fixtures: small labelled graphs, on-disk datasets and compact model configs."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import structlog

from config.configuration_manager import ConfigurationManager
from models.base_models import AttributedGraph, ModelConfig
from spectral.eig_cache import EigenCache
from theorem.theorem_lab import SbmConfig, sbm_generate


def cycle_graph(n_nodes: int, n_features: int = 2) -> AttributedGraph:
    adjacency = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes):
        adjacency[i, (i + 1) % n_nodes] = adjacency[(i + 1) % n_nodes, i] = 1.0
    return AttributedGraph(features=np.ones((n_nodes, n_features)), adjacency=adjacency, name=f"cycle{n_nodes}")


def random_graph(n_nodes: int, p: float, rng: np.random.Generator) -> np.ndarray:
    upper = np.triu(rng.random((n_nodes, n_nodes)) < p, k=1).astype(np.float64)
    return upper + upper.T


def write_canonical(graph: AttributedGraph, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    nodes = pd.DataFrame(graph.features, columns=[f"f{i}" for i in range(graph.n_features)])
    nodes.insert(0, "label", graph.labels if graph.has_labels else -1)
    nodes.insert(0, "id", np.arange(graph.n_nodes))
    nodes.to_csv(directory / "nodes.csv", index=False)
    rows, cols = np.nonzero(np.triu(graph.adjacency, k=1))
    pd.DataFrame({"src": rows, "dst": cols}).to_csv(directory / "edges.csv", index=False)
    return directory


@pytest.fixture
def labelled_graph() -> AttributedGraph:
    """Two-block graph with block-dependent Gaussian features."""
    return sbm_generate(SbmConfig(n_nodes=24, n_clusters=2, p_in=0.4, p_out=0.05, seed=3, feature_dim=8, feature_noise=0.5))


@pytest.fixture
def probe_graph() -> AttributedGraph:
    return sbm_generate(SbmConfig(n_nodes=12, n_clusters=2, p_in=0.6, p_out=0.1, seed=5, feature_dim=4, feature_noise=0.3))


@pytest.fixture
def canonical_dataset(tmp_path, labelled_graph) -> Path:
    return write_canonical(labelled_graph, tmp_path / "toy")


@pytest.fixture
def eigen_cache() -> EigenCache:
    return EigenCache()


@pytest.fixture
def small_config() -> ModelConfig:
    return ModelConfig(
        n_layers=2,
        hidden_dims=(8, 4),
        se_ratio=2,
        epochs=12,
        warmup_epochs=4,
        q_update_interval=2,
        kmeans_restarts=2,
    )


@pytest.fixture
def data_root() -> Path:
    root = ConfigurationManager().get_data_dir()
    if root is None or not root.is_dir():
        pytest.skip("PFGC_DATA_DIR is not set")
    return root


@pytest.fixture(autouse=True)
def _reset_logging():
    yield
    structlog.reset_defaults()
