"""
Dataset loaders for the PFGC toolkit.
Implements the Open/Closed Principle - a new layout is a new subclass,
shared cleaning lives in BaseGraphLoader.
"""

import pickle
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd
import scipy.sparse as sp
import structlog

from models.base_models import AttributedGraph, BaseGraphLoader, GraphFormat, IGraphLoader, RawGraph
from models.errors import GraphLoadError, ShapeError

logger = structlog.get_logger(__name__)


def _require(path: Path) -> Path:
    if not path.is_file():
        raise GraphLoadError(f"missing dataset file: {path}")
    return path


class CanonicalCSVLoader(BaseGraphLoader):
    """
    Loader for the interchange layout: nodes.csv (id,label,f0..) and edges.csv (src,dst).
    """

    def __init__(self):
        super().__init__(GraphFormat.CANONICAL_CSV)

    def _read_raw(self, path: Path) -> RawGraph:
        nodes = pd.read_csv(_require(path / "nodes.csv"))
        if "id" not in nodes.columns or "label" not in nodes.columns:
            raise GraphLoadError(f"{path / 'nodes.csv'} must have 'id' and 'label' columns")
        nodes = nodes.sort_values("id", kind="stable")
        ids = nodes["id"].to_numpy()
        if not np.array_equal(ids, np.arange(ids.size)):
            raise ShapeError("node ids must be dense 0-based integers")
        feature_columns = [c for c in nodes.columns if c not in ("id", "label")]
        features = nodes[feature_columns].to_numpy(dtype=np.float64)

        edges = self._read_edges(_require(path / "edges.csv"))
        return RawGraph(
            features=features,
            edges=edges,
            labels=nodes["label"].to_numpy(dtype=np.int64),
            name=path.name,
        )

    @staticmethod
    def _read_edges(edge_path: Path) -> np.ndarray:
        try:
            edges = pd.read_csv(edge_path)
        except pd.errors.EmptyDataError:
            return np.empty((0, 2), dtype=np.int64)
        if list(edges.columns[:2]) != ["src", "dst"]:
            raise GraphLoadError(f"{edge_path} must have header 'src,dst'")
        return edges[["src", "dst"]].to_numpy(dtype=np.int64)


class WebKBLoader(BaseGraphLoader):
    """
    Loader for the WebKB layout with tab-separated node and edge files.
    """

    NODE_FILE = "out1_node_feature_label.txt"
    EDGE_FILE = "out1_graph_edges.txt"

    def __init__(self):
        super().__init__(GraphFormat.WEBKB)

    def _read_raw(self, path: Path) -> RawGraph:
        nodes = pd.read_csv(_require(path / self.NODE_FILE), sep="\t")
        nodes = nodes.sort_values(nodes.columns[0], kind="stable")
        ids = nodes.iloc[:, 0].to_numpy(dtype=np.int64)
        if not np.array_equal(ids, np.arange(ids.size)):
            raise ShapeError("node ids must be dense 0-based integers")
        features = np.array(
            [np.array(row.split(","), dtype=np.float64) for row in nodes.iloc[:, 1].astype(str)]
        )
        labels = nodes.iloc[:, 2].to_numpy(dtype=np.int64)

        edge_frame = pd.read_csv(_require(path / self.EDGE_FILE), sep="\t")
        edges = edge_frame.iloc[:, :2].to_numpy(dtype=np.int64)
        return RawGraph(features=features, edges=edges, labels=labels, name=path.name)


class PlanetoidLoader(BaseGraphLoader):
    """
    Loader for citation datasets, in either the raw <name>.content/<name>.cites
    layout or the pickled ind.<name>.* layout.
    """

    PICKLED_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")

    def __init__(self):
        super().__init__(GraphFormat.PLANETOID)

    def _read_raw(self, path: Path) -> RawGraph:
        content_files = sorted(path.glob("*.content"))
        if content_files:
            return self._read_content_layout(content_files[0])
        graph_files = sorted(path.glob("ind.*.graph"))
        if graph_files:
            name = graph_files[0].name.split(".")[1]
            return self._read_pickled_layout(path, name)
        raise GraphLoadError(f"no '*.content' or 'ind.*.graph' files found in {path}")

    def _read_content_layout(self, content_path: Path) -> RawGraph:
        name = content_path.stem
        content = pd.read_csv(content_path, sep=r"\s+", header=None, dtype=str)
        node_ids = content.iloc[:, 0].tolist()
        index: Dict[str, int] = {pid: i for i, pid in enumerate(node_ids)}
        features = content.iloc[:, 1:-1].to_numpy(dtype=np.float64)
        labels = content.iloc[:, -1].to_numpy()

        cites = pd.read_csv(_require(content_path.with_suffix(".cites")), sep=r"\s+", header=None, dtype=str)
        edges: List[List[int]] = []
        dropped = 0
        for cited, citing in zip(cites.iloc[:, 0], cites.iloc[:, 1]):
            if cited in index and citing in index:
                edges.append([index[citing], index[cited]])
            else:
                dropped += 1
        if dropped:
            logger.warning("citations to unknown nodes dropped", dataset=name, dropped=dropped)
        return RawGraph(
            features=features,
            edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
            labels=labels,
            name=name,
        )

    def _read_pickled_layout(self, path: Path, name: str) -> RawGraph:
        parts = {}
        for part in self.PICKLED_PARTS:
            with open(_require(path / f"ind.{name}.{part}"), "rb") as handle:
                parts[part] = pickle.load(handle, encoding="latin1")
        test_index = np.loadtxt(_require(path / f"ind.{name}.test.index"), dtype=np.int64)
        test_range = np.sort(test_index)

        tx, ty = parts["tx"], parts["ty"]
        full_range = test_range.max() - test_range.min() + 1
        if full_range != test_range.size:
            # isolated test nodes are absent from tx/ty; pad them with zero rows
            tx_extended = sp.lil_matrix((full_range, parts["x"].shape[1]))
            tx_extended[test_range - test_range.min(), :] = tx
            tx = tx_extended
            ty_extended = np.zeros((full_range, parts["y"].shape[1]))
            ty_extended[test_range - test_range.min(), :] = ty
            ty = ty_extended

        features = sp.vstack((parts["allx"], tx)).tolil()
        features[test_index, :] = features[test_range, :]
        one_hot = np.vstack((parts["ally"], ty))
        one_hot[test_index, :] = one_hot[test_range, :]

        n_nodes = features.shape[0]
        edges = [
            (src, dst)
            for src, neighbours in parts["graph"].items()
            for dst in neighbours
            if src < n_nodes and dst < n_nodes
        ]
        return RawGraph(
            features=np.asarray(features.todense(), dtype=np.float64),
            edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
            labels=one_hot.argmax(axis=1).astype(np.int64),
            name=name,
        )


class GraphLoaderFactory:
    """
    Factory class for creating dataset loaders.
    Implements the Factory Pattern to pick a loader from the declared format.
    """

    _LOADERS = {
        GraphFormat.CANONICAL_CSV: CanonicalCSVLoader,
        GraphFormat.WEBKB: WebKBLoader,
        GraphFormat.PLANETOID: PlanetoidLoader,
    }

    @staticmethod
    def create_loader(graph_format: GraphFormat) -> IGraphLoader:
        """
        Create a loader for the specified layout.

        Args:
            graph_format: Declared dataset layout

        Returns:
            IGraphLoader: Concrete loader instance
        """
        return GraphLoaderFactory._LOADERS[GraphFormat(graph_format)]()


def load_graph(path: Path, graph_format: GraphFormat = GraphFormat.CANONICAL_CSV) -> AttributedGraph:
    """
    Load and validate a dataset directory.

    Args:
        path: Dataset directory
        graph_format: Layout of the files in the directory

    Returns:
        AttributedGraph: Symmetrized, self-loop free graph with labels remapped to 0..C-1

    Raises:
        GraphLoadError: If a required file is missing
        ShapeError: If the adjacency cannot be square over the node set
        DataError: If features contain NaN
    """
    path = Path(path)
    if not path.is_dir():
        raise GraphLoadError(f"dataset directory not found: {path}")
    graph = GraphLoaderFactory.create_loader(graph_format).load(path)
    logger.info(
        "dataset loaded",
        dataset=graph.name,
        n_nodes=graph.n_nodes,
        n_features=graph.n_features,
        n_edges=graph.n_edges,
        n_clusters=graph.n_clusters,
    )
    return graph
