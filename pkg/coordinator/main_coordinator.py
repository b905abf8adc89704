"""
Main coordinator for the PFGC toolkit.
Implements the Dependency Inversion Principle - each command-line pipeline
is assembled here from the graph, restructure, spectral, network, evaluation
and theorem packages, and every report file is written from here.
"""

import hashlib
import itertools
import json
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
import structlog
from pydantic import ValidationError

from cli.models import GridPointResult, MetricsReport, RunConfig, SeedMetrics
from config.configuration_manager import ConfigurationManager
from evaluation.clustering_metrics import attention_mask_report, evaluate_clustering
from graph.graph_core import classify_edges_by_commonality, graph_statistics
from graph.loaders import load_graph
from models.base_models import (
    AttributedGraph,
    DiscriminativenessReport,
    FilterCombo,
    GraphSource,
    ModelState,
    RestructuredGraphs,
    TrainReport,
)
from models.errors import ConfigError, UsageError
from network.checkpoint import load_checkpoint, save_checkpoint
from network.trainer import infer, train
from restructure.restructuring import restructure, restructure_report, write_edge_csv
from spectral.eig_cache import EigenCache
from theorem.theorem_lab import SbmConfig, verify_theorem
from utils.logging_setup import configure_logging
from utils.report_writer import read_csv_rows, write_csv, write_json

logger = structlog.get_logger(__name__)

GAMMA_VALUES = [1e-3, 1e-2, 1e-1, 1.0, 10.0]
DEFAULT_LATTICE: Dict[str, List[Any]] = {
    "mu": [0.1, 0.3, 0.5, 0.7],
    "gamma1": GAMMA_VALUES,
    "gamma2": GAMMA_VALUES,
    "lr": [1e-2, 1e-3],
    "epsilon": [0.001, 0.05],
}
# Swept only when a grid file names them; otherwise fixed at the run config's value.
STRUCTURAL_AXES = ("k_order", "graph_source", "filter_combo", "use_se")
LATTICE_AXES = tuple(DEFAULT_LATTICE) + STRUCTURAL_AXES
THEOREM_COLUMNS = ["r", "pair", "analytic_gap", "mc_mean", "mc_stderr", "verdict"]


def _as_flag(value: Any) -> bool:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    raise ValueError(f"expected true or false, got {value!r}")


def _as_order(value: Any) -> int:
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"expected an integer, got {value!r}")
    return int(value)


AXIS_TYPES: Dict[str, Callable[[Any], Any]] = {
    "mu": float,
    "gamma1": float,
    "gamma2": float,
    "lr": float,
    "epsilon": float,
    "k_order": _as_order,
    "graph_source": lambda value: GraphSource(value).value,
    "filter_combo": lambda value: FilterCombo(value).value,
    "use_se": _as_flag,
}


def parse_sweep(sweep: str) -> List[float]:
    """
    Parse 'r=start:stop:step' (inclusive stop) or 'r=a,b,c' into homophily values.

    Raises:
        ConfigError: On any other form
    """
    name, _, body = sweep.partition("=")
    if name.strip() != "r" or not body:
        raise ConfigError(f"sweep must look like 'r=0.05:0.95:0.1', got '{sweep}'")
    try:
        if ":" in body:
            start, stop, step = (float(part) for part in body.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            values = np.arange(start, stop + step / 2, step)
        else:
            values = np.array([float(part) for part in body.split(",")])
    except ValueError as e:
        raise ConfigError(f"invalid sweep '{sweep}': {e}") from e
    return [round(float(v), 10) for v in values]


def _run_value(run_config: RunConfig, axis: str) -> Any:
    value = getattr(run_config, axis)
    return value.value if isinstance(value, Enum) else value


def load_lattice(grid: str, run_config: RunConfig) -> Dict[str, List[Any]]:
    """
    Lattice axes: the default grid, or a JSON file whose missing axes fall back to the run config.

    Raises:
        ConfigError: If the file is unreadable, names an unknown axis or holds an invalid value
    """
    if grid == "default":
        axes: Dict[str, Any] = dict(DEFAULT_LATTICE)
    else:
        try:
            axes = json.loads(Path(grid).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read grid file {grid}: {e}") from e
        if not isinstance(axes, dict):
            raise ConfigError(f"grid file {grid} must hold a JSON object")
        unknown = set(axes) - set(LATTICE_AXES)
        if unknown:
            raise ConfigError(f"unknown grid axes: {sorted(unknown)}")

    lattice: Dict[str, List[Any]] = {}
    for axis in LATTICE_AXES:
        values = axes.get(axis, [_run_value(run_config, axis)])
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid axis '{axis}' must be a non-empty list")
        try:
            lattice[axis] = [AXIS_TYPES[axis](value) for value in values]
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value on grid axis '{axis}': {e}") from e
    return lattice


def lattice_points(lattice: Dict[str, List[Any]], seeds: List[int]) -> Iterator[Tuple[Dict[str, Any], int]]:
    """Points in lattice order: axes vary slowest to fastest as listed, seeds innermost."""
    for values in itertools.product(*(lattice[axis] for axis in LATTICE_AXES)):
        point = dict(zip(LATTICE_AXES, values))
        for seed in seeds:
            yield point, seed


def point_key(point: Dict[str, Any], seed: int) -> str:
    payload = json.dumps({"point": point, "seed": seed}, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def point_config(run_config: RunConfig, point: Dict[str, Any]) -> RunConfig:
    """
    The run configuration with one lattice point applied.

    Raises:
        ConfigError: If the point puts a setting out of range
    """
    try:
        return RunConfig.model_validate({**run_config.echo(), **point})
    except ValidationError as e:
        raise ConfigError(f"invalid grid point {point}: {e}") from e


def _train_seed(
    graph: AttributedGraph,
    restructured: RestructuredGraphs,
    run_config: RunConfig,
    seed: int,
    cache: EigenCache,
) -> Tuple[ModelState, TrainReport, SeedMetrics]:
    model_config = run_config.to_model_config(seed)
    state, report = train(graph, restructured, model_config, n_clusters=run_config.n_clusters or graph.n_clusters, cache=cache)
    final_loss = report.losses[-1]["total"] if report.losses else None
    if graph.has_labels:
        metrics = evaluate_clustering(report.labels, graph.labels)
        seed_metrics = SeedMetrics(seed=seed, acc=metrics.acc, nmi=metrics.nmi, final_loss=final_loss)
    else:
        seed_metrics = SeedMetrics(seed=seed, final_loss=final_loss)
    logger.info("seed finished", seed=seed, acc=seed_metrics.acc, nmi=seed_metrics.nmi)
    return state, report, seed_metrics


def _grid_worker(payload: Dict[str, Any]) -> Dict[str, Any]:
    """Evaluate one lattice point in a worker process."""
    configure_logging(payload["log_level"], payload["log_json"])
    run_config = RunConfig.model_validate(payload["config"])
    graph = load_graph(Path(run_config.dataset), run_config.format)
    cache = EigenCache(Path(run_config.cache_dir)) if run_config.cache_dir else EigenCache()
    restructured = restructure(graph, run_config.epsilon, run_config.top_k)
    _, _, metrics = _train_seed(graph, restructured, run_config, payload["seed"], cache)
    return {"key": payload["key"], "acc": metrics.acc, "nmi": metrics.nmi}


class PFGCCoordinator:
    """
    Runs the pipelines behind the command-line subcommands.
    Follows Dependency Inversion Principle - the CLI only sees this class and RunConfig.
    """

    def __init__(self, config_manager: ConfigurationManager, run_config: RunConfig):
        """
        Initialize the coordinator.

        Args:
            config_manager: Environment and dataset profiles
            run_config: Validated settings of this run
        """
        self._config = config_manager
        self._run = run_config
        self._out_dir = Path(run_config.out_dir)
        cache_dir = run_config.cache_dir or str(config_manager.get_cache_dir())
        self._cache = EigenCache(Path(cache_dir))
        self._graph: Optional[AttributedGraph] = None

    @property
    def run_config(self) -> RunConfig:
        return self._run

    @property
    def cache(self) -> EigenCache:
        return self._cache

    def _load_dataset(self) -> AttributedGraph:
        if self._graph is not None:
            return self._graph
        if not self._run.dataset:
            raise UsageError("this command needs --dataset")
        graph = load_graph(Path(self._run.dataset), self._run.format)
        limit = self._config.get_large_graph_nodes()
        if graph.n_nodes > limit and not self._run.allow_large:
            raise UsageError(
                f"graph has {graph.n_nodes} nodes; dense eigendecomposition above "
                f"{limit} needs --allow-large"
            )
        profile = self._config.get_dataset_profile(graph.name)
        if profile and profile["n_nodes"] != graph.n_nodes:
            logger.warning("dataset size differs from its published profile", dataset=graph.name, expected=profile["n_nodes"], found=graph.n_nodes)
        self._graph = graph
        return graph

    def _output(self, name: str) -> Path:
        self._out_dir.mkdir(parents=True, exist_ok=True)
        return self._out_dir / name

    def restructure(self, epsilon: Optional[float] = None) -> Dict[str, Any]:
        """Build M and G, write both edge lists and restructure_report.json."""
        graph = self._load_dataset()
        restructured = restructure(graph, self._run.epsilon if epsilon is None else epsilon, self._run.top_k)
        m_edges = write_edge_csv(restructured.homophilic, self._output("M.edges.csv"))
        g_edges = write_edge_csv(restructured.heterophilic, self._output("G.edges.csv"))
        report = restructure_report(graph, restructured)
        report["dataset"] = graph_statistics(graph)
        report["config"] = self._run.echo()
        write_json(self._output("restructure_report.json"), report)
        logger.info("restructured graphs written", out_dir=str(self._out_dir), m_edges=m_edges, g_edges=g_edges)
        return report

    def train(self) -> MetricsReport:
        """
        Train one model per seed and write metrics.json, train_report.json,
        model.ckpt and, for labelled graphs, mask_report.csv (all for the best seed).
        """
        graph = self._load_dataset()
        restructured = restructure(graph, self._run.epsilon, self._run.top_k)
        runs = [_train_seed(graph, restructured, self._run, seed, self._cache) for seed in self._run.seeds]

        if graph.has_labels:
            best_index = max(range(len(runs)), key=lambda i: (runs[i][2].acc, -i))
        else:
            best_index = min(range(len(runs)), key=lambda i: (runs[i][2].final_loss or 0.0, i))
        best_state, best_report, best_metrics = runs[best_index]

        metrics = self._metrics_report(graph, [m for _, _, m in runs], best_metrics)
        write_json(self._output("metrics.json"), metrics.model_dump(mode="json"))
        write_json(self._output("train_report.json"), {"seed": best_metrics.seed, **best_report.to_dict()})
        save_checkpoint(self._output("model.ckpt"), best_state, self._run.to_model_config(best_metrics.seed), best_metrics.seed)
        write_csv(
            self._output("predictions.csv"),
            ({"node": i, "cluster": int(z)} for i, z in enumerate(best_report.labels)),
            columns=["node", "cluster"],
        )
        if graph.has_labels:
            self._write_mask_report(graph, best_report, best_metrics.seed)
        return metrics

    def evaluate(self) -> MetricsReport:
        """Reload a checkpoint, recompute metrics.json and mask_report.csv."""
        graph = self._load_dataset()
        if not graph.has_labels:
            raise UsageError(f"evaluation needs labels; dataset '{graph.name}' has none")
        checkpoint = Path(self._run.checkpoint) if self._run.checkpoint else self._out_dir / "model.ckpt"
        state, model_config, seed = load_checkpoint(checkpoint)
        restructured = restructure(graph, self._run.epsilon, self._run.top_k)
        report = infer(graph, restructured, state, model_config, self._cache)
        scores = evaluate_clustering(report.labels, graph.labels)
        seed_metrics = SeedMetrics(seed=seed, acc=scores.acc, nmi=scores.nmi)
        metrics = self._metrics_report(graph, [seed_metrics], seed_metrics)
        write_json(self._output("metrics.json"), metrics.model_dump(mode="json"))
        self._write_mask_report(graph, report, seed)
        return metrics

    def _metrics_report(self, graph: AttributedGraph, per_seed: List[SeedMetrics], best: SeedMetrics) -> MetricsReport:
        labelled = [m for m in per_seed if m.acc is not None]
        return MetricsReport(
            dataset=graph.name,
            per_seed=per_seed,
            best=best,
            mean_acc=float(np.mean([m.acc for m in labelled])) if labelled else None,
            mean_nmi=float(np.mean([m.nmi for m in labelled])) if labelled else None,
            config=self._run.echo(),
        )

    def _write_mask_report(self, graph: AttributedGraph, report: TrainReport, seed: int) -> None:
        rows = attention_mask_report(
            report.embedding,
            report.attention,
            graph.labels,
            graph.n_clusters,
            seed=seed,
            restarts=self._run.kmeans_restarts,
        )
        write_csv(self._output("mask_report.csv"), rows, columns=["band", "acc", "nmi"])

    def _theorem_paths(self) -> Tuple[Path, Path]:
        out = Path(self._run.out_dir)
        if out.suffix.lower() == ".csv":
            return out, out.with_name(f"{out.stem}_details.csv")
        return self._output("report.csv"), self._output("report_details.csv")

    def verify_theorem(self) -> List[DiscriminativenessReport]:
        """
        Run the SBM sweep and write one CSV row per (graph, filter pair).

        report.csv holds the summary columns and report_details.csv every
        field. An --out ending in .csv names the summary file itself.
        """
        seed = self._run.seeds[0]
        sweep = [
            SbmConfig.from_homophily(self._run.n_nodes, self._run.clusters, r, mean_degree=self._run.mean_degree, seed=seed + i)
            for i, r in enumerate(parse_sweep(self._run.sweep))
        ]
        reports = verify_theorem(sweep, self._run.pairs, self._run.trials, seed, self._cache)
        rows = [report.to_row() for report in reports]
        report_path, details_path = self._theorem_paths()
        write_csv(report_path, ({column: row[column] for column in THEOREM_COLUMNS} for row in rows), columns=THEOREM_COLUMNS)
        write_csv(details_path, rows, columns=THEOREM_COLUMNS)
        logger.info("theorem report written", report=str(report_path), details=str(details_path))
        return reports

    def commonality(self) -> Dict[str, float]:
        """Score neighbour commonality as a homophily predictor; writes proportions and per-edge CSVs."""
        graph = self._load_dataset()
        report = classify_edges_by_commonality(graph)
        summary = report.summary()
        write_csv(
            self._output("commonality.csv"),
            ({"metric": key, "value": value} for key, value in summary.items()),
            columns=["metric", "value"],
        )
        write_csv(
            self._output("commonality_edges.csv"),
            (
                {
                    "src": int(src),
                    "dst": int(dst),
                    "jaccard": float(j),
                    "predicted_homophilic": int(p),
                    "truly_homophilic": int(t),
                }
                for (src, dst), j, p, t in zip(report.edges, report.jaccard, report.predicted_homophilic, report.truly_homophilic)
            ),
            columns=["src", "dst", "jaccard", "predicted_homophilic", "truly_homophilic"],
        )
        return summary

    def grid(self) -> Dict[str, Any]:
        """
        Evaluate the hyper-parameter lattice, resuming from lattice.csv, and
        select the configuration with the highest ACC.

        Raises:
            UsageError: If the dataset has no labels
            ConfigError: If the lattice holds an invalid point
        """
        graph = self._load_dataset()
        if not graph.has_labels:
            raise UsageError("grid search selects by accuracy and needs labels")
        lattice = load_lattice(self._run.grid or "default", self._run)
        points = list(lattice_points(lattice, self._run.seeds))
        configs = {point_key(point, 0): point_config(self._run, point) for point, _ in points}
        lattice_path = self._output("lattice.csv")
        done = {row["key"]: row for row in read_csv_rows(lattice_path, dtype={"key": str})}
        pending = [(point, seed) for point, seed in points if point_key(point, seed) not in done]
        logger.info("grid search", points=len(points), completed=len(points) - len(pending), jobs=self._run.jobs)

        def rows_in_order() -> List[Dict[str, Any]]:
            return [done[point_key(p, s)] for p, s in points if point_key(p, s) in done]

        def record(point: Dict[str, Any], seed: int, acc: float, nmi: float) -> None:
            key = point_key(point, seed)
            done[key] = GridPointResult(key=key, seed=seed, acc=acc, nmi=nmi, **point).model_dump()
            write_csv(lattice_path, rows_in_order(), columns=list(GridPointResult.model_fields))

        if self._run.jobs > 1 and pending:
            payloads = [
                {
                    "config": {**configs[point_key(point, 0)].echo(), "cache_dir": str(self._cache.cache_dir)},
                    "seed": seed,
                    "key": point_key(point, seed),
                    "log_level": self._config.get_log_level(),
                    "log_json": self._config.get_log_json(),
                }
                for point, seed in pending
            ]
            # spawn, not fork, once torch threads exist
            with ProcessPoolExecutor(max_workers=self._run.jobs, mp_context=multiprocessing.get_context("spawn")) as pool:
                for (point, seed), result in zip(pending, pool.map(_grid_worker, payloads)):
                    record(point, seed, result["acc"], result["nmi"])
        else:
            restructured_by_epsilon: Dict[float, RestructuredGraphs] = {}
            for index, (point, seed) in enumerate(pending):
                if point["epsilon"] not in restructured_by_epsilon:
                    restructured_by_epsilon[point["epsilon"]] = restructure(graph, point["epsilon"], self._run.top_k)
                config = configs[point_key(point, 0)]
                _, _, metrics = _train_seed(graph, restructured_by_epsilon[point["epsilon"]], config, seed, self._cache)
                record(point, seed, metrics.acc, metrics.nmi)
                logger.info("grid progress", done=index + 1, pending=len(pending))

        rows = rows_in_order()
        write_csv(lattice_path, rows, columns=list(GridPointResult.model_fields))
        best = max(rows, key=lambda row: row["acc"])  # first maximum in lattice order
        best_point = {axis: AXIS_TYPES[axis](best[axis]) for axis in LATTICE_AXES}
        summary = {
            "dataset": graph.name,
            "best": {**best_point, "seed": int(best["seed"]), "acc": best["acc"], "nmi": best["nmi"]},
            "n_rows": len(rows),
            "config": point_config(self._run, best_point).echo(),
        }
        write_json(self._output("best_config.json"), summary)
        return summary
