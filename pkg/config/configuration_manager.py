"""
Configuration management for the PFGC toolkit.
Implements the Single Responsibility Principle by handling only configuration-related tasks:
environment settings, known dataset profiles, and merging run configuration
files with command-line overrides.
"""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import structlog
from dotenv import load_dotenv
from pydantic import ValidationError

from cli.models import RunConfig
from models.base_models import GraphFormat, IConfigurationManager
from models.errors import ConfigError

logger = structlog.get_logger(__name__)


def _profile(nodes: int, dims: int, edges: int, clusters: int, homophily: float, graph_format: GraphFormat, k_order: int = 5) -> Dict[str, Any]:
    return {
        "n_nodes": nodes,
        "n_features": dims,
        "n_edges": edges,
        "n_clusters": clusters,
        "homophily": homophily,
        "format": graph_format.value,
        "k_order": k_order,
    }


# Published statistics of the benchmark datasets; k_order is 1 on the two largest sparse sets.
DATASET_PROFILES: Dict[str, Dict[str, Any]] = {
    "cornell": _profile(183, 1703, 298, 5, 0.1220, GraphFormat.WEBKB),
    "wisconsin": _profile(251, 1703, 515, 5, 0.1703, GraphFormat.WEBKB),
    "washington": _profile(230, 1703, 786, 5, 0.1434, GraphFormat.WEBKB),
    "chameleon": _profile(2277, 2325, 31371, 5, 0.2299, GraphFormat.CANONICAL_CSV),
    "squirrel": _profile(5201, 2089, 217073, 5, 0.2234, GraphFormat.CANONICAL_CSV),
    "roman-empire": _profile(22662, 300, 32927, 18, 0.0469, GraphFormat.CANONICAL_CSV, k_order=1),
    "cora": _profile(2708, 1433, 5429, 7, 0.8137, GraphFormat.PLANETOID),
    "citeseer": _profile(3327, 3703, 4732, 6, 0.7392, GraphFormat.PLANETOID),
    "pubmed": _profile(19717, 500, 44327, 3, 0.8024, GraphFormat.PLANETOID, k_order=1),
    "uat": _profile(1190, 239, 13599, 4, 0.6978, GraphFormat.CANONICAL_CSV),
    "amap": _profile(7650, 745, 119081, 8, 0.8272, GraphFormat.CANONICAL_CSV),
}

DEFAULT_LARGE_GRAPH_NODES = 10000

# Run-config keys a profile may fill in when neither the file nor the flags set them.
_PROFILE_DEFAULTS = ("k_order", "format")


class ConfigurationManager(IConfigurationManager):
    """
    Concrete implementation of configuration management.
    Reads the environment once; every other value comes from RunConfig.
    """

    def __init__(self, env_file: Optional[Path] = None):
        # Load environment variables from .env file
        load_dotenv(env_file)

        self._config: Dict[str, Any] = {}
        self._initialize_default_config()

    def _initialize_default_config(self) -> None:
        """
        Initialize default configuration values from the environment.

        Raises:
            ConfigError: If PFGC_LARGE_GRAPH_NODES is not a positive integer
        """
        raw_limit = os.environ.get("PFGC_LARGE_GRAPH_NODES", str(DEFAULT_LARGE_GRAPH_NODES))
        try:
            large_graph_nodes = int(raw_limit)
        except ValueError as e:
            raise ConfigError(f"PFGC_LARGE_GRAPH_NODES must be an integer, got '{raw_limit}'") from e
        if large_graph_nodes < 1:
            raise ConfigError(f"PFGC_LARGE_GRAPH_NODES must be positive, got {large_graph_nodes}")

        self._config = {
            "cache_dir": os.environ.get("PFGC_CACHE_DIR", "./.pfgc_cache"),
            "data_dir": os.environ.get("PFGC_DATA_DIR"),
            "log_level": os.environ.get("LOG_LEVEL", "INFO").upper(),
            "log_json": os.environ.get("PFGC_LOG_JSON", "0") == "1",
            "large_graph_nodes": large_graph_nodes,
        }

    def get_cache_dir(self) -> Path:
        """Get the directory for eigendecomposition sidecars."""
        return Path(self._config["cache_dir"])

    def get_data_dir(self) -> Optional[Path]:
        """Get the root directory of benchmark datasets, if configured."""
        data_dir = self._config["data_dir"]
        return Path(data_dir) if data_dir else None

    def get_log_level(self) -> str:
        return self._config["log_level"]

    def get_log_json(self) -> bool:
        return self._config["log_json"]

    def get_large_graph_nodes(self) -> int:
        """Node count above which dense eigendecomposition needs --allow-large."""
        return self._config["large_graph_nodes"]

    def get_dataset_profile(self, name: str) -> Dict[str, Any]:
        """
        Get the known statistics and defaults of a benchmark dataset.

        Args:
            name: Dataset name or directory name, case-insensitive

        Returns:
            Dict[str, Any]: Profile copy, empty for unknown datasets
        """
        return dict(DATASET_PROFILES.get(Path(name).name.lower(), {}))

    def load_configuration(self, config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """
        Build a run configuration: defaults, then dataset profile, then file, then flags.

        Args:
            config_path: JSON file with RunConfig keys (optional)
            overrides: Values given on the command line; None entries are ignored

        Returns:
            RunConfig: Validated configuration

        Raises:
            ConfigError: If the file cannot be read, has unknown keys or invalid values
        """
        values: Dict[str, Any] = {}
        if config_path is not None:
            try:
                values = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read config file {config_path}: {e}") from e
            if not isinstance(values, dict):
                raise ConfigError(f"config file {config_path} must hold a JSON object")
        values.update({key: value for key, value in (overrides or {}).items() if value is not None})

        if values.get("dataset"):
            profile = self.get_dataset_profile(values["dataset"])
            for key in _PROFILE_DEFAULTS:
                if key not in values and key in profile:
                    values[key] = profile[key]
        values.setdefault("cache_dir", str(self.get_cache_dir()))

        try:
            run_config = RunConfig.model_validate(values)
        except ValidationError as e:
            problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
            raise ConfigError(f"invalid configuration: {problems}") from e
        logger.debug("configuration loaded", source=str(config_path) if config_path else "flags")
        return run_config
