"""
Pydantic models for the PFGC command line.
Defines the run configuration accepted from files and flags, and the
report documents written to the output directory.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from models.base_models import Activation, FilterCombo, FilterPair, GraphFormat, GraphSource, ModelConfig


def _split_csv(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, int):
        return [value]
    return value


class RunConfig(BaseModel):
    """Every setting of one run. Unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", validate_default=True)

    dataset: Optional[str] = Field(None, description="Dataset directory")
    format: GraphFormat = Field(GraphFormat.CANONICAL_CSV, description="Layout of the dataset files")
    epsilon: float = Field(0.01, gt=0, description="Threshold on squared joint similarity for M")
    top_k: int = Field(5, ge=1, description="Edges per node kept in G")
    mu: float = Field(0.3, ge=0, le=1, description="Weight of the high-pass branch")
    k_order: int = Field(5, ge=1, description="Highest adjacency power in the structure target")
    gamma1: float = Field(1.0, ge=0, description="Weight of the structure loss")
    gamma2: float = Field(1.0, ge=0, description="Weight of the clustering loss")
    beta: float = Field(1.0, gt=0, description="Student-t degrees of freedom")
    lr: float = Field(1e-2, gt=0, description="Adam learning rate")
    epochs: int = Field(200, ge=0)
    warmup_epochs: int = Field(50, ge=0)
    q_update_interval: int = Field(5, ge=1)
    hidden_dims: List[int] = Field(default_factory=lambda: [256, 64])
    se_ratio: int = Field(4, ge=1)
    seeds: List[int] = Field(default_factory=lambda: [0])
    filter_combo: FilterCombo = FilterCombo.PFGC
    use_se: bool = True
    graph_source: GraphSource = GraphSource.RESTRUCTURED
    hidden_activation: Activation = Activation.RELU
    kmeans_restarts: int = Field(10, ge=1)
    n_clusters: Optional[int] = Field(None, ge=1, description="Cluster count for unlabelled graphs")
    grid: Optional[str] = Field(None, description="Lattice name ('default') or JSON file")
    jobs: int = Field(1, ge=1, description="Parallel grid workers")
    checkpoint: Optional[str] = Field(None, description="Checkpoint to evaluate")
    cache_dir: Optional[str] = None
    out_dir: str = "out"
    allow_large: bool = False

    # verify-theorem
    n_nodes: int = Field(120, ge=2)
    clusters: int = Field(3, ge=2)
    sweep: str = "r=0.05:0.95:0.1"
    trials: int = Field(200, ge=2)
    mean_degree: float = Field(12.0, gt=0)
    pairs: List[FilterPair] = Field(default_factory=lambda: [FilterPair.H1_VS_H2, FilterPair.H3_VS_H4])

    @field_validator("seeds", "hidden_dims", "pairs", mode="before")
    @classmethod
    def _accept_comma_lists(cls, value: Any) -> Any:
        return _split_csv(value)

    def to_model_config(self, seed: int) -> ModelConfig:
        """Model configuration for one seed of this run."""
        return ModelConfig(
            n_layers=len(self.hidden_dims),
            hidden_dims=tuple(self.hidden_dims),
            se_ratio=self.se_ratio,
            mu=self.mu,
            k_order=self.k_order,
            beta=self.beta,
            gamma1=self.gamma1,
            gamma2=self.gamma2,
            lr=self.lr,
            epochs=self.epochs,
            warmup_epochs=self.warmup_epochs,
            q_update_interval=self.q_update_interval,
            seed=seed,
            filter_combo=self.filter_combo,
            use_se=self.use_se,
            graph_source=self.graph_source,
            hidden_activation=self.hidden_activation,
            kmeans_restarts=self.kmeans_restarts,
        )

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class SeedMetrics(BaseModel):
    """Clustering quality of one seed."""

    seed: int
    acc: Optional[float] = Field(None, ge=0, le=1)
    nmi: Optional[float] = Field(None, ge=0, le=1)
    final_loss: Optional[float] = None


class MetricsReport(BaseModel):
    """Contents of metrics.json."""

    dataset: str
    per_seed: List[SeedMetrics]
    best: SeedMetrics
    mean_acc: Optional[float] = None
    mean_nmi: Optional[float] = None
    config: Dict[str, Any]


class GridPointResult(BaseModel):
    """One row of lattice.csv."""

    key: str
    seed: int
    mu: float
    gamma1: float
    gamma2: float
    lr: float
    epsilon: float
    k_order: int
    graph_source: str
    filter_combo: str
    use_se: bool
    acc: float
    nmi: float
