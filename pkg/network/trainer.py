"""
Training loop for the PFGC network.
Minimizes L_RE + γ₁·L_HS + γ₂·L_CLU with full-batch Adam, initializes the
cluster centers by k-means after warm-up and refreshes the self-training
target periodically. Also hosts the finite-difference gradient audit.
"""

import time
from typing import Dict, List, Optional, Tuple

import numpy as np
import structlog
import torch

from evaluation.clustering_metrics import kmeans
from models.base_models import AttributedGraph, ModelConfig, ModelState, RestructuredGraphs, TrainReport
from models.errors import NumericalError, TrainingAbortedError, UsageError
from network.objectives import loss_clu, loss_hs, loss_re, predict, soft_assign, target_distribution
from network.pfgc_network import DTYPE, PFGCNetwork
from network.propagation import PropagationPlan, build_propagation
from restructure.restructuring import restructure
from spectral.eig_cache import EigenCache

logger = structlog.get_logger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
DIVERGENCE_FACTOR = 10.0
FD_STEP = 1e-5

__all__ = ["ModelConfig", "ModelState", "TrainReport", "Objective", "train", "infer", "analytic_gradients", "check_gradients"]


class Objective:
    """
    Total loss of one network on one graph.

    The clustering target Q is held here and only changes through
    refresh_target, so every gradient treats it as a constant.
    """

    def __init__(self, network: PFGCNetwork, features: np.ndarray, plan: PropagationPlan, config: ModelConfig):
        self.network = network
        self.config = config
        self.features = torch.as_tensor(features, dtype=DTYPE)
        self.operator = torch.as_tensor(plan.operator, dtype=DTYPE)
        self.hs_target = torch.as_tensor(plan.hs_target, dtype=DTYPE)
        self.target: Optional[torch.Tensor] = None

    def refresh_target(self) -> None:
        with torch.no_grad():
            output = self.network(self.features, self.operator)
            soft = soft_assign(output.embedding, self.network.centers, self.config.beta)
            self.target = target_distribution(soft)
            empty = int((soft.sum(dim=0) == 0).sum())
            populated = np.unique(predict(soft)).size
        if empty or populated < self.network.n_clusters:
            logger.warning("cluster collapse", populated=populated, n_clusters=self.network.n_clusters)

    def __call__(self) -> Dict[str, torch.Tensor]:
        output = self.network(self.features, self.operator)
        if not torch.isfinite(output.embedding).all():
            raise NumericalError("non-finite activations in the encoder")
        terms = {
            "l_re": loss_re(self.features, output.reconstruction),
            "l_hs": loss_hs(output.embedding, self.hs_target),
        }
        if self.network.centers_initialized and self.target is not None:
            soft = soft_assign(output.embedding, self.network.centers, self.config.beta)
            terms["l_clu"] = loss_clu(soft, self.target)
        else:
            terms["l_clu"] = torch.zeros((), dtype=DTYPE)
        terms["total"] = terms["l_re"] + self.config.gamma1 * terms["l_hs"] + self.config.gamma2 * terms["l_clu"]
        return terms


def _init_centers(objective: Objective, epoch: int) -> None:
    network, config = objective.network, objective.config
    with torch.no_grad():
        embedding = network(objective.features, objective.operator).embedding.numpy()
    result = kmeans(embedding, network.n_clusters, seed=config.seed, restarts=config.kmeans_restarts)
    network.set_centers(result.centers)
    objective.refresh_target()
    logger.info("cluster centers initialized", epoch=epoch, inertia=result.inertia)


def train(
    graph: AttributedGraph,
    restructured: Optional[RestructuredGraphs],
    config: ModelConfig,
    n_clusters: Optional[int] = None,
    cache: Optional[EigenCache] = None,
) -> Tuple[ModelState, TrainReport]:
    """
    Train a PFGC network on one graph.

    Args:
        graph: Input graph (labels are not used)
        restructured: M and G built from the graph
        config: Model and optimizer configuration
        n_clusters: C; defaults to the graph's label count
        cache: Eigen cache for the filter bases

    Returns:
        Tuple[ModelState, TrainReport]: Final weights and the per-epoch record

    Raises:
        TrainingAbortedError: On a NaN loss, non-finite activations, or a total
            loss above 10× the first epoch's
        UsageError: If C is unknown or exceeds N
    """
    n_clusters = n_clusters if n_clusters is not None else graph.n_clusters
    if n_clusters is None:
        raise UsageError("number of clusters is unknown; pass n_clusters for unlabelled graphs")
    started = time.perf_counter()
    plan = build_propagation(graph, restructured, config, cache)

    torch.manual_seed(config.seed)
    network = PFGCNetwork(graph.n_features, n_clusters, config)
    optimizer = torch.optim.Adam(network.parameters(), lr=config.lr, betas=ADAM_BETAS, eps=ADAM_EPS)
    objective = Objective(network, graph.features, plan, config)

    losses: List[Dict[str, float]] = []
    last_good = network.to_state(optimizer)
    initial_total: Optional[float] = None

    for epoch in range(config.epochs):
        if epoch == config.warmup_epochs and not network.centers_initialized:
            _init_centers(objective, epoch)
        elif network.centers_initialized and (epoch - config.warmup_epochs) % config.q_update_interval == 0:
            objective.refresh_target()

        optimizer.zero_grad()
        try:
            terms = objective()
        except NumericalError as e:
            raise TrainingAbortedError(str(e), last_good_state=last_good, epoch=epoch) from e
        total = float(terms["total"].item())
        if not np.isfinite(total):
            raise TrainingAbortedError(f"loss became {total} at epoch {epoch}", last_good_state=last_good, epoch=epoch)
        if initial_total is None:
            initial_total = total
        elif total > DIVERGENCE_FACTOR * initial_total:
            raise TrainingAbortedError(
                f"loss {total:.6g} exceeds {DIVERGENCE_FACTOR:g}x the initial {initial_total:.6g}",
                last_good_state=last_good,
                epoch=epoch,
            )

        record = {name: float(value.item()) for name, value in terms.items()}
        record["epoch"] = epoch
        losses.append(record)
        log = logger.info if epoch % 10 == 0 else logger.debug
        log("epoch finished", epoch=epoch, total=record["total"], l_re=record["l_re"], l_hs=record["l_hs"], l_clu=record["l_clu"])

        terms["total"].backward()
        optimizer.step()
        last_good = network.to_state(optimizer)

    if not network.centers_initialized:
        _init_centers(objective, config.epochs)

    with torch.no_grad():
        output = network(objective.features, objective.operator)
        soft = soft_assign(output.embedding, network.centers, config.beta)
    report = TrainReport(
        losses=losses,
        soft_assignment=soft.numpy(),
        labels=predict(soft),
        embedding=output.embedding.numpy(),
        attention=output.attention.numpy(),
        wall_clock_seconds=time.perf_counter() - started,
    )
    logger.info("training finished", epochs=len(losses), final_loss=losses[-1]["total"] if losses else None)
    return network.to_state(optimizer), report


def infer(graph: AttributedGraph, restructured: Optional[RestructuredGraphs], state: ModelState, config: ModelConfig, cache: Optional[EigenCache] = None) -> TrainReport:
    """Forward pass of a trained state; the returned report has no losses."""
    plan = build_propagation(graph, restructured, config, cache)
    network = PFGCNetwork.from_state(state, config)
    with torch.no_grad():
        output = network(torch.as_tensor(graph.features, dtype=DTYPE), torch.as_tensor(plan.operator, dtype=DTYPE))
        if not network.centers_initialized:
            raise NumericalError("state has no cluster centers")
        soft = soft_assign(output.embedding, network.centers, config.beta)
    return TrainReport(
        losses=[],
        soft_assignment=soft.numpy(),
        labels=predict(soft),
        embedding=output.embedding.numpy(),
        attention=output.attention.numpy(),
    )


def _probe_objective(
    state: ModelState,
    config: ModelConfig,
    probe_graph: AttributedGraph,
    restructured: Optional[RestructuredGraphs],
) -> Objective:
    if restructured is None:
        restructured = restructure(probe_graph, top_k=min(5, probe_graph.n_nodes - 1))
    plan = build_propagation(probe_graph, restructured, config)
    objective = Objective(PFGCNetwork.from_state(state, config), probe_graph.features, plan, config)
    if objective.network.centers_initialized:
        objective.refresh_target()
    return objective


def analytic_gradients(
    state: ModelState,
    config: ModelConfig,
    probe_graph: AttributedGraph,
    restructured: Optional[RestructuredGraphs] = None,
) -> Dict[str, np.ndarray]:
    """Autograd gradient of the total loss for every parameter that reaches it."""
    objective = _probe_objective(state, config, probe_graph, restructured)
    objective.network.zero_grad()
    objective()["total"].backward()
    return {
        name: param.grad.detach().numpy().copy()
        for name, param in objective.network.named_parameters()
        if param.grad is not None
    }


def check_gradients(
    state: ModelState,
    config: ModelConfig,
    probe_graph: AttributedGraph,
    restructured: Optional[RestructuredGraphs] = None,
    step: float = FD_STEP,
) -> float:
    """
    Compare autograd gradients of the total loss with central differences.

    Q is computed once from the state and held fixed. Parameters that do not
    reach the loss (for instance the SE block when use_se is off) are skipped.

    Args:
        state: Weights to probe; centers present means L_CLU is included
        config: Model configuration (loss weights, filters)
        probe_graph: Small graph, N ≤ 20 recommended
        restructured: M and G; built with default settings when omitted
        step: Finite-difference step

    Returns:
        float: Max over parameter tensors of ‖g_auto − g_fd‖ / max(‖g_auto‖, ‖g_fd‖, 1e-12)
    """
    objective = _probe_objective(state, config, probe_graph, restructured)
    network = objective.network
    network.zero_grad()
    objective()["total"].backward()

    worst = 0.0
    for name, param in network.named_parameters():
        if param.grad is None:
            continue
        analytic = param.grad.detach().clone()
        numeric = torch.zeros_like(analytic)
        flat, flat_numeric = param.data.view(-1), numeric.view(-1)
        with torch.no_grad():
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + step
                upper = objective()["total"].item()
                flat[i] = original - step
                lower = objective()["total"].item()
                flat[i] = original
                flat_numeric[i] = (upper - lower) / (2.0 * step)
        scale = max(analytic.norm().item(), numeric.norm().item(), 1e-12)
        error = (analytic - numeric).norm().item() / scale
        logger.debug("gradient audit", parameter=name, relative_error=error)
        worst = max(worst, error)
    return worst
