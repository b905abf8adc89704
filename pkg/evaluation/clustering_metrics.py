"""
Clustering evaluation for the PFGC toolkit.
K-means on learned representations, accuracy under the best label matching,
normalized mutual information, and the attention-band masking analysis.
"""

from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np
import structlog
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from sklearn.metrics import normalized_mutual_info_score

from models.base_models import ClusterMetrics, MaskBand
from models.errors import UsageError

logger = structlog.get_logger(__name__)

DEFAULT_RESTARTS = 10
BAND_ORDER = (MaskBand.TOP_THIRD, MaskBand.MID_THIRD, MaskBand.BOTTOM_THIRD)


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    assignment: np.ndarray
    inertia: float


def kmeans(points: np.ndarray, n_clusters: int, seed: int = 0, restarts: int = DEFAULT_RESTARTS, max_iter: int = 300) -> KMeansResult:
    """
    Lloyd's k-means with k-means++ seeding, best inertia over restarts.

    Args:
        points: N×d matrix
        n_clusters: C
        seed: Master seed; restart seeds derive from it
        restarts: Number of independent initializations

    Returns:
        KMeansResult: Centers, hard assignment and inertia of the best restart

    Raises:
        UsageError: If C exceeds the number of points
    """
    points = np.asarray(points, dtype=np.float64)
    if n_clusters < 1 or n_clusters > points.shape[0]:
        raise UsageError(f"cannot form {n_clusters} clusters from {points.shape[0]} points")
    model = KMeans(
        n_clusters=n_clusters,
        init="k-means++",
        n_init=restarts,
        max_iter=max_iter,
        random_state=seed,
    ).fit(points)
    return KMeansResult(
        centers=model.cluster_centers_.astype(np.float64),
        assignment=model.labels_.astype(np.int64),
        inertia=float(model.inertia_),
    )


def _check_pair(pred: np.ndarray, truth: np.ndarray) -> None:
    if pred.shape != truth.shape:
        raise UsageError(f"prediction has {pred.size} labels, ground truth has {truth.size}")


def _best_matching(pred: np.ndarray, truth: np.ndarray):
    pred_values, pred_index = np.unique(pred, return_inverse=True)
    truth_values, truth_index = np.unique(truth, return_inverse=True)
    contingency = np.zeros((pred_values.size, truth_values.size), dtype=np.int64)
    np.add.at(contingency, (pred_index, truth_index), 1)
    rows, cols = linear_sum_assignment(-contingency)
    matched = int(contingency[rows, cols].sum())
    permutation = {int(pred_values[r]): int(truth_values[c]) for r, c in zip(rows, cols)}
    return matched, permutation


def accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """
    Clustering accuracy under the Hungarian-optimal map from predicted to true labels.

    Raises:
        UsageError: If the label arrays differ in length
    """
    pred, truth = np.asarray(pred), np.asarray(truth)
    _check_pair(pred, truth)
    if pred.size == 0:
        return 0.0
    matched, _ = _best_matching(pred, truth)
    return matched / pred.size


def nmi(pred: np.ndarray, truth: np.ndarray) -> float:
    """
    Mutual information normalized by the geometric mean of the two entropies.

    Raises:
        UsageError: If the label arrays differ in length
    """
    pred, truth = np.asarray(pred), np.asarray(truth)
    _check_pair(pred, truth)
    score = normalized_mutual_info_score(truth, pred, average_method="geometric")
    if not np.isfinite(score):
        return 0.0
    return float(np.clip(score, 0.0, 1.0))


def evaluate_clustering(pred: np.ndarray, truth: np.ndarray) -> ClusterMetrics:
    pred, truth = np.asarray(pred), np.asarray(truth)
    _check_pair(pred, truth)
    matched, permutation = _best_matching(pred, truth)
    return ClusterMetrics(acc=matched / pred.size, nmi=nmi(pred, truth), matched_permutation=permutation)


def attention_bands(attention: np.ndarray) -> Dict[MaskBand, np.ndarray]:
    """Split feature columns into thirds by descending attention; ties keep index order."""
    order = np.argsort(-np.asarray(attention), kind="stable")
    return dict(zip(BAND_ORDER, np.array_split(order, 3)))


def mask_by_attention(embedding: np.ndarray, attention: np.ndarray, band: MaskBand) -> np.ndarray:
    """
    Zero the feature columns whose attention weight ranks fall in a band.

    Args:
        embedding: H̃, N×d_h
        attention: s̃, length d_h
        band: Which third to mask, or none

    Returns:
        np.ndarray: Masked copy of the embedding
    """
    masked = np.array(embedding, dtype=np.float64)
    band = MaskBand(band)
    if band is MaskBand.NONE:
        return masked
    masked[:, attention_bands(attention)[band]] = 0.0
    return masked


def attention_mask_report(
    embedding: np.ndarray,
    attention: np.ndarray,
    truth: np.ndarray,
    n_clusters: int,
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> List[Dict[str, Any]]:
    """Cluster each masked embedding with k-means and score it; one row per band."""
    rows = []
    for band in (MaskBand.NONE, *BAND_ORDER):
        assignment = kmeans(mask_by_attention(embedding, attention, band), n_clusters, seed, restarts).assignment
        metrics = evaluate_clustering(assignment, truth)
        rows.append({"band": band.value, "acc": metrics.acc, "nmi": metrics.nmi})
        logger.debug("masked embedding evaluated", band=band.value, acc=metrics.acc)
    return rows
