"""
Spectral filters for the PFGC toolkit.
Eigendecomposition of normalized Laplacians and the four filters h1..h4:
global low-pass exp(I - L), local low-pass I - L/λ_N, global high-pass
exp(L) and local high-pass L/λ_N, global ones Min-Max normalized to [0, 1].
"""

from typing import Optional

import numpy as np
import scipy.linalg
import structlog

from models.base_models import FilterKind, SpectralBasis
from models.errors import NumericalError, ShapeError
from spectral.eig_cache import EigenCache, content_hash, default_cache

logger = structlog.get_logger(__name__)

# Fixed λ_N used by the production local filters: responses I - (2/3)L and (2/3)L.
LOCAL_LAMBDA_MAX = 1.5
SYMMETRY_TOLERANCE = 1e-10
DEGENERATE_SPAN = 1e-12


def eig_sym(laplacian: np.ndarray, cache: Optional[EigenCache] = None) -> SpectralBasis:
    """
    Full eigendecomposition of a symmetric matrix, cached by content hash.

    Args:
        laplacian: Symmetric N×N matrix
        cache: Cache to consult and fill; the process default when omitted

    Returns:
        SpectralBasis: Orthonormal U and ascending Λ

    Raises:
        ShapeError: If the matrix is not square or not symmetric within 1e-10
        NumericalError: If the eigensolver does not converge
    """
    matrix = np.asarray(laplacian, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {matrix.shape}")
    if matrix.size and np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOLERANCE:
        raise ShapeError("matrix is not symmetric")

    cache = cache if cache is not None else default_cache()
    key = content_hash(matrix)
    cached = cache.get(key)
    if cached is not None:
        return cached

    try:
        eigvals, eigvecs = scipy.linalg.eigh(matrix)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericalError(f"eigendecomposition did not converge: {e}") from e
    logger.debug("eigendecomposition computed", n=matrix.shape[0], key=key[:12])
    return cache.put(key, SpectralBasis(eigvecs=eigvecs, eigvals=eigvals, source_hash=key))


def _min_max(values: np.ndarray, low: float, high: float, kind: FilterKind) -> np.ndarray:
    span = high - low
    if span <= DEGENERATE_SPAN * max(1.0, abs(high)):
        logger.warning("degenerate spectrum, using all-ones filter response", filter=kind.value)
        return np.ones_like(values)
    return (values - low) / span


def filter_response(kind: FilterKind, basis: SpectralBasis, local_lambda_max: float = LOCAL_LAMBDA_MAX) -> np.ndarray:
    """
    Response of a filter at each eigenvalue of the basis.

    Global filters are Min-Max normalized with the measured λ_1 and λ_N so
    that h1 maps λ_1→1, λ_N→0 and h3 maps λ_1→0, λ_N→1. Local filters divide
    by local_lambda_max (3/2 in production).

    Args:
        kind: Which filter
        basis: Spectrum to evaluate on
        local_lambda_max: λ_N used by the local filters

    Returns:
        np.ndarray: One response per eigenvalue
    """
    lam = basis.eigvals
    lam_1, lam_n = lam[0], lam[-1]
    if kind is FilterKind.GLOBAL_LOW_PASS:
        return _min_max(np.exp(1.0 - lam), np.exp(1.0 - lam_n), np.exp(1.0 - lam_1), kind)
    if kind is FilterKind.GLOBAL_HIGH_PASS:
        return _min_max(np.exp(lam), np.exp(lam_1), np.exp(lam_n), kind)
    if kind is FilterKind.LOCAL_LOW_PASS:
        return 1.0 - lam / local_lambda_max
    return lam / local_lambda_max


def filter_operator(kind: FilterKind, basis: SpectralBasis, local_lambda_max: float = LOCAL_LAMBDA_MAX) -> np.ndarray:
    """Dense operator U diag(h(Λ)) Uᵀ."""
    response = filter_response(kind, basis, local_lambda_max)
    operator = (basis.eigvecs * response[None, :]) @ basis.eigvecs.T
    return 0.5 * (operator + operator.T)


def direct_local_operator(kind: FilterKind, laplacian: np.ndarray, local_lambda_max: float = LOCAL_LAMBDA_MAX) -> np.ndarray:
    """
    Operator form of a local filter built from L without eigenvectors.

    Raises:
        ValueError: If kind is a global filter
    """
    if kind.is_global:
        raise ValueError(f"{kind.value} has no direct polynomial form")
    scaled = np.asarray(laplacian, dtype=np.float64) / local_lambda_max
    if kind is FilterKind.LOCAL_HIGH_PASS:
        return scaled
    return np.eye(scaled.shape[0]) - scaled


def apply_filter(kind: FilterKind, basis: SpectralBasis, signal: np.ndarray, local_lambda_max: float = LOCAL_LAMBDA_MAX) -> np.ndarray:
    """
    Filter a signal: U · diag(h(Λ)) · Uᵀ · signal.

    Args:
        kind: Which filter
        basis: Spectral basis of the graph
        signal: N×d (or length-N) signal

    Returns:
        np.ndarray: Filtered signal with the input's shape

    Raises:
        ShapeError: If the signal's row count differs from N
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[0] != basis.size:
        raise ShapeError(f"signal has {x.shape[0]} rows, basis has {basis.size}")
    response = filter_response(kind, basis, local_lambda_max)
    coefficients = basis.eigvecs.T @ x
    if x.ndim == 1:
        return basis.eigvecs @ (response * coefficients)
    return basis.eigvecs @ (response[:, None] * coefficients)
