"""
Eigendecomposition cache for the PFGC toolkit.
Keeps one decomposition per matrix content hash, in memory and optionally as
a binary sidecar on disk so repeated runs skip the dense solve.
"""

import hashlib
import os
import struct
import threading
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import structlog

from models.base_models import SpectralBasis
from models.errors import DataError

logger = structlog.get_logger(__name__)

MAGIC = b"PFGCEIG1"
_HEADER = struct.Struct("<8sQ")
_F64 = np.dtype("<f8")


def content_hash(matrix: np.ndarray) -> str:
    """SHA-256 over the shape and little-endian f64 bytes of a matrix."""
    data = np.ascontiguousarray(matrix, dtype=_F64)
    digest = hashlib.sha256()
    digest.update(struct.pack("<QQ", *data.shape))
    digest.update(data.tobytes())
    return digest.hexdigest()


def write_basis(path: Path, basis: SpectralBasis) -> None:
    """Write a basis as magic, u64 N, eigenvalues, then row-major eigenvectors."""
    n = basis.size
    with open(path, "wb") as handle:
        handle.write(_HEADER.pack(MAGIC, n))
        handle.write(np.ascontiguousarray(basis.eigvals, dtype=_F64).tobytes())
        handle.write(np.ascontiguousarray(basis.eigvecs, dtype=_F64).tobytes())


def read_basis(path: Path, source_hash: str) -> SpectralBasis:
    """
    Read a sidecar written by write_basis.

    Raises:
        DataError: If the magic bytes or the payload size do not match
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"truncated eigen cache file: {path}")
    magic, n = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"not an eigen cache file: {path}")
    expected = _HEADER.size + 8 * (n + n * n)
    if len(raw) != expected:
        raise DataError(f"eigen cache file {path} has {len(raw)} bytes, expected {expected}")
    eigvals = np.frombuffer(raw, dtype=_F64, count=n, offset=_HEADER.size).astype(np.float64)
    eigvecs = np.frombuffer(raw, dtype=_F64, count=n * n, offset=_HEADER.size + 8 * n)
    return SpectralBasis(eigvecs=eigvecs.reshape(n, n).astype(np.float64), eigvals=eigvals, source_hash=source_hash)


class EigenCache:
    """
    Map from content hash to SpectralBasis.

    Lookups check memory first, then the cache directory. Concurrent requests
    for the same key may both compute; the first stored value wins and both
    callers get equal results.
    """

    def __init__(self, cache_dir: Optional[Path] = None):
        self._cache_dir = Path(cache_dir) if cache_dir is not None else None
        self._entries: Dict[str, SpectralBasis] = {}
        self._lock = threading.Lock()
        self.decompositions = 0
        self.disk_hits = 0

    @property
    def cache_dir(self) -> Optional[Path]:
        return self._cache_dir

    def _sidecar(self, key: str) -> Optional[Path]:
        return self._cache_dir / f"{key}.eig" if self._cache_dir is not None else None

    def get(self, key: str) -> Optional[SpectralBasis]:
        with self._lock:
            basis = self._entries.get(key)
        if basis is not None:
            return basis
        sidecar = self._sidecar(key)
        if sidecar is None or not sidecar.is_file():
            return None
        try:
            basis = read_basis(sidecar, key)
        except DataError as e:
            logger.warning("ignoring unreadable eigen cache file", path=str(sidecar), reason=str(e))
            return None
        self.disk_hits += 1
        logger.debug("eigen cache disk hit", key=key[:12])
        return self._store(key, basis, persist=False)

    def put(self, key: str, basis: SpectralBasis) -> SpectralBasis:
        self.decompositions += 1
        return self._store(key, basis, persist=True)

    def _store(self, key: str, basis: SpectralBasis, persist: bool) -> SpectralBasis:
        with self._lock:
            existing = self._entries.setdefault(key, basis)
        sidecar = self._sidecar(key)
        if persist and sidecar is not None and existing is basis:
            sidecar.parent.mkdir(parents=True, exist_ok=True)
            tmp = sidecar.with_suffix(f".eig.{os.getpid()}.{threading.get_ident()}.tmp")
            write_basis(tmp, basis)
            tmp.replace(sidecar)
            logger.debug("eigen cache written", path=str(sidecar))
        return existing

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


_default_cache = EigenCache()


def default_cache() -> EigenCache:
    """Process-wide in-memory cache used when no cache is passed explicitly."""
    return _default_cache
