import math

import numpy as np
import pytest

from conftest import cycle_graph, random_graph
from graph.graph_core import normalize
from models.base_models import FilterKind
from models.errors import DataError, ShapeError
from spectral.eig_cache import EigenCache, content_hash, read_basis
from spectral.spectral_filters import (
    LOCAL_LAMBDA_MAX,
    apply_filter,
    direct_local_operator,
    eig_sym,
    filter_operator,
    filter_response,
)


def _taylor_exp(matrix: np.ndarray, terms: int = 30) -> np.ndarray:
    total = np.eye(matrix.shape[0])
    power = np.eye(matrix.shape[0])
    for n in range(1, terms + 1):
        power = power @ matrix
        total = total + power / math.factorial(n)
    return total


class TestEigSym:
    def test_single_node(self, eigen_cache):
        basis = eig_sym(np.zeros((1, 1)), eigen_cache)
        np.testing.assert_allclose(basis.eigvals, [0.0])
        np.testing.assert_allclose(np.abs(basis.eigvecs), [[1.0]])

    def test_two_node_laplacian(self, eigen_cache):
        basis = eig_sym(np.array([[0.5, -0.5], [-0.5, 0.5]]), eigen_cache)
        np.testing.assert_allclose(basis.eigvals, [0.0, 1.0], atol=1e-12)

    def test_reconstruction(self, eigen_cache):
        laplacian = normalize(random_graph(50, 0.1, np.random.default_rng(4))).laplacian
        basis = eig_sym(laplacian, eigen_cache)
        rebuilt = (basis.eigvecs * basis.eigvals) @ basis.eigvecs.T
        assert np.max(np.abs(rebuilt - laplacian)) <= 1e-8
        assert np.all(np.diff(basis.eigvals) >= 0)

    def test_rejects_asymmetric(self, eigen_cache):
        with pytest.raises(ShapeError):
            eig_sym(np.array([[0.0, 1.0], [0.0, 0.0]]), eigen_cache)


class TestFilterResponse:
    @pytest.fixture
    def basis(self, eigen_cache):
        return eig_sym(normalize(random_graph(30, 0.15, np.random.default_rng(2))).laplacian, eigen_cache)

    def test_global_low_pass_endpoints(self, basis):
        response = filter_response(FilterKind.GLOBAL_LOW_PASS, basis)
        assert response[0] == pytest.approx(1.0)
        assert response[-1] == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.diff(response) <= 1e-12)

    def test_global_high_pass_endpoints(self, basis):
        response = filter_response(FilterKind.GLOBAL_HIGH_PASS, basis)
        assert response[0] == pytest.approx(0.0, abs=1e-12)
        assert response[-1] == pytest.approx(1.0)

    def test_strictly_monotone_on_distinct_eigenvalues(self, eigen_cache):
        basis = eig_sym(np.diag([0.0, 0.3, 0.9, 1.4]), eigen_cache)
        for kind in (FilterKind.GLOBAL_HIGH_PASS, FilterKind.LOCAL_HIGH_PASS):
            assert np.all(np.diff(filter_response(kind, basis)) > 0)
        for kind in (FilterKind.GLOBAL_LOW_PASS, FilterKind.LOCAL_LOW_PASS):
            assert np.all(np.diff(filter_response(kind, basis)) < 0)

    def test_local_filters(self, eigen_cache):
        basis = eig_sym(np.diag([0.0, 0.75, 1.5]), eigen_cache)
        np.testing.assert_allclose(filter_response(FilterKind.LOCAL_LOW_PASS, basis), [1.0, 0.5, 0.0])
        np.testing.assert_allclose(filter_response(FilterKind.LOCAL_HIGH_PASS, basis), [0.0, 0.5, 1.0])

    def test_degenerate_spectrum_is_all_ones(self, eigen_cache):
        basis = eig_sym(normalize(np.zeros((3, 3))).laplacian, eigen_cache)
        np.testing.assert_array_equal(filter_response(FilterKind.GLOBAL_LOW_PASS, basis), np.ones(3))
        np.testing.assert_array_equal(filter_response(FilterKind.GLOBAL_HIGH_PASS, basis), np.ones(3))


class TestApplyFilter:
    def test_constant_signal_on_regular_graph(self, eigen_cache):
        basis = eig_sym(normalize(cycle_graph(8).adjacency).laplacian, eigen_cache)
        signal = np.ones(8)
        np.testing.assert_allclose(apply_filter(FilterKind.GLOBAL_LOW_PASS, basis, signal), signal, atol=1e-12)
        np.testing.assert_allclose(apply_filter(FilterKind.LOCAL_HIGH_PASS, basis, signal), 0.0, atol=1e-12)

    def test_matches_dense_operator(self, eigen_cache):
        rng = np.random.default_rng(7)
        basis = eig_sym(normalize(random_graph(20, 0.2, rng)).laplacian, eigen_cache)
        signal = rng.normal(size=(20, 3))
        for kind in FilterKind:
            np.testing.assert_allclose(
                apply_filter(kind, basis, signal), filter_operator(kind, basis) @ signal, atol=1e-12
            )

    def test_linear_in_the_signal(self, eigen_cache):
        rng = np.random.default_rng(3)
        basis = eig_sym(normalize(random_graph(25, 0.2, rng)).laplacian, eigen_cache)
        x, y = rng.normal(size=(25, 2)), rng.normal(size=(25, 2))
        for kind in FilterKind:
            combined = apply_filter(kind, basis, 2.5 * x - 0.7 * y)
            separate = 2.5 * apply_filter(kind, basis, x) - 0.7 * apply_filter(kind, basis, y)
            np.testing.assert_allclose(combined, separate, atol=1e-10)

    def test_local_operators_need_no_eigenvectors(self, eigen_cache):
        laplacian = normalize(random_graph(15, 0.3, np.random.default_rng(8))).laplacian
        basis = eig_sym(laplacian, eigen_cache)
        for kind in (FilterKind.LOCAL_LOW_PASS, FilterKind.LOCAL_HIGH_PASS):
            np.testing.assert_allclose(direct_local_operator(kind, laplacian), filter_operator(kind, basis), atol=1e-12)
        with pytest.raises(ValueError):
            direct_local_operator(FilterKind.GLOBAL_LOW_PASS, laplacian)

    def test_row_mismatch(self, eigen_cache):
        basis = eig_sym(np.eye(3), eigen_cache)
        with pytest.raises(ShapeError):
            apply_filter(FilterKind.GLOBAL_LOW_PASS, basis, np.ones(4))

    def test_taylor_oracle(self, eigen_cache):
        rng = np.random.default_rng(11)
        for _ in range(20):
            ops = normalize(random_graph(50, 0.1, rng))
            basis = eig_sym(ops.laplacian, eigen_cache)
            low, high = np.exp(1.0 - basis.lambda_max), np.exp(1.0 - basis.lambda_min)
            oracle = (_taylor_exp(ops.adj_norm) - low * np.eye(50)) / (high - low)
            signal = rng.normal(size=50)
            diff = np.abs(apply_filter(FilterKind.GLOBAL_LOW_PASS, basis, signal) - oracle @ signal)
            assert diff.max() <= 1e-8

    def test_production_local_lambda(self):
        assert LOCAL_LAMBDA_MAX == 1.5


class TestEigenCache:
    def test_memory_hit(self):
        cache = EigenCache()
        laplacian = normalize(cycle_graph(6).adjacency).laplacian
        first = eig_sym(laplacian, cache)
        second = eig_sym(laplacian.copy(), cache)
        assert first is second
        assert cache.decompositions == 1

    def test_disk_sidecar(self, tmp_path):
        laplacian = normalize(cycle_graph(7).adjacency).laplacian
        first = eig_sym(laplacian, EigenCache(tmp_path))
        assert (tmp_path / f"{content_hash(laplacian)}.eig").is_file()

        fresh = EigenCache(tmp_path)
        second = eig_sym(laplacian, fresh)
        assert fresh.decompositions == 0
        assert fresh.disk_hits == 1
        np.testing.assert_array_equal(first.eigvecs, second.eigvecs)
        np.testing.assert_array_equal(first.eigvals, second.eigvals)

    def test_corrupt_sidecar_is_recomputed(self, tmp_path):
        laplacian = normalize(cycle_graph(5).adjacency).laplacian
        key = content_hash(laplacian)
        (tmp_path / f"{key}.eig").write_bytes(b"garbage")
        cache = EigenCache(tmp_path)
        eig_sym(laplacian, cache)
        assert cache.decompositions == 1

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.eig"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 8)
        with pytest.raises(DataError):
            read_basis(path, "0" * 64)

    def test_hash_depends_on_shape(self):
        assert content_hash(np.zeros((2, 2))) != content_hash(np.zeros((1, 4)))

