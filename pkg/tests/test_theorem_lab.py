import numpy as np
import pytest

from conftest import random_graph
from graph.graph_core import homophily_ratio, normalize
from models.base_models import AttributedGraph, FilterPair, Verdict
from models.errors import ConfigError, UsageError
from spectral.spectral_filters import eig_sym
from theorem.theorem_lab import (
    SbmConfig,
    edge_distance_totals,
    expected_edge_gap,
    judge,
    mc_cluster_gap,
    pair_responses,
    predicted_cluster_gap,
    random_unit_coefficients,
    sbm_generate,
    verify_theorem,
)


def _basis(graph, cache):
    return eig_sym(normalize(graph.adjacency).laplacian, cache)


class TestSbm:
    def test_disjoint_cliques(self):
        graph = sbm_generate(SbmConfig(n_nodes=10, n_clusters=2, p_in=1.0, p_out=0.0))
        assert graph.n_edges == 2 * 10
        assert homophily_ratio(graph) == 1.0

    def test_complete_multipartite(self):
        graph = sbm_generate(SbmConfig(n_nodes=9, n_clusters=3, p_in=0.0, p_out=1.0))
        assert graph.n_edges == 27
        assert homophily_ratio(graph) == 0.0

    def test_expected_homophily(self):
        config = SbmConfig(n_nodes=120, n_clusters=3, p_in=0.3, p_out=0.02)
        assert config.expected_homophily == pytest.approx(0.88, abs=0.005)
        assert homophily_ratio(sbm_generate(config)) == pytest.approx(config.expected_homophily, abs=0.05)

    def test_from_homophily(self):
        config = SbmConfig.from_homophily(120, 3, 0.25, mean_degree=12)
        assert config.expected_homophily == pytest.approx(0.25)
        assert config.p_in * 39 + config.p_out * 80 == pytest.approx(12.0)

    def test_seeded(self):
        config = SbmConfig(n_nodes=30, n_clusters=3, p_in=0.3, p_out=0.1, seed=4)
        np.testing.assert_array_equal(sbm_generate(config).adjacency, sbm_generate(config).adjacency)

    def test_features(self):
        graph = sbm_generate(SbmConfig(n_nodes=12, n_clusters=3, p_in=0.5, p_out=0.1, feature_dim=5))
        assert graph.features.shape == (12, 5)
        np.testing.assert_array_equal(graph.labels, np.repeat([0, 1, 2], 4))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_nodes": 10, "n_clusters": 3, "p_in": 0.5, "p_out": 0.1},
            {"n_nodes": 10, "n_clusters": 1, "p_in": 0.5, "p_out": 0.1},
            {"n_nodes": 10, "n_clusters": 2, "p_in": 1.5, "p_out": 0.1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            SbmConfig(**kwargs)


class TestAnalyticGap:
    def test_global_low_pass_never_smoother_edges(self, eigen_cache):
        for seed, r in enumerate([0.1, 0.33, 0.6, 0.9]):
            graph = sbm_generate(SbmConfig.from_homophily(60, 3, r, mean_degree=8, seed=seed))
            basis = _basis(graph, eigen_cache)
            assert expected_edge_gap(basis, FilterPair.H1_VS_H2) <= 1e-12
            assert expected_edge_gap(basis, FilterPair.H3_VS_H4) <= 1e-12

    def test_edgeless_graph(self, eigen_cache):
        basis = eig_sym(np.zeros((3, 3)), eigen_cache)
        assert expected_edge_gap(basis, FilterPair.H1_VS_H2) == 0.0

    def test_two_node_path(self, eigen_cache):
        basis = _basis(AttributedGraph(features=np.ones((2, 1)), adjacency=np.array([[0.0, 1.0], [1.0, 0.0]])), eigen_cache)
        h1, h2 = pair_responses(basis, FilterPair.H1_VS_H2)
        np.testing.assert_allclose(h1, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(h2, [1.0, 0.0], atol=1e-12)
        assert expected_edge_gap(basis, FilterPair.H1_VS_H2) == pytest.approx(0.0, abs=1e-12)

    def test_closed_form(self, eigen_cache):
        graph = sbm_generate(SbmConfig(n_nodes=30, n_clusters=3, p_in=0.4, p_out=0.05, seed=2))
        basis = _basis(graph, eigen_cache)
        lam = np.linalg.eigvalsh(normalize(graph.adjacency).laplacian)
        h3 = (np.exp(lam) - np.exp(lam[0])) / (np.exp(lam[-1]) - np.exp(lam[0]))
        h4 = lam / lam[-1]
        expected = np.sum(lam * (h3 ** 2 - h4 ** 2)) / 30
        assert expected_edge_gap(basis, FilterPair.H3_VS_H4) == pytest.approx(expected, abs=1e-12)


class TestMonteCarlo:
    def test_unit_signals(self):
        coefficients = random_unit_coefficients(20, 5, np.random.default_rng(0))
        np.testing.assert_allclose(np.linalg.norm(coefficients, axis=0), 1.0)

    def test_edge_distance_identity(self, eigen_cache):
        rng = np.random.default_rng(9)
        adjacency = random_graph(40, 0.15, rng)
        labels = rng.integers(0, 3, 40)
        basis = eig_sym(normalize(adjacency).laplacian, eigen_cache)
        h1, _ = pair_responses(basis, FilterPair.H1_VS_H2)
        coefficients = random_unit_coefficients(40, 4, rng)
        filtered = basis.eigvecs @ (h1[:, None] * coefficients)
        intra, inter = edge_distance_totals(adjacency, labels, filtered)
        expected = ((coefficients ** 2) * (basis.eigvals * h1 ** 2)[:, None]).sum(axis=0)
        np.testing.assert_allclose(intra + inter, expected, atol=1e-8)

    @pytest.mark.parametrize("r", [0.85, 0.1])
    @pytest.mark.parametrize("pair", list(FilterPair))
    def test_matches_closed_form(self, eigen_cache, r, pair):
        graph = sbm_generate(SbmConfig.from_homophily(120, 3, r, seed=1))
        basis = _basis(graph, eigen_cache)
        mean, stderr = mc_cluster_gap(graph, basis, pair, n_trials=200, seed=0)
        predicted, _ = predicted_cluster_gap(graph, basis, pair)
        assert abs(mean - predicted) <= 4 * stderr

    @pytest.mark.parametrize("r", [0.85, 0.1])
    @pytest.mark.parametrize("pair", list(FilterPair))
    def test_matches_measured_homophily_form(self, eigen_cache, r, pair):
        graph = sbm_generate(SbmConfig.from_homophily(120, 3, r, seed=1))
        basis = _basis(graph, eigen_cache)
        mean, stderr = mc_cluster_gap(graph, basis, pair, n_trials=200, seed=0)
        measured = homophily_ratio(graph)
        expected = 2 * 3 / (2 * 120 ** 2) * expected_edge_gap(basis, pair) * (1 - 3 * measured)
        assert abs(mean - expected) <= 4 * stderr

    def test_homophilic_graph_favours_global_low_pass(self, eigen_cache):
        graph = sbm_generate(SbmConfig.from_homophily(120, 3, 0.85, seed=1))
        mean, stderr = mc_cluster_gap(graph, _basis(graph, eigen_cache), FilterPair.H1_VS_H2, n_trials=200)
        assert mean > 2 * stderr

    def test_heterophilic_graph_favours_local_high_pass(self, eigen_cache):
        graph = sbm_generate(SbmConfig.from_homophily(120, 3, 0.05, seed=1))
        mean, stderr = mc_cluster_gap(graph, _basis(graph, eigen_cache), FilterPair.H3_VS_H4, n_trials=200)
        assert mean < -2 * stderr

    def test_seeded_trials(self, eigen_cache):
        graph = sbm_generate(SbmConfig.from_homophily(60, 3, 0.7, seed=3))
        basis = _basis(graph, eigen_cache)
        first = mc_cluster_gap(graph, basis, FilterPair.H1_VS_H2, n_trials=10, seed=4)
        second = mc_cluster_gap(graph, basis, FilterPair.H1_VS_H2, n_trials=10, seed=4)
        assert first == second

    def test_needs_two_trials(self, labelled_graph, eigen_cache):
        with pytest.raises(UsageError):
            mc_cluster_gap(labelled_graph, _basis(labelled_graph, eigen_cache), FilterPair.H1_VS_H2, n_trials=1)


class TestVerdict:
    def test_balanced_graph_is_inconclusive(self):
        assert judge(1 / 3, 3, mean=1.0, stderr=0.01) is Verdict.INCONCLUSIVE

    def test_noisy_gap_is_inconclusive(self):
        assert judge(0.9, 3, mean=0.01, stderr=0.01) is Verdict.INCONCLUSIVE

    def test_sign_agreement(self):
        assert judge(0.9, 3, mean=1.0, stderr=0.1) is Verdict.PASS
        assert judge(0.9, 3, mean=-1.0, stderr=0.1) is Verdict.FAIL
        assert judge(0.1, 3, mean=-1.0, stderr=0.1) is Verdict.PASS


def test_verify_theorem_sweep(eigen_cache):
    sweep = [SbmConfig.from_homophily(120, 3, r, seed=i) for i, r in enumerate([0.05, 0.9])]
    reports = verify_theorem(sweep, n_trials=200, seed=0, cache=eigen_cache)
    assert len(reports) == 4
    verdicts = {(round(rep.homophily, 1) > 0.5, rep.pair): rep.verdict for rep in reports}
    assert verdicts[(True, FilterPair.H1_VS_H2)] is Verdict.PASS
    assert verdicts[(False, FilterPair.H3_VS_H4)] is Verdict.PASS
    row = reports[0].to_row()
    assert list(row)[:6] == ["r", "pair", "analytic_gap", "mc_mean", "mc_stderr", "verdict"]
