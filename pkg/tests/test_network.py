import dataclasses

import numpy as np
import pytest
import torch

from conftest import cycle_graph, random_graph
from graph.graph_core import normalize
from models.base_models import Activation, FilterCombo, FilterKind, GraphSource, ModelConfig
from models.errors import ConfigError, ShapeError
from network.pfgc_network import PFGCNetwork, encode, initialize_state, se_block, squeeze_excite
from network.propagation import build_propagation, propagation_operator
from restructure.restructuring import restructure
from spectral.spectral_filters import eig_sym, filter_operator


@pytest.fixture
def bases(eigen_cache):
    rng = np.random.default_rng(21)
    low = eig_sym(normalize(random_graph(16, 0.3, rng)).laplacian, eigen_cache)
    high = eig_sym(normalize(random_graph(16, 0.3, rng)).laplacian, eigen_cache)
    other = eig_sym(normalize(random_graph(16, 0.3, rng)).laplacian, eigen_cache)
    return low, high, other


@pytest.fixture
def linear_config():
    return ModelConfig(n_layers=2, hidden_dims=(6, 4), se_ratio=2, hidden_activation=Activation.IDENTITY)


class TestModelConfig:
    def test_defaults(self):
        config = ModelConfig()
        assert config.hidden_dims == (256, 64)
        assert config.mu == 0.3
        assert config.q_update_interval == 5
        assert config.warmup_epochs == 50

    @pytest.mark.parametrize(
        "changes",
        [
            {"mu": 1.5},
            {"hidden_dims": (8, 6), "se_ratio": 4},
            {"n_layers": 3},
            {"beta": 0.0},
            {"lr": -1.0},
            {"gamma1": -0.1},
            {"q_update_interval": 0},
        ],
    )
    def test_rejects_invalid_values(self, changes):
        with pytest.raises(ConfigError):
            ModelConfig(**changes)

    def test_coerces_enum_values(self):
        config = ModelConfig(filter_combo="PFGC2", graph_source="raw", hidden_activation="identity")
        assert config.filter_combo is FilterCombo.PFGC2
        assert config.graph_source is GraphSource.RAW

    def test_dict_round_trip(self):
        config = ModelConfig(hidden_dims=(8, 4), se_ratio=2, mu=0.5, filter_combo=FilterCombo.PFGC3)
        assert ModelConfig.from_dict(config.to_dict()) == config

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict({"momentum": 0.9})


class TestPropagation:
    def test_mu_zero_ignores_high_basis(self, bases):
        low, high, other = bases
        config = ModelConfig(mu=0.0)
        np.testing.assert_array_equal(propagation_operator(low, high, config), propagation_operator(low, other, config))
        np.testing.assert_allclose(propagation_operator(low, high, config), filter_operator(FilterKind.GLOBAL_LOW_PASS, low))

    def test_mu_one_ignores_low_basis(self, bases):
        low, high, other = bases
        config = ModelConfig(mu=1.0)
        np.testing.assert_array_equal(propagation_operator(low, high, config), propagation_operator(other, high, config))

    def test_combo_kinds(self, bases):
        low, high, _ = bases
        config = ModelConfig(mu=0.4, filter_combo=FilterCombo.PFGC3)
        expected = 0.6 * filter_operator(FilterKind.LOCAL_LOW_PASS, low) + 0.4 * filter_operator(FilterKind.GLOBAL_HIGH_PASS, high)
        np.testing.assert_allclose(propagation_operator(low, high, config), expected, atol=1e-12)

    def test_size_mismatch(self, eigen_cache, bases):
        low, _, _ = bases
        with pytest.raises(ShapeError):
            propagation_operator(low, eig_sym(np.eye(3), eigen_cache), ModelConfig())

    def test_raw_source_uses_input_graph(self, labelled_graph, eigen_cache):
        restructured = restructure(labelled_graph, top_k=3)
        plan = build_propagation(labelled_graph, restructured, ModelConfig(graph_source=GraphSource.RAW), eigen_cache)
        assert plan.basis_low is plan.basis_high
        expected = eig_sym(normalize(labelled_graph.adjacency).laplacian, eigen_cache)
        assert plan.basis_low.source_hash == expected.source_hash


class TestEncoder:
    def test_constant_signal_preserved_by_low_pass(self, eigen_cache):
        graph = cycle_graph(10, n_features=2)
        basis = eig_sym(normalize(graph.adjacency).laplacian, eigen_cache)
        config = ModelConfig(n_layers=1, hidden_dims=(2,), se_ratio=1, mu=0.0)
        state = initialize_state(2, 2, config)
        state.layer_weights = [np.eye(2)]
        features = np.full((10, 2), 3.0)
        np.testing.assert_allclose(encode(features, basis, basis, state, config), features, atol=1e-12)

    def test_linear_in_features(self, bases, linear_config):
        low, high, _ = bases
        state = initialize_state(5, 2, linear_config)
        rng = np.random.default_rng(0)
        x1, x2 = rng.normal(size=(16, 5)), rng.normal(size=(16, 5))
        combined = encode(2.0 * x1 - 0.5 * x2, low, high, state, linear_config)
        separate = 2.0 * encode(x1, low, high, state, linear_config) - 0.5 * encode(x2, low, high, state, linear_config)
        np.testing.assert_allclose(combined, separate, atol=1e-10)

    def test_relu_only_between_layers(self, bases):
        low, high, _ = bases
        config = ModelConfig(n_layers=1, hidden_dims=(4,), se_ratio=2)
        state = initialize_state(3, 2, config)
        features = np.random.default_rng(1).normal(size=(16, 3))
        assert (encode(features, low, high, state, config) < 0).any()

    def test_state_round_trip(self, linear_config):
        torch.manual_seed(0)
        network = PFGCNetwork(5, 3, linear_config)
        network.set_centers(np.arange(12, dtype=float).reshape(3, 4))
        state = network.to_state()
        rebuilt = PFGCNetwork.from_state(state, linear_config).to_state()
        for name, value in state.parameters().items():
            np.testing.assert_array_equal(rebuilt.parameters()[name], value)

    def test_initialize_state_is_seeded(self, linear_config):
        first = initialize_state(5, 2, linear_config)
        second = initialize_state(5, 2, linear_config)
        np.testing.assert_array_equal(first.layer_weights[0], second.layer_weights[0])
        assert first.centers is None


class TestSqueezeExcite:
    def test_zero_weights_give_half_gate(self, linear_config):
        state = dataclasses.replace(initialize_state(5, 2, linear_config), se_down=np.zeros((4, 2)), se_up=np.zeros((2, 4)))
        hidden = np.random.default_rng(2).normal(size=(7, 4))
        np.testing.assert_allclose(se_block(hidden, state), 0.5 * hidden)

    def test_zero_hidden(self, linear_config):
        state = initialize_state(5, 2, linear_config)
        np.testing.assert_array_equal(se_block(np.zeros((7, 4)), state), 0.0)

    def test_disabled_block_is_identity(self, linear_config):
        state = initialize_state(5, 2, linear_config)
        hidden = np.random.default_rng(3).normal(size=(7, 4))
        np.testing.assert_array_equal(se_block(hidden, state, use_se=False), hidden)

    def test_gate_is_per_feature_and_bounded(self):
        hidden = torch.as_tensor(np.random.default_rng(4).normal(size=(9, 4)))
        gate = squeeze_excite(hidden, torch.ones(4, 2, dtype=torch.float64), torch.ones(2, 4, dtype=torch.float64))
        assert gate.shape == (4,)
        assert torch.all((gate > 0) & (gate < 1))
