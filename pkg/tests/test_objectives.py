import numpy as np
import pytest
import torch

from network.objectives import high_order_target, loss_clu, loss_hs, loss_re, predict, soft_assign, target_distribution


def t(values):
    return torch.as_tensor(np.asarray(values, dtype=np.float64))


class TestStructureLoss:
    def test_exact_match_is_zero(self):
        embedding = t([[1.0, 0.0], [0.0, 2.0]])
        target = embedding @ embedding.T
        assert loss_hs(embedding, target).item() == 0.0

    def test_zero_embedding(self):
        adj_norm = np.array([[0.5, 0.5], [0.5, 0.5]])
        target = high_order_target(adj_norm, 1)
        assert loss_hs(t(np.zeros((2, 3))), t(target)).item() == pytest.approx((adj_norm ** 2).sum() / 4)

    def test_single_node(self):
        assert loss_hs(t([[1.0]]), t(high_order_target(np.array([[1.0]]), 1))).item() == 0.0

    def test_high_order_target_sums_powers(self):
        a = np.array([[0.2, 0.4], [0.4, 0.1]])
        np.testing.assert_allclose(high_order_target(a, 3), a + a @ a + a @ a @ a)


class TestReconstructionLoss:
    def test_identical(self):
        x = t([[1.0, 2.0], [3.0, -1.0]])
        assert loss_re(x, x.clone()).item() == pytest.approx(0.0, abs=1e-14)

    def test_negated(self):
        x = t([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
        assert loss_re(x, -x).item() == pytest.approx(12.0)

    def test_orthogonal(self):
        x = t([[1.0, 0.0], [0.0, 1.0]])
        assert loss_re(x, t([[0.0, 3.0], [2.0, 0.0]])).item() == pytest.approx(2.0)

    def test_zero_rows_contribute_one(self):
        x = t([[0.0, 0.0], [1.0, 0.0]])
        recon = t([[1.0, 1.0], [1.0, 0.0]])
        loss = loss_re(x, recon)
        assert loss.item() == pytest.approx(1.0)
        recon.requires_grad_(True)
        loss_re(x, recon).backward()
        assert torch.isfinite(recon.grad).all()


class TestSoftAssignment:
    def test_hand_example(self):
        soft = soft_assign(t([[0.0, 0.0]]), t([[0.0, 0.0], [np.sqrt(3.0), 0.0]]), beta=1.0)
        np.testing.assert_allclose(soft.numpy(), [[0.8, 0.2]])

    def test_equidistant(self):
        soft = soft_assign(t([[0.0]]), t([[-1.0], [1.0]]))
        np.testing.assert_allclose(soft.numpy(), [[0.5, 0.5]])

    def test_closest_center_wins(self):
        centers = t([[0.0, 0.0], [3.0, 0.0], [0.0, 5.0]])
        soft = soft_assign(centers.clone(), centers)
        assert predict(soft).tolist() == [0, 1, 2]

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        soft = soft_assign(t(rng.normal(size=(40, 5))), t(rng.normal(size=(4, 5))), beta=2.5)
        np.testing.assert_allclose(soft.sum(dim=1).numpy(), 1.0, atol=1e-10)


class TestTargetDistribution:
    def test_hand_example(self):
        target = target_distribution(t([[0.8, 0.2], [0.6, 0.4]]))
        np.testing.assert_allclose(target.numpy()[0], [0.8727, 0.1273], atol=1e-4)
        np.testing.assert_allclose(target.sum(dim=1).numpy(), 1.0, atol=1e-10)

    def test_uniform_stays_uniform(self):
        np.testing.assert_allclose(target_distribution(t(np.full((4, 2), 0.5))).numpy(), 0.5)

    def test_one_hot_fixed_point(self):
        one_hot = t([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(target_distribution(one_hot).numpy(), one_hot.numpy())

    def test_empty_cluster_contributes_zero(self):
        target = target_distribution(t([[1.0, 0.0, 0.0], [0.5, 0.5, 0.0]]))
        assert torch.isfinite(target).all()
        np.testing.assert_array_equal(target[:, 2].numpy(), 0.0)

    def test_sharpens_with_balanced_columns(self):
        soft = t([[0.7, 0.3], [0.3, 0.7], [0.55, 0.45], [0.45, 0.55]])
        target = target_distribution(soft)
        assert torch.all(target.max(dim=1).values >= soft.max(dim=1).values)


class TestClusteringLoss:
    def test_hand_example(self):
        soft = t(np.full((3, 2), 0.5))
        target = t(np.tile([0.9, 0.1], (3, 1)))
        expected = 3 * (0.9 * np.log(1.8) + 0.1 * np.log(0.2))
        assert loss_clu(soft, target).item() == pytest.approx(expected)
        assert expected / 3 == pytest.approx(0.3681, abs=1e-4)

    def test_self_divergence_is_exactly_zero(self):
        soft = t([[1.0, 0.0], [0.25, 0.75]])
        assert loss_clu(soft, soft).item() == 0.0

    def test_non_negative(self):
        rng = np.random.default_rng(3)
        soft = torch.softmax(t(rng.normal(size=(10, 4))), dim=1)
        target = torch.softmax(t(rng.normal(size=(10, 4))), dim=1)
        assert loss_clu(soft, target).item() >= 0.0

    def test_no_gradient_through_target(self):
        soft = t([[0.6, 0.4]]).requires_grad_(True)
        target = t([[0.9, 0.1]]).requires_grad_(True)
        loss_clu(soft, target).backward()
        assert target.grad is None
        assert soft.grad is not None


class TestPredict:
    def test_rows(self):
        assert predict(np.array([[0.2, 0.5, 0.3], [1.0, 0.0, 0.0]])).tolist() == [1, 0]

    def test_ties_go_to_smallest(self):
        assert predict(t(np.full((2, 3), 1 / 3))).tolist() == [0, 0]
