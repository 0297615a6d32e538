import numpy as np
import pytest

from stad.core.exceptions import DataError
from stad.models import AugmentConfig, TeacherLossWeights
from stad.nets import build_decoder
from stad.numerics import ComputeGraph, Tensor, backward, gradcheck
from stad.training import (
    knowledge_loss_from_descriptors,
    loss_compactness,
    metric_loss_from_descriptors,
    sample_triplet_batch,
    student_loss,
    teacher_loss,
)

INSTANCES = 20
TOLERANCE = 1e-3


def _distances(a, b):
    return np.square(a - b).sum(axis=1)


class TestMetricLoss:
    def test_anchor_swap_uses_the_closer_negative_distance(self):
        anchor, positive, negative = Tensor([[0.0, 0.0]]), Tensor([[1.0, 0.0]]), Tensor([[1.5, 0.0]])
        loss = metric_loss_from_descriptors(anchor, positive, negative, delta=1.0)
        # d+ = 1, d(a, n) = 2.25, d(p, n) = 0.25
        assert loss.item() == pytest.approx(1.75)

    def test_far_negative_gives_zero_loss(self):
        a = Tensor([[0.0, 0.0]])
        loss = metric_loss_from_descriptors(a, a, Tensor([[10.0, 0.0]]), delta=1.0)
        assert loss.item() == 0.0

    def test_exchanging_anchor_and_positive(self, rng):
        for _ in range(INSTANCES):
            a, p, n = (Tensor(rng.normal(size=(4, 3))) for _ in range(3))
            forward = metric_loss_from_descriptors(a, p, n, delta=1.0).item()
            swapped = metric_loss_from_descriptors(p, a, n, delta=1.0).item()
            assert forward == swapped

    def test_gradient(self, rng):
        checked = 0
        while checked < INSTANCES:
            a, p, n = (rng.normal(size=(3, 4)) for _ in range(3))
            d_pos, d_neg = _distances(a, p), np.minimum(_distances(a, n), _distances(p, n))
            # Stay away from the min() switch and the hinge so finite differences see one branch
            if np.min(np.abs(_distances(a, n) - _distances(p, n))) < 0.25 or np.min(np.abs(2.0 + d_pos - d_neg)) < 0.25:
                continue
            fn = lambda ts: metric_loss_from_descriptors(ts[0], ts[1], ts[2], delta=2.0)
            # Piecewise quadratic: central differences are exact away from the kinks
            assert gradcheck(fn, [a, p, n], h=1e-2) <= TOLERANCE
            checked += 1


class TestCompactness:
    def test_identical_columns_are_fully_correlated(self, rng):
        column = rng.normal(size=(10, 1))
        loss = loss_compactness(np.tile(column, (1, 3)))
        assert loss.item() == pytest.approx(6.0, abs=1e-4)

    def test_positive_multiple_in_two_dimensions(self, rng):
        first = rng.normal(size=(9, 1))
        assert loss_compactness(np.hstack([first, 2.5 * first])).item() == pytest.approx(2.0, abs=1e-5)

    def test_invariant_under_per_dimension_affine_maps(self, rng):
        for _ in range(INSTANCES):
            y = rng.normal(size=(8, 4))
            scale = rng.uniform(0.5, 4.0, size=4)
            shift = rng.normal(size=4)
            original = loss_compactness(y).item()
            mapped = loss_compactness(y * scale + shift).item()
            assert mapped == pytest.approx(original, abs=1e-5)

    def test_constant_dimension_contributes_nothing(self, rng):
        y = rng.normal(size=(12, 3))
        y[:, 1] = 0.7
        full = loss_compactness(y).item()
        without = loss_compactness(y[:, [0, 2]]).item()
        assert np.isfinite(full)
        assert full == pytest.approx(without, abs=1e-5)

    def test_needs_two_descriptors(self):
        with pytest.raises(DataError):
            loss_compactness(np.ones((1, 4)))

    def test_gradient(self, rng):
        for _ in range(INSTANCES):
            y = rng.normal(size=(8, 4))
            assert gradcheck(lambda ts: loss_compactness(ts[0]), [y], h=1e-2) <= TOLERANCE


class TestKnowledgeLoss:
    def test_zero_decoding_against_a_unit_target(self):
        dec = build_decoder(4, 6, seed=0)
        dec.weight.data[:] = 0.0
        dec.bias.data[:] = 0.0
        target = np.zeros((1, 6))
        target[0, 2] = 1.0
        loss = knowledge_loss_from_descriptors(dec, Tensor(np.ones((1, 4))), target)
        assert loss.item() == 1.0

    def test_gradient(self, rng):
        dec = build_decoder(4, 6, seed=0)
        for _ in range(INSTANCES):
            y = rng.normal(size=(3, 4))
            targets = rng.normal(size=(3, 6))
            fn = lambda ts: knowledge_loss_from_descriptors(dec, ts[0], ts[1])
            assert gradcheck(fn, [y, targets], h=1e-2) <= TOLERANCE

    def test_decoder_parameters_receive_gradients(self, rng):
        dec = build_decoder(4, 6, seed=0)
        with ComputeGraph() as graph:
            loss = knowledge_loss_from_descriptors(dec, Tensor(rng.normal(size=(3, 4))), rng.normal(size=(3, 6)))
        backward(graph, loss)
        assert np.abs(dec.weight.grad).sum() > 0


class TestStudentLoss:
    def test_zero_for_a_perfect_prediction(self, rng):
        target = rng.normal(size=(4, 3, 3))
        assert student_loss(Tensor(target[None]), target).item() == 0.0

    def test_mean_over_pixels_of_squared_norms(self, rng):
        prediction, target = rng.normal(size=(4, 3, 5)), rng.normal(size=(4, 3, 5))
        expected = np.square(prediction - target).sum() / 15
        assert student_loss(Tensor(prediction), target).item() == pytest.approx(expected, rel=1e-5)

    def test_gradient(self, rng):
        for _ in range(INSTANCES):
            prediction, target = rng.normal(size=(3, 2, 2)), rng.normal(size=(3, 2, 2))
            assert gradcheck(lambda ts: student_loss(ts[0], ts[1]), [prediction, target], h=1e-2) <= TOLERANCE


class TestTeacherLoss:
    @pytest.fixture
    def batch(self, rng, small_net):
        corpus = [rng.random((3, 40, 40)).astype(np.float32) for _ in range(3)]
        triplets = sample_triplet_batch(corpus, AugmentConfig(patch_size=17, rng_seed=2), iteration=1, batch_size=4)
        distill_patches = rng.random((4, 3, 17, 17)).astype(np.float32)
        distill_targets = rng.normal(size=(4, 6)).astype(np.float32)
        return small_net(17, seed=1), build_decoder(8, 6, seed=1), triplets, distill_patches, distill_targets

    def test_doubling_weights_doubles_the_total(self, batch):
        net, dec, triplets, patches, targets = batch
        weights = TeacherLossWeights(lambda_k=0.7, lambda_m=1.3, lambda_c=0.4, margin=1.0)
        single, _ = teacher_loss(net, weights, triplets, dec, patches, targets)
        double, _ = teacher_loss(net, weights.scaled(2.0), triplets, dec, patches, targets)
        assert double.item() == pytest.approx(2.0 * single.item(), rel=1e-6)

    def test_parts_report_every_weighted_term(self, batch):
        net, dec, triplets, patches, targets = batch
        weights = TeacherLossWeights(lambda_k=1.0, lambda_m=1.0, lambda_c=1.0)
        total, parts = teacher_loss(net, weights, triplets, dec, patches, targets)
        assert set(parts) == {"knowledge", "metric", "compactness", "total"}
        assert parts["total"] == pytest.approx(parts["knowledge"] + parts["metric"] + parts["compactness"], rel=1e-5)

    def test_zero_weight_terms_are_skipped(self, batch):
        net, _, triplets, _, _ = batch
        _, parts = teacher_loss(net, TeacherLossWeights(lambda_k=0.0, lambda_m=1.0, lambda_c=0.0), triplets)
        assert set(parts) == {"metric", "total"}

    def test_distillation_without_targets_fails(self, batch):
        net, _, triplets, _, _ = batch
        with pytest.raises(DataError):
            teacher_loss(net, TeacherLossWeights(lambda_k=1.0), triplets)

    def test_metric_learning_without_triplets_fails(self, batch):
        net, dec, _, patches, targets = batch
        with pytest.raises(DataError):
            teacher_loss(net, TeacherLossWeights(lambda_k=1.0, lambda_m=1.0), None, dec, patches, targets)
