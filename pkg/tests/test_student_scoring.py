import numpy as np
import pytest

from stad.core.exceptions import ConfigError, DataError, ShapeError
from stad.models import FeatureStats, ScaleArtifacts, ScoreCalibration, StudentEnsemble
from stad.nets import densify
from stad.services.scoring_service import ScoringService, combine_scores, error_and_variance
from stad.numerics import current_graph
from stad.services import student_service
from stad.services.student_service import StatsAccumulator, StudentService, derive_student_seed


def _artifacts(net, num_students=2, stats=None):
    students = [net.clone() for _ in range(num_students)]
    stats = stats or FeatureStats(mu=np.zeros(net.descriptor_dim), sigma=np.ones(net.descriptor_dim))
    return ScaleArtifacts(teacher=net, ensemble=StudentEnsemble(students=students), stats=stats)


class TestErrorAndVariance:
    def test_single_student_has_zero_variance(self, rng):
        predictions = rng.normal(size=(1, 4, 5, 6))
        _, v = error_and_variance(predictions, rng.normal(size=(4, 5, 6)))
        np.testing.assert_array_equal(v, 0.0)

    @pytest.mark.parametrize("members", [2, 3, 5])
    def test_variance_is_non_negative(self, members, rng):
        predictions = rng.normal(size=(members, 8, 4, 4)) * 100.0 + 50.0
        _, v = error_and_variance(predictions, rng.normal(size=(8, 4, 4)))
        assert v.min() >= -1e-6

    def test_matches_the_moment_formulas(self, rng):
        predictions = rng.normal(size=(3, 4, 2, 2))
        target = rng.normal(size=(4, 2, 2))
        e, v = error_and_variance(predictions, target)
        mean = predictions.mean(axis=0)
        np.testing.assert_allclose(e, np.square(mean - target).sum(axis=0), rtol=1e-5)
        second = np.square(predictions).sum(axis=1).mean(axis=0)
        np.testing.assert_allclose(v, second - np.square(mean).sum(axis=0), rtol=1e-4, atol=1e-5)

    def test_member_order_does_not_matter(self, rng):
        predictions = rng.normal(size=(4, 6, 3, 3))
        target = rng.normal(size=(6, 3, 3))
        e, v = error_and_variance(predictions, target)
        for order in ([3, 1, 0, 2], [2, 3, 1, 0]):
            e_perm, v_perm = error_and_variance(predictions[order], target)
            np.testing.assert_allclose(e_perm, e, rtol=1e-6, atol=1e-7)
            np.testing.assert_allclose(v_perm, v, rtol=1e-6, atol=1e-7)

    def test_shape_mismatch(self, rng):
        with pytest.raises(ShapeError):
            error_and_variance(rng.normal(size=(2, 4, 3, 3)), rng.normal(size=(5, 3, 3)))


class TestStatistics:
    def test_accumulator_matches_numpy(self, rng):
        maps = [rng.normal(loc=2.0, scale=3.0, size=(5, 6, 7)) for _ in range(3)]
        acc = StatsAccumulator(5)
        for m in maps:
            acc.update(m)
        stats = acc.finalize(1e-8)
        flat = np.concatenate([m.reshape(5, -1) for m in maps], axis=1)
        np.testing.assert_allclose(stats.mu, flat.mean(axis=1), rtol=1e-5)
        np.testing.assert_allclose(stats.sigma, flat.std(axis=1), rtol=1e-4)
        assert stats.count == 3 * 6 * 7

    def test_constant_dimension_is_floored(self):
        acc = StatsAccumulator(2)
        acc.update(np.stack([np.ones((3, 3)), np.arange(9.0).reshape(3, 3)]))
        stats = acc.finalize(1e-3)
        assert stats.sigma[0] == pytest.approx(1e-3)

    def test_empty_accumulator(self):
        with pytest.raises(DataError):
            StatsAccumulator(3).finalize(1e-8)

    def test_feature_stats_over_dense_maps(self, tiny_config, small_net, rng):
        net = small_net(17)
        images = [rng.random((3, 20, 21)).astype(np.float32) for _ in range(2)]
        stats = StudentService(tiny_config).compute_feature_stats(densify(net), images)
        assert stats.dim == 8
        assert stats.count == 2 * 20 * 21


def test_student_seeds_are_distinct_and_stable():
    seeds = [derive_student_seed(7, 17, i) for i in range(4)]
    assert len(set(seeds)) == 4
    assert seeds == [derive_student_seed(7, 17, i) for i in range(4)]
    assert derive_student_seed(7, 33, 0) != seeds[0]


class TestStudentTraining:
    def test_loss_decreases(self, tiny_config, small_net, rng):
        config = tiny_config.with_overrides(student_lr=1e-3)
        net = small_net(17, seed=2)
        images = [rng.random((3, 24, 24)).astype(np.float32) for _ in range(3)]
        service = StudentService(config)
        stats = service.compute_feature_stats(densify(net), images)
        ensemble = service.train_students(net, stats, images, num_students=1, epochs=5)
        history = ensemble.loss_history[0]
        assert len(history) == 5
        assert history[-1] < history[0]

    def test_progress_callback_and_summary(self, tiny_config, small_net, rng):
        net = small_net(17)
        images = [rng.random((3, 20, 20)).astype(np.float32)]
        service = StudentService(tiny_config)
        stats = service.compute_feature_stats(densify(net), images)
        calls = []
        ensemble = service.train_students(net, stats, images, num_students=2, epochs=2,
                                          progress_callback=lambda i, epoch, loss: calls.append((i, epoch)))
        assert sorted(calls) == [(0, 1), (0, 2), (1, 1), (1, 2)]
        assert set(StudentService.loss_summary(ensemble)) == {"student_1", "student_2"}
        assert ensemble.seeds == [derive_student_seed(tiny_config.seed, 17, i) for i in range(2)]

    def test_recomputed_targets_are_built_outside_the_student_graph(self, tiny_config, small_net, rng, monkeypatch):
        config = tiny_config.with_overrides(target_cache_mb=0)
        net = small_net(17)
        images = [rng.random((3, 20, 20)).astype(np.float32)]
        service = StudentService(config)
        stats = service.compute_feature_stats(densify(net), images)
        graphs = []
        extract = student_service.extract_dense

        def _recording_extract(*args, **kwargs):
            graphs.append(current_graph())
            return extract(*args, **kwargs)

        monkeypatch.setattr(student_service, "extract_dense", _recording_extract)
        service.train_students(net, stats, images, num_students=1, epochs=2)
        assert graphs == [None, None]

    def test_zero_epochs_keeps_the_initial_students(self, tiny_config, small_net, rng):
        net = small_net(17)
        images = [rng.random((3, 20, 20)).astype(np.float32)]
        service = StudentService(tiny_config)
        stats = service.compute_feature_stats(densify(net), images)
        ensemble = service.train_students(net, stats, images, num_students=1, epochs=0)
        assert ensemble.epochs_trained == 0
        assert ensemble.loss_history == [[]]
        assert StudentService.loss_summary(ensemble) == {}
        fresh = small_net(17, seed=ensemble.seeds[0])
        for (name, trained), (_, initial) in zip(ensemble.students[0].params.items(), fresh.params.items()):
            np.testing.assert_array_equal(trained.data, initial.data, err_msg=name)

    def test_zero_epochs_on_patches(self, tiny_config, small_net, rng):
        net = small_net(17)
        patches = rng.random((4, 3, 17, 17)).astype(np.float32)
        stats = FeatureStats(mu=np.zeros(8), sigma=np.ones(8))
        ensemble = StudentService(tiny_config).train_students_on_patches(net, stats, patches, num_students=2, epochs=0)
        assert ensemble.epochs_trained == 0
        assert ensemble.loss_history == [[], []]

    def test_negative_epochs_are_rejected(self, tiny_config, small_net, rng):
        net = small_net(17)
        stats = FeatureStats(mu=np.zeros(8), sigma=np.ones(8))
        with pytest.raises(ConfigError):
            StudentService(tiny_config).train_students(net, stats, [rng.random((3, 20, 20))], epochs=-1)

    def test_mismatched_stats_are_rejected(self, tiny_config, small_net, rng):
        net = small_net(17)
        stats = FeatureStats(mu=np.zeros(3), sigma=np.ones(3))
        with pytest.raises(ConfigError):
            StudentService(tiny_config).train_students(net, stats, [rng.random((3, 20, 20))])

    def test_no_images(self, tiny_config, small_net):
        net = small_net(17)
        stats = FeatureStats(mu=np.zeros(8), sigma=np.ones(8))
        with pytest.raises(DataError):
            StudentService(tiny_config).train_students(net, stats, [])


class TestScoring:
    def test_teacher_clones_score_zero(self, tiny_config, small_net, rng):
        artifacts = _artifacts(small_net(17, seed=3))
        e, v = ScoringService(tiny_config).raw_scores(artifacts, rng.random((3, 22, 22)).astype(np.float32))
        assert e.shape == (22, 22)
        np.testing.assert_array_equal(e, 0.0)
        np.testing.assert_array_equal(v, 0.0)

    def test_calibrated_validation_scores_are_standardized(self, tiny_config, rng):
        service = ScoringService(tiny_config)
        e_maps = [rng.gamma(2.0, size=(9, 11)) for _ in range(3)]
        v_maps = [rng.gamma(1.0, size=(9, 11)) for _ in range(3)]
        calibration = service.calibrate(e_maps, v_maps, patch_size=17)
        e_tilde = np.concatenate([calibration.normalize_error(m).ravel() for m in e_maps])
        v_tilde = np.concatenate([calibration.normalize_variance(m).ravel() for m in v_maps])
        for values in (e_tilde, v_tilde):
            assert abs(values.mean()) < 1e-4
            assert abs(values.std() - 1.0) < 1e-4
        assert calibration.num_pixels == 3 * 9 * 11

    def test_calibration_needs_validation_images(self, tiny_config):
        with pytest.raises(DataError):
            ScoringService(tiny_config).calibrate([], [])

    def test_score_modes(self, tiny_config, rng):
        calibration = ScoringService(tiny_config).calibrate([rng.random((4, 4))], [rng.random((4, 4))])
        e, v = rng.random((4, 4)), rng.random((4, 4))
        combined = combine_scores(e, v, calibration, "combined")
        np.testing.assert_allclose(
            combined,
            combine_scores(e, v, calibration, "regression") + combine_scores(e, v, calibration, "variance"),
            rtol=1e-6,
        )
        with pytest.raises(ConfigError):
            combine_scores(e, v, calibration, "median")

    def test_uncalibrated_scale_is_rejected(self, tiny_config, small_net, rng):
        artifacts = _artifacts(small_net(17))
        service = ScoringService(tiny_config)
        with pytest.raises(ConfigError):
            service.anomaly_map(rng.random((3, 20, 20)).astype(np.float32), [artifacts])
        with pytest.raises(ConfigError):
            service.image_level_score([artifacts], rng.random((3, 30, 30)).astype(np.float32))

    def _calibrated_scales(self, service, small_net, rng, scales):
        validation = [rng.random((3, 40, 40)).astype(np.float32)]
        artifacts = []
        for i, p in enumerate(scales):
            teacher = small_net(p, seed=i)
            students = [small_net(p, seed=10 + i * 5 + k) for k in range(2)]
            stats = FeatureStats(mu=np.zeros(8), sigma=np.ones(8))
            scale = ScaleArtifacts(teacher=teacher, ensemble=StudentEnsemble(students=students), stats=stats)
            scale.calibration = service.calibrate_scale(scale, validation)
            artifacts.append(scale)
        return artifacts

    def test_fused_map_is_the_mean_of_scale_maps(self, tiny_config, small_net, rng):
        service = ScoringService(tiny_config)
        artifacts = self._calibrated_scales(service, small_net, rng, [17, 33])
        image = rng.random((3, 40, 40)).astype(np.float32)
        amap, per_scale = service.anomaly_map_with_scales(image, artifacts)
        assert amap.shape == (40, 40)
        assert amap.scales == [17, 33]
        assert len(amap.calibration_ids) == 2
        np.testing.assert_allclose(amap.scores, (per_scale[17] + per_scale[33]) / 2, rtol=1e-6, atol=1e-6)

    def test_single_scale_map_is_that_scale(self, tiny_config, small_net, rng):
        service = ScoringService(tiny_config)
        artifacts = self._calibrated_scales(service, small_net, rng, [17])
        image = rng.random((3, 24, 30)).astype(np.float32)
        np.testing.assert_allclose(service.anomaly_map(image, artifacts).scores, service.scale_map(artifacts[0], image))

    def test_threaded_scoring_matches_serial(self, tiny_config, small_net, rng):
        service = ScoringService(tiny_config)
        artifacts = self._calibrated_scales(service, small_net, rng, [17])
        images = [rng.random((3, 20, 20)).astype(np.float32) for _ in range(4)]
        serial = service.score_images(images, artifacts, workers=1)
        threaded = service.score_images(images, artifacts, workers=3)
        for (a, _), (b, _) in zip(serial, threaded):
            np.testing.assert_array_equal(a.scores, b.scores)

    def test_image_level_score_is_finite(self, tiny_config, small_net, rng):
        service = ScoringService(tiny_config)
        artifacts = self._calibrated_scales(service, small_net, rng, [17])
        score = service.image_level_score(artifacts, rng.random((3, 30, 30)).astype(np.float32))
        assert np.isfinite(score)

    def test_image_level_score_of_a_teacher_clone(self, tiny_config, small_net, rng):
        artifacts = _artifacts(small_net(17, seed=6), num_students=1)
        artifacts.calibration = ScoreCalibration(e_mu=0.3, e_sigma=2.0, v_mu=0.1, v_sigma=0.5, patch_size=17)
        score = ScoringService(tiny_config).image_level_score([artifacts], rng.random((3, 17, 17)).astype(np.float32))
        assert score == pytest.approx(-0.3 / 2.0 - 0.1 / 0.5, rel=1e-6)

    def test_raw_maps(self, tiny_config, small_net, rng):
        net = small_net(17, seed=4)
        artifacts = _artifacts(net, num_students=3)
        service = ScoringService(tiny_config)
        image = rng.random((3, 19, 19)).astype(np.float32)
        error = service.regression_error_map(artifacts.ensemble, artifacts.dense_teacher, artifacts.stats, image)
        variance = service.variance_map(artifacts.ensemble, image)
        assert error.shape == variance.shape == (19, 19)
        assert error.max_score == 0.0
