import struct

import numpy as np
import pandas as pd
import pytest

from stad.core.exceptions import ArtifactError, ArtifactFormatError
from stad.models import (
    AnomalyMap,
    DistillTargetSet,
    EvaluationSummary,
    FeatureStats,
    ScoreCalibration,
    StudentEnsemble,
    TeacherCheckpoint,
)
from stad.nets import build_decoder
from stad.repositories import RunRepository
from stad.repositories import formats


@pytest.fixture
def repo(tmp_path):
    return RunRepository(str(tmp_path / "run"))


class TestTeacherCheckpoint:
    def test_round_trip_reproduces_the_network(self, repo, small_net, rng):
        net = small_net(17, seed=3)
        decoder = build_decoder(8, 5, seed=1)
        trace = [{"iteration": 1, "total": 2.5}]
        repo.save_teacher(TeacherCheckpoint(net=net, decoder=decoder, config={"seed": 3}, loss_trace=trace, seed=3, iteration=1))

        loaded = repo.load_teacher(17)
        patches = rng.random((2, 3, 17, 17)).astype(np.float32)
        np.testing.assert_array_equal(loaded.net.forward_batch(patches).data, net.forward_batch(patches).data)
        np.testing.assert_array_equal(loaded.decoder.weight.data, decoder.weight.data)
        assert loaded.final_loss == 2.5
        assert loaded.config == {"seed": 3}
        assert repo.existing_scales() == [17]

    def test_missing_checkpoint(self, repo):
        with pytest.raises(ArtifactError):
            repo.load_teacher(33)

    def test_ensemble_round_trip(self, repo, small_net):
        ensemble = StudentEnsemble(students=[small_net(17, seed=1), small_net(17, seed=2)], seeds=[1, 2], loss_history=[[1.0], [0.5]])
        repo.save_ensemble(ensemble)
        loaded = repo.load_ensemble(17)
        assert len(loaded) == 2
        assert loaded.seeds == [1, 2]
        np.testing.assert_array_equal(
            loaded.students[1].params["conv1.weight"].data, ensemble.students[1].params["conv1.weight"].data
        )

    def test_teacher_file_is_not_an_ensemble(self, repo, small_net):
        repo.save_teacher(TeacherCheckpoint(net=small_net(17)))
        repo.ensemble_path(17).parent.mkdir(parents=True)
        repo.ensemble_path(17).write_bytes(repo.teacher_path(17).read_bytes())
        with pytest.raises(ArtifactFormatError):
            repo.load_ensemble(17)


class TestCorruption:
    @pytest.fixture
    def stats_file(self, tmp_path):
        path = tmp_path / "stats.bin"
        formats.write_feature_stats(path, FeatureStats(mu=np.arange(4.0), sigma=np.ones(4), count=9))
        return path

    def test_bad_magic(self, stats_file):
        data = stats_file.read_bytes()
        stats_file.write_bytes(b"NOTSTATS" + data[8:])
        with pytest.raises(ArtifactFormatError):
            formats.read_feature_stats(stats_file)

    def test_wrong_kind_of_file(self, stats_file):
        with pytest.raises(ArtifactFormatError):
            formats.read_calibration(stats_file)

    def test_unsupported_version(self, stats_file):
        data = stats_file.read_bytes()
        stats_file.write_bytes(data[:8] + struct.pack("<H", 99) + data[10:])
        with pytest.raises(ArtifactFormatError):
            formats.read_feature_stats(stats_file)

    def test_truncated_payload(self, stats_file):
        stats_file.write_bytes(stats_file.read_bytes()[:-3])
        with pytest.raises(ArtifactFormatError):
            formats.read_feature_stats(stats_file)

    def test_trailing_bytes(self, stats_file):
        stats_file.write_bytes(stats_file.read_bytes() + b"\x00")
        with pytest.raises(ArtifactFormatError):
            formats.read_feature_stats(stats_file)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.amap"
        path.write_bytes(b"")
        with pytest.raises(ArtifactFormatError):
            formats.read_anomaly_map(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactError):
            formats.read_anomaly_map(tmp_path / "absent.amap")


class TestPayloads:
    def test_stats(self, tmp_path):
        stats = FeatureStats(mu=[0.5, -1.0], sigma=[2.0, 0.25], epsilon=1e-6, count=42)
        formats.write_feature_stats(tmp_path / "s.bin", stats)
        loaded = formats.read_feature_stats(tmp_path / "s.bin")
        np.testing.assert_array_equal(loaded.mu, stats.mu)
        np.testing.assert_array_equal(loaded.sigma, stats.sigma)
        assert (loaded.count, loaded.epsilon) == (42, 1e-6)

    def test_calibration(self, repo):
        calibration = ScoreCalibration(e_mu=1.5, e_sigma=0.5, v_mu=0.1, v_sigma=0.02, patch_size=33, num_pixels=800)
        repo.save_calibration(calibration)
        loaded = repo.load_calibration(33)
        assert loaded.to_dict() == calibration.to_dict()
        assert loaded.calibration_id == calibration.calibration_id

    def test_anomaly_map_layout(self, repo, rng):
        scores = rng.normal(size=(5, 7)).astype(np.float32)
        path = repo.save_anomaly_map("crack", "003", AnomalyMap(scores=scores, scales=[17]))
        data = path.read_bytes()
        assert data[:8] == b"STADAMAP"
        assert struct.unpack("<HII", data[8:18]) == (1, 5, 7)
        assert len(data) == 18 + 4 * 35
        np.testing.assert_array_equal(repo.load_anomaly_map("crack", "003"), scores)

    def test_overlay_png_is_written_next_to_the_map(self, repo, rng):
        image = rng.random((3, 6, 6)).astype(np.float32)
        path = repo.save_anomaly_map("good", "000", AnomalyMap(scores=rng.random((6, 6))), image=image, patch_size=17)
        assert path.parent.name == "good"
        assert path.parent.parent.name == "maps_p17"
        assert path.with_suffix(".png").exists()

    def test_distill_targets(self, tmp_path, rng):
        targets = DistillTargetSet(patches=rng.random((3, 3, 17, 17)), targets=rng.normal(size=(3, 10)))
        formats.write_distill_targets(tmp_path / "d.bin", targets)
        loaded = formats.load_distill_targets(tmp_path / "d.bin")
        assert (len(loaded), loaded.patch_size, loaded.target_dim) == (3, 17, 10)
        np.testing.assert_array_equal(loaded.patches, targets.patches)
        np.testing.assert_array_equal(loaded.targets[2], targets.targets[2])

    def test_tables_and_summary(self, repo):
        table = pd.DataFrame({"threshold": [0.5, 0.1], "fpr": [0.0, 0.2], "mean_pro": [0.4, 0.9]})
        repo.save_table("pro_curve.tsv", table)
        pd.testing.assert_frame_equal(repo.load_table("pro_curve.tsv"), table)
        summary = EvaluationSummary(category="bottle", scales=[17, 33], fpr_limit=0.3, pro_auc=0.8, roc_auc=0.9)
        repo.save_summary(summary)
        assert repo.load_summary() == summary

    def test_config_echo(self, repo, tiny_config):
        repo.save_config(tiny_config)
        assert repo.load_config() == tiny_config


def test_atomic_write_leaves_no_temporary_files(tmp_path):
    target = tmp_path / "nested" / "artifact.bin"
    formats.atomic_write(target, b"first")
    formats.atomic_write(target, b"second")
    assert target.read_bytes() == b"second"
    assert [p.name for p in target.parent.iterdir()] == ["artifact.bin"]
