import json
from pathlib import Path

import pytest

from stad.core.config import config as env_config
from stad.core.config import create_env_template, get_default_settings, validate_config
from stad.core.exceptions import (
    ArtifactError,
    ArtifactFormatError,
    ConfigError,
    DataError,
    GraphError,
    NumericError,
    ShapeError,
    StadError,
    UnsupportedArchitectureError,
)
from stad.models import RunConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class TestRunConfig:
    def test_defaults_follow_the_single_scale_recipe(self):
        cfg = RunConfig()
        assert cfg.scales == [65]
        assert (cfg.descriptor_dim, cfg.num_students, cfg.image_side) == (128, 3, 256)
        assert (cfg.teacher_lambda_k, cfg.teacher_lambda_m, cfg.teacher_lambda_c) == (1.0, 0.0, 1.0)
        assert cfg.score_mode == "combined"
        assert cfg.fpr_limit == 0.3

    @pytest.mark.parametrize(
        "values",
        [
            {"scales": [31]},
            {"scales": []},
            {"scales": [17, 17]},
            {"scales": [65], "image_side": 64},
            {"teacher_lambda_k": 0.0, "teacher_lambda_m": 0.0, "teacher_lambda_c": 0.0},
            {"teacher_batch_size": 1},
            {"luminance_min": 1.5, "luminance_max": 1.2},
            {"score_mode": "median"},
            {"unknown_field": 1},
        ],
    )
    def test_invalid_values_are_config_errors(self, values):
        with pytest.raises(ConfigError):
            RunConfig.build(**values)

    def test_from_file_applies_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"scales": [17, 33], "image_side": 64, "seed": 3}))
        cfg = RunConfig.from_file(str(path), seed=9, num_students=None)
        assert cfg.scales == [17, 33]
        assert cfg.seed == 9
        assert cfg.num_students == 3

    def test_missing_or_malformed_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_file(str(tmp_path / "absent.json"))
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(ConfigError):
            RunConfig.from_file(str(tmp_path / "bad.json"))

    def test_with_overrides_revalidates(self):
        cfg = RunConfig.build(scales=[17], image_side=32)
        assert cfg.with_overrides(num_students=5).num_students == 5
        with pytest.raises(ConfigError):
            cfg.with_overrides(scales=[65])

    def test_json_echo_round_trips(self):
        cfg = RunConfig.build(scales=[17, 65], channel_scale=0.25, seed=11)
        assert RunConfig.build(**json.loads(cfg.to_json())) == cfg

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.name)
    def test_shipped_configs_validate(self, path):
        RunConfig.from_file(str(path))


class TestEnvironmentSettings:
    def test_defaults_are_valid(self):
        is_valid, problems = validate_config()
        assert is_valid, problems

    def test_bad_log_level_is_reported(self, monkeypatch):
        monkeypatch.setattr(env_config.logging, "level", "LOUD")
        is_valid, problems = validate_config()
        assert not is_valid
        assert problems == ["LOG_LEVEL=LOUD"]

    def test_env_template_lists_every_variable(self):
        template = create_env_template()
        for name in ("LOG_LEVEL", "STAD_RUN_ROOT", "STAD_DATA_ROOT", "STAD_NUM_WORKERS", "STAD_TARGET_CACHE_MB"):
            assert f"{name}=" in template

    def test_default_settings(self):
        assert set(get_default_settings()) == {"run_root", "data_root", "num_workers", "target_cache_mb", "log_level"}


@pytest.mark.parametrize(
    "error, code",
    [
        (StadError, 1),
        (ConfigError, 2),
        (UnsupportedArchitectureError, 2),
        (DataError, 3),
        (NumericError, 4),
        (ShapeError, 4),
        (GraphError, 4),
        (ArtifactError, 5),
        (ArtifactFormatError, 5),
    ],
)
def test_exit_codes(error, code):
    assert error.exit_code == code
    assert issubclass(error, StadError)
