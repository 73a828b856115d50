"""
Test Suite for JSON config files and dotted overrides.

Test Coverage:
- Defaults, partial files, nested merges
- Dotted overrides: JSON values, string fallback, lists
- Unknown keys and invalid values raise ConfigValidationError (exit code 2)

Usage:
python -m pytest illumcomp/tests/test_config_loader.py -v
"""

import json
from pathlib import Path

import pytest

from illumcomp.config_loader import apply_overrides, load_config, parse_override
from illumcomp.data.synth import SceneConfig
from illumcomp.training.config import TrainConfig
from illumcomp.utils.errors import ConfigValidationError


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestParseOverride:
    """parse_override."""

    @pytest.mark.parametrize("item,path,value", [
        ("steps=10", ["steps"], 10),
        ("loss_weights.lambda_G=2.5", ["loss_weights", "lambda_G"], 2.5),
        ("ablation.branched=false", ["ablation", "branched"], False),
        ("network.encoder_channels=[4,8]", ["network", "encoder_channels"], [4, 8]),
        ("corpus=data/train", ["corpus"], "data/train"),
        ("corpus=null", ["corpus"], None),
    ])
    def test_values(self, item: str, path, value) -> None:
        assert parse_override(item) == (path, value)

    @pytest.mark.parametrize("item", ["steps", "=3", "a..b=1"])
    def test_malformed(self, item: str) -> None:
        with pytest.raises(ConfigValidationError):
            parse_override(item)


class TestLoadConfig:
    """load_config."""

    def test_defaults(self) -> None:
        assert load_config(TrainConfig) == TrainConfig()

    def test_partial_file_merges_nested(self, tmp_path: Path) -> None:
        path = write_json(tmp_path / "t.json", {"steps": 7, "loss_weights": {"lambda_G_idt": 2.0}})
        cfg = load_config(TrainConfig, path)
        assert cfg.steps == 7
        assert cfg.loss_weights.lambda_G_idt == 2.0
        assert cfg.loss_weights.clip_c == 0.01

    def test_overrides_after_file(self, tmp_path: Path) -> None:
        path = write_json(tmp_path / "t.json", {"steps": 7})
        cfg = load_config(TrainConfig, path, ["steps=3", "ablation.illumination=false", "filter.radius=1"])
        assert cfg.steps == 3
        assert cfg.ablation.illumination is False
        assert cfg.filter.radius == 1

    def test_base(self) -> None:
        base = TrainConfig(seed=11, batch_size=2).model_dump(mode="json")
        cfg = load_config(TrainConfig, overrides=["steps=5"], base=base)
        assert (cfg.seed, cfg.batch_size, cfg.steps) == (11, 2, 5)

    def test_scene_config_tuples(self) -> None:
        cfg = load_config(SceneConfig, overrides=["elevation_range=[30,40]", "image_size=32", "local_size=16",
                                                  "sprite_size=8"])
        assert cfg.elevation_range == (30.0, 40.0)

    @pytest.mark.parametrize("override", ["unknown=1", "loss_weights.lambda_X=1", "steps.inner=2"])
    def test_unknown_override_key(self, override: str) -> None:
        with pytest.raises(ConfigValidationError) as info:
            load_config(TrainConfig, overrides=[override])
        assert info.value.exit_code == 2

    def test_unknown_file_keys(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigValidationError):
            load_config(TrainConfig, write_json(tmp_path / "a.json", {"stepz": 3}))
        with pytest.raises(ConfigValidationError):
            load_config(TrainConfig, write_json(tmp_path / "b.json", {"filter": {"radious": 3}}))

    @pytest.mark.parametrize("override", ["batch_size=0", "loss_weights.clip_c=-1", "local_size=20",
                                          "network.critic_channels=[4,2]", "steps=many"])
    def test_invalid_values(self, override: str) -> None:
        with pytest.raises(ConfigValidationError):
            load_config(TrainConfig, overrides=[override])

    def test_missing_and_malformed_file(self, tmp_path: Path) -> None:
        with pytest.raises(ConfigValidationError):
            load_config(TrainConfig, tmp_path / "absent.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigValidationError):
            load_config(TrainConfig, bad)
        with pytest.raises(ConfigValidationError):
            load_config(TrainConfig, write_json(tmp_path / "list.json", [1, 2]))

    def test_apply_overrides_copies(self) -> None:
        data = {"a": {"b": 1}}
        result = apply_overrides(data, ["a.b=2"])
        assert result == {"a": {"b": 2}}
        assert data == {"a": {"b": 1}}
