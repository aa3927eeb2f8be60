"""Config parsing, round-trips, overrides, and typed views."""

import pytest

from hyperagg.config import ExperimentConfig, toy_config
from hyperagg.errors import ConfigurationError


def test_defaults_match_reference_settings():
    cfg = ExperimentConfig()
    assert cfg["model"]["num_hyperedges"] == 16
    assert cfg["model"]["fusion_ratios"] == (16, 8, 4, 1)
    assert cfg["loss"]["curvature"] == 0.1
    assert cfg["loss"]["tau"] == 0.1
    assert cfg["loss"]["lam"] == 1.0
    assert cfg["loss"]["beta"] == 0.1


def test_round_trip_identity():
    cfg = toy_config("train.epochs=3", "loss.alpha=0.25",
                     "model.normalize_hyperedges=true")
    again = ExperimentConfig.from_string(cfg.to_string())
    assert again.sections == cfg.sections
    assert again.to_string() == cfg.to_string()


def test_file_round_trip(tmp_path):
    path = tmp_path / "exp.ini"
    cfg = toy_config("data.noise_std=0.75")
    cfg.save(path)
    assert ExperimentConfig.from_file(path).sections == cfg.sections


def test_unknown_key_rejected():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_string("[train]\nepochz = 3\n")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_string("[nonsense]\nx = 1\n")
    with pytest.raises(ConfigurationError):
        ExperimentConfig({"train": {"epochz": 3}})


def test_malformed_text_rejected():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_string("not an ini file at all [")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_string("[train]\nepochs = banana\n")


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_file(tmp_path / "absent.ini")


def test_overrides():
    cfg = ExperimentConfig().with_overrides(
        ["train.epochs=7", "model.fusion_ratios=4,2,1", "loss.mode=hybrid"])
    assert cfg["train"]["epochs"] == 7
    assert cfg["model"]["fusion_ratios"] == (4, 2, 1)
    assert cfg["loss"]["mode"] == "hybrid"
    with pytest.raises(ConfigurationError):
        cfg.with_overrides(["train.epochs"])
    with pytest.raises(ConfigurationError):
        cfg.with_overrides(["train.bogus=1"])


def test_typed_views_consistent():
    cfg = toy_config()
    mcfg = cfg.model_config()
    assert mcfg.num_hyperedges == 8
    assert mcfg.fusion_ratios == (8, 4, 1)
    assert mcfg.backbone.grid == cfg["data"]["grid"]
    assert mcfg.num_classes == 8
    weights = cfg.loss_weights()
    assert weights.curvature == 0.1
    spec = cfg.data_spec()
    assert spec.samples_per_class == (cfg["data"]["samples_per_class"]
                                      + cfg["data"]["test_samples_per_class"])
