import pytest

from alpha_embed.config import (
    RUN_PRESETS,
    RunConfig,
    load_config_file,
    resolve_run_config,
)
from alpha_embed.errors import ConfigError
from alpha_embed.model import ModelConfig


def test_presets_mirror_published_table():
    cfg = resolve_run_config("copy-small")
    assert (cfg.model.d_model, cfg.model.layer_count, cfg.model.head_count, cfg.model.fc_size) == (64, 2, 4, 64)
    assert (cfg.batch_size, cfg.steps) == (512, 20000)
    cfg = resolve_run_config("ltl")
    assert (cfg.model.d_model, cfg.model.layer_count, cfg.model.head_count, cfg.model.fc_size) == (128, 8, 8, 1024)
    assert (cfg.batch_size, cfg.steps) == (768, 52000)
    cfg = resolve_run_config("prop")
    assert cfg.model.d_model == 132
    assert (cfg.batch_size, cfg.steps) == (1024, 50000)
    assert resolve_run_config("copy-big").model.d_model == 128


def test_unknown_preset():
    with pytest.raises(ConfigError):
        resolve_run_config("nope")


def test_file_overrides_preset_and_flags_override_file(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(
        'preset = "copy-small"\n'
        "steps = 777\n"
        "seed = 5\n"
        "[model]\n"
        "layer_count = 3\n"
    )
    values = load_config_file(path)
    cfg = resolve_run_config(file_values=values, overrides={"seed": 9})
    assert cfg.steps == 777  # file beats preset
    assert cfg.seed == 9  # flag beats file
    assert cfg.model.layer_count == 3
    assert cfg.model.d_model == 64  # untouched preset value
    assert cfg.batch_size == 512


def test_preset_argument_beats_file_preset(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('preset = "copy-small"\n')
    values = load_config_file(path)
    cfg = resolve_run_config(preset="copy-big", file_values=values)
    assert cfg.model.d_model == 128


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("bogus = 1\n")
    with pytest.raises(ConfigError):
        load_config_file(path)
    path.write_text("[model]\nbogus = 1\n")
    with pytest.raises(ConfigError):
        load_config_file(path)
    with pytest.raises(ConfigError):
        resolve_run_config("copy-small", overrides={"bogus": 1})


def test_missing_required_keys():
    with pytest.raises(ConfigError, match="missing required"):
        resolve_run_config(overrides={"task": "copy", "model": {"d_model": 16, "layer_count": 1, "head_count": 2, "fc_size": 16}})


def test_model_required():
    with pytest.raises(ConfigError, match="model"):
        resolve_run_config(overrides={"task": "copy", "vocab_m": 5, "steps": 1, "batch_size": 1})


def base_model():
    return ModelConfig(d_model=16, layer_count=1, head_count=2, fc_size=16)


def test_validation():
    ok = RunConfig(task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4)
    assert ok.loss == "adacos"
    with pytest.raises(ConfigError):
        RunConfig(task="sorting", model=base_model(), vocab_m=5, steps=10, batch_size=4)
    with pytest.raises(ConfigError):
        RunConfig(task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4, loss="mse")
    with pytest.raises(ConfigError):
        RunConfig(task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4, embedding_mode="frozen")
    with pytest.raises(ConfigError):
        RunConfig(task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4, method="pseudo")
    with pytest.raises(ConfigError):
        # adaptive cosine loss needs normalized features
        RunConfig(task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4, feature_normalize=False)
    with pytest.raises(ConfigError):
        # no room left for the shared embedding part
        RunConfig(task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4, d_beta=16)
    with pytest.raises(ConfigError):
        RunConfig(task="copy", model=base_model(), vocab_m=0, steps=10, batch_size=4)
    with pytest.raises(ConfigError):
        RunConfig(task="copy", model=base_model(), vocab_m=5, steps=0, batch_size=4)
    with pytest.raises(ConfigError):
        RunConfig(task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4, warmup=0)
    with pytest.raises(ConfigError):
        RunConfig(task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4, peak_lr=0.0)


def test_cross_entropy_without_normalize_allowed():
    cfg = RunConfig(
        task="copy", model=base_model(), vocab_m=5, steps=10, batch_size=4,
        loss="cross-entropy", feature_normalize=False, embedding_mode="full-vocab",
    )
    assert cfg.embedding_mode == "full-vocab"


def test_all_presets_resolve():
    for name in RUN_PRESETS:
        cfg = resolve_run_config(name)
        assert cfg.preset == name
        assert cfg.model.preset is not None
