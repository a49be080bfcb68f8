"""Run configuration: presets, TOML files, and override resolution.

Precedence is explicit override > config file > preset default.  Config
files use plain key = value TOML with an optional [model] section whose
keys mirror the model configuration fields.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .errors import ConfigError
from .model import MODEL_PRESETS, ModelConfig

EMBEDDING_MODES = ("dual", "full-vocab", "alpha-renaming", "shuffle-aps")
LOSS_MODES = ("adacos", "cross-entropy")
TASKS = ("copy", "prop", "ltl")
METHOD_KINDS = ("normal", "neighbor", "hypercube")


@dataclass(frozen=True)
class RunConfig:
    task: str
    model: ModelConfig
    vocab_m: int
    steps: int
    batch_size: int
    embedding_mode: str = "dual"
    method: str = "hypercube"
    d_beta: int = 6
    enforce_unique: bool = True
    block_normalize: bool = True
    feature_normalize: bool = True
    loss: str = "adacos"
    seed: int = 0
    peak_lr: float = 1e-4
    warmup: int = 1000
    checkpoint_interval: int = 0
    train_data: str | None = None
    eval_data: str | None = None
    out_dir: str = "runs"
    preset: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task: {self.task!r}")
        if self.embedding_mode not in EMBEDDING_MODES:
            raise ConfigError(f"unknown embedding mode: {self.embedding_mode!r}")
        if self.loss not in LOSS_MODES:
            raise ConfigError(f"unknown loss mode: {self.loss!r}")
        if self.method not in METHOD_KINDS:
            raise ConfigError(f"unknown randomization method: {self.method!r}")
        if self.embedding_mode == "dual":
            if self.model.d_model <= self.d_beta:
                raise ConfigError("d_beta must leave room for the shared part")
        if self.loss == "adacos" and not self.feature_normalize:
            raise ConfigError("the adaptive cosine loss requires feature normalization")
        if self.vocab_m < 1:
            raise ConfigError("vocab_m must be at least 1")
        if self.steps < 1 or self.batch_size < 1:
            raise ConfigError("steps and batch_size must be positive")
        if self.warmup < 1:
            raise ConfigError("warmup must be at least 1")
        if self.peak_lr <= 0:
            raise ConfigError("peak_lr must be positive")
        if self.checkpoint_interval < 0:
            raise ConfigError("checkpoint_interval cannot be negative")


# batch sizes and step counts follow the published hyperparameter table
RUN_PRESETS: dict[str, dict] = {
    "copy-small": {"task": "copy", "model_preset": "copy-small", "batch_size": 512, "steps": 20000, "vocab_m": 5},
    "copy-big": {"task": "copy", "model_preset": "copy-big", "batch_size": 512, "steps": 20000, "vocab_m": 26},
    "ltl": {"task": "ltl", "model_preset": "ltl", "batch_size": 768, "steps": 52000, "vocab_m": 5},
    "prop": {"task": "prop", "model_preset": "prop", "batch_size": 1024, "steps": 50000, "vocab_m": 5},
}

_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"model", "preset"}
_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"preset"}


def load_config_file(path: str | Path) -> dict:
    """Flat run keys plus an optional [model] table; unknown keys rejected."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    model_part = raw.pop("model", {})
    if not isinstance(model_part, dict):
        raise ConfigError("[model] must be a table")
    for key in raw:
        if key not in _RUN_KEYS and key != "preset":
            raise ConfigError(f"unknown config key: {key!r}")
        if isinstance(raw[key], dict):
            raise ConfigError(f"unexpected table: {key!r}")
    for key in model_part:
        if key not in _MODEL_KEYS:
            raise ConfigError(f"unknown model config key: {key!r}")
    out = dict(raw)
    if model_part:
        out["model"] = dict(model_part)
    return out


def resolve_run_config(
    preset: str | None = None,
    file_values: dict | None = None,
    overrides: dict | None = None,
) -> RunConfig:
    """Merge preset defaults, file values, and explicit overrides.

    ``overrides`` may carry run keys plus model keys under "model"; a
    preset named in the file wins over the ``preset`` argument only when
    the argument is absent.
    """
    file_values = dict(file_values or {})
    overrides = dict(overrides or {})
    preset = overrides.pop("preset", None) or preset or file_values.pop("preset", None)
    file_values.pop("preset", None)

    run: dict = {}
    model: dict = {}
    if preset is not None:
        if preset not in RUN_PRESETS:
            raise ConfigError(f"unknown preset: {preset!r} (have {', '.join(sorted(RUN_PRESETS))})")
        base = dict(RUN_PRESETS[preset])
        model_preset_name = base.pop("model_preset")
        model.update({k: getattr(MODEL_PRESETS[model_preset_name], k) for k in _MODEL_KEYS})
        model["preset"] = model_preset_name
        run.update(base)

    for source in (file_values, overrides):
        part = source.pop("model", None)
        if part:
            for key, value in part.items():
                if key not in _MODEL_KEYS:
                    raise ConfigError(f"unknown model config key: {key!r}")
                model[key] = value
        for key, value in source.items():
            if key not in _RUN_KEYS:
                raise ConfigError(f"unknown config key: {key!r}")
            run[key] = value

    missing = {"task", "vocab_m", "steps", "batch_size"} - run.keys()
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(sorted(missing))}")
    if not model:
        raise ConfigError("no model configuration given (preset or [model] section)")
    try:
        model_config = ModelConfig(**model)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(model=model_config, preset=preset, **run)
