"""Run configuration: YAML file, environment overrides and command-line flags."""
from __future__ import annotations

from collections.abc import Mapping
import logging
import os
from pathlib import Path
from typing import Any

import flatdict
import voluptuous as vol
import yaml

from .const import (
    CONF_ALPHA,
    CONF_ATTENDED_GAIN,
    CONF_BATCH_SIZE,
    CONF_CENSOR_S,
    CONF_COMFORT,
    CONF_CONFIDENCE,
    CONF_DATASET,
    CONF_DROPOUT,
    CONF_ENVELOPE,
    CONF_FINETUNE_LR,
    CONF_GRID_POINTS,
    CONF_HIDDEN,
    CONF_INFORMATIVE,
    CONF_INNER_FOLDS,
    CONF_KERNEL_LENGTH,
    CONF_LAMBDAS,
    CONF_LEAKAGE_GAIN,
    CONF_LINEAR,
    CONF_LR,
    CONF_MAX_EPOCHS,
    CONF_MAX_STATES,
    CONF_MESD,
    CONF_METHOD,
    CONF_MIN_STATES,
    CONF_MODE,
    CONF_N_CHANNELS,
    CONF_N_COMPONENTS,
    CONF_N_PERM,
    CONF_N_SUBJECTS,
    CONF_NOISE_STD,
    CONF_OUT,
    CONF_OVERLAP,
    CONF_PATIENCE,
    CONF_SEARCH_BUDGET,
    CONF_SEED,
    CONF_SHARE_STIMULI,
    CONF_STATS,
    CONF_SUBJECT_GAINS,
    CONF_SYNTH,
    CONF_TRAIN,
    CONF_TRIAL_LENGTH,
    CONF_TRIALS,
    CONF_WEIGHT_DECAY,
    CONF_WINDOW_S,
    CONF_WINDOWS,
    CONF_WORKERS,
    ALPHA,
    ENV_DELIMITER,
    ENV_PREFIX,
    ENVELOPE_GAMMATONE,
    ENVELOPE_METHODS,
    INNER_FOLDS,
    LEARNING_RATE,
    MAX_EPOCHS,
    MESD_CENSOR_S,
    MESD_COMFORT,
    MESD_CONFIDENCE,
    MESD_GRID_POINTS,
    MESD_MAX_STATES,
    MESD_MIN_STATES,
    METHOD_LSR,
    METHODS,
    MODE_SS,
    MODES,
    N_PERMUTATIONS,
    PATIENCE,
    RIDGE_LAMBDAS,
    TRAIN_OVERLAP,
    TRAIN_WINDOW_S,
    WINDOW_LENGTHS,
)
from .exceptions import ConfigError
from .mesd import MesdConfig
from .pipeline import EvalSettings, LinearConfig
from .synth import SynthConfig
from .training import TrainConfig

_LOGGER = logging.getLogger(__name__)

RESOLVED_CONFIG_FILE = "resolved_config.yaml"


def _csv_list(value: Any) -> list:
    """Accept a list or a comma separated string."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _ascending(values: list[float]) -> list[float]:
    if not values:
        raise vol.Invalid("at least one window length is required")
    if any(later <= earlier for earlier, later in zip(values, values[1:])):
        raise vol.Invalid(f"window lengths must be strictly ascending, got {values}")
    return values


_positive_float = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
_positive_int = vol.All(vol.Coerce(int), vol.Range(min=1))
_fraction = vol.All(vol.Coerce(float), vol.Range(min=0, max=1, max_included=False))

TRAIN_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_LR, default=LEARNING_RATE): _positive_float,
        vol.Optional(CONF_FINETUNE_LR, default=None): vol.Any(None, _positive_float),
        vol.Optional(CONF_BATCH_SIZE, default=64): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Optional(CONF_WEIGHT_DECAY, default=1e-3): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Optional(CONF_DROPOUT, default=0.5): _fraction,
        vol.Optional(CONF_HIDDEN, default=16): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional(CONF_MAX_EPOCHS, default=MAX_EPOCHS): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional(CONF_PATIENCE, default=PATIENCE): _positive_int,
        vol.Optional(CONF_WINDOW_S, default=TRAIN_WINDOW_S): _positive_float,
        vol.Optional(CONF_OVERLAP, default=TRAIN_OVERLAP): _fraction,
        vol.Optional(CONF_SEARCH_BUDGET, default=0): vol.All(vol.Coerce(int), vol.Range(min=0)),
    }
)

LINEAR_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_LAMBDAS, default=list(RIDGE_LAMBDAS)): vol.All(
            _csv_list, [vol.All(vol.Coerce(float), vol.Range(min=0))], vol.Length(min=1)
        ),
        vol.Optional(CONF_N_COMPONENTS, default=None): vol.Any(None, _positive_int),
        vol.Optional(CONF_INNER_FOLDS, default=INNER_FOLDS): vol.All(vol.Coerce(int), vol.Range(min=2)),
    }
)

MESD_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_MIN_STATES, default=MESD_MIN_STATES): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Optional(CONF_MAX_STATES, default=MESD_MAX_STATES): vol.All(vol.Coerce(int), vol.Range(min=2)),
        vol.Optional(CONF_CONFIDENCE, default=MESD_CONFIDENCE): _fraction,
        vol.Optional(CONF_COMFORT, default=MESD_COMFORT): _fraction,
        vol.Optional(CONF_CENSOR_S, default=MESD_CENSOR_S): _positive_float,
        vol.Optional(CONF_GRID_POINTS, default=MESD_GRID_POINTS): vol.All(vol.Coerce(int), vol.Range(min=2)),
    }
)

STATS_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_N_PERM, default=N_PERMUTATIONS): vol.All(vol.Coerce(int), vol.Range(min=1000)),
        vol.Optional(CONF_ALPHA, default=ALPHA): _fraction,
    }
)

SYNTH_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_N_SUBJECTS, default=4): _positive_int,
        vol.Optional(CONF_TRIALS, default=8): _positive_int,
        vol.Optional(CONF_TRIAL_LENGTH, default=30.0): _positive_float,
        vol.Optional(CONF_N_CHANNELS, default=8): _positive_int,
        vol.Optional(CONF_INFORMATIVE, default=None): vol.Any(
            None, vol.All(_csv_list, [vol.All(vol.Coerce(int), vol.Range(min=0))])
        ),
        vol.Optional(CONF_KERNEL_LENGTH, default=0.25): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=0.25, min_included=False)
        ),
        vol.Optional(CONF_ATTENDED_GAIN, default=1.0): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Optional(CONF_LEAKAGE_GAIN, default=0.2): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Optional(CONF_NOISE_STD, default=0.5): vol.All(vol.Coerce(float), vol.Range(min=0)),
        vol.Optional(CONF_SHARE_STIMULI, default=True): vol.Boolean(),
        vol.Optional(CONF_SUBJECT_GAINS, default=None): vol.Any(
            None, vol.All(_csv_list, [vol.Coerce(float)])
        ),
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_DATASET, default=None): vol.Any(None, str),
        vol.Optional(CONF_METHOD, default=METHOD_LSR): vol.In(METHODS),
        vol.Optional(CONF_MODE, default=MODE_SS): vol.In(MODES),
        vol.Optional(CONF_WINDOWS, default=list(WINDOW_LENGTHS)): vol.All(
            _csv_list, [_positive_float], _ascending
        ),
        vol.Optional(CONF_SEED, default=0): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional(CONF_OUT, default="out"): str,
        vol.Optional(CONF_WORKERS, default=1): _positive_int,
        vol.Optional(CONF_ENVELOPE, default=ENVELOPE_GAMMATONE): vol.In(ENVELOPE_METHODS),
        vol.Optional(CONF_TRAIN, default={}): TRAIN_SCHEMA,
        vol.Optional(CONF_LINEAR, default={}): LINEAR_SCHEMA,
        vol.Optional(CONF_MESD, default={}): MESD_SCHEMA,
        vol.Optional(CONF_STATS, default={}): STATS_SCHEMA,
        vol.Optional(CONF_SYNTH, default={}): SYNTH_SCHEMA,
    }
)


def _read_file(path: str | Path) -> dict[str, Any]:
    try:
        raw = yaml.safe_load(Path(path).read_text()) or {}
    except OSError as err:
        raise ConfigError(f"Cannot read config {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"Config {path} is not valid YAML: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"Config {path} must be a mapping")
    return raw


def _schema_keys(schema: vol.Schema, prefix: str = "") -> set[str]:
    """Flat ``section__key`` names a schema accepts."""
    keys = set()
    for marker, value in schema.schema.items():
        key = f"{prefix}{marker.schema}"
        if isinstance(value, vol.Schema):
            keys |= _schema_keys(value, f"{key}{ENV_DELIMITER}")
        else:
            keys.add(key)
    return keys


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    """Flat ``section__key`` overrides from AADKIT_* variables, YAML-typed.

    Variables naming no known setting are logged and skipped.
    """
    environ = os.environ if environ is None else environ
    known = _schema_keys(CONFIG_SCHEMA)
    overrides = {}
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX) :].lower()
        if key not in known:
            _LOGGER.warning("Ignoring %s: no setting %s", name, key)
            continue
        try:
            overrides[key] = yaml.safe_load(value)
        except yaml.YAMLError as err:
            raise ConfigError(f"Cannot parse {name}={value!r}: {err}") from err
    return overrides


def _apply(config: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    flat = flatdict.FlatDict(config, delimiter=ENV_DELIMITER)
    for key, value in overrides.items():
        if value is not None:
            flat[key] = value
    return flat.as_dict()


def load_config(
    path: str | Path | None = None,
    flags: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    """Merge defaults < file < environment < flags and validate."""
    config = _read_file(path) if path else {}
    config = _apply(config, env_overrides(environ))
    config = _apply(config, flags or {})
    try:
        return CONFIG_SCHEMA(config)
    except vol.Invalid as err:
        raise ConfigError(f"Invalid configuration: {err}") from err


def dump_config(config: Mapping[str, Any], out: str | Path) -> Path:
    """Write the resolved configuration next to the run outputs."""
    path = Path(out) / RESOLVED_CONFIG_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(dict(config), sort_keys=True))
    return path


def train_config(config: Mapping[str, Any]) -> TrainConfig:
    """AADNet hyperparameters of a resolved configuration."""
    train = config[CONF_TRAIN]
    return TrainConfig(
        lr=train[CONF_LR],
        batch_size=train[CONF_BATCH_SIZE],
        weight_decay=train[CONF_WEIGHT_DECAY],
        dropout=train[CONF_DROPOUT],
        hidden=train[CONF_HIDDEN],
        max_epochs=train[CONF_MAX_EPOCHS],
        patience=train[CONF_PATIENCE],
        finetune_lr=train[CONF_FINETUNE_LR],
        window_s=train[CONF_WINDOW_S],
        overlap=train[CONF_OVERLAP],
        seed=config[CONF_SEED],
    )


def eval_settings(config: Mapping[str, Any]) -> EvalSettings:
    """Evaluation settings of a resolved configuration."""
    linear = config[CONF_LINEAR]
    return EvalSettings(
        method=config[CONF_METHOD],
        mode=config[CONF_MODE],
        windows=tuple(config[CONF_WINDOWS]),
        seed=config[CONF_SEED],
        workers=config[CONF_WORKERS],
        train=train_config(config),
        linear=LinearConfig(
            lambdas=tuple(linear[CONF_LAMBDAS]),
            n_components=linear[CONF_N_COMPONENTS],
            inner_folds=linear[CONF_INNER_FOLDS],
        ),
    )


def mesd_config(config: Mapping[str, Any]) -> MesdConfig:
    """MESD chain settings of a resolved configuration."""
    return MesdConfig(**config[CONF_MESD])


def synth_config(config: Mapping[str, Any]) -> SynthConfig:
    """Synthetic generator settings of a resolved configuration."""
    synth = dict(config[CONF_SYNTH])
    for key in (CONF_INFORMATIVE, CONF_SUBJECT_GAINS):
        if synth[key] is not None:
            synth[key] = tuple(synth[key])
    return SynthConfig(seed=config[CONF_SEED], **synth)
