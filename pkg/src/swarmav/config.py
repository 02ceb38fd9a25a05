"""Plain-text configuration files: one `section.key = value` per line.

Lines starting with `#` (and blank lines) are ignored. Values parse as int,
float, bool (true/false/on/off) or string, in that order. Sections map onto
the dataclasses: env.* (EnvConfig), train.* (TrainConfig), advantage.*
(AdvantageMethod), eas.* (EasConfig). CLI flags override file values.
"""

from __future__ import annotations

from dataclasses import fields

from .credit import AdvantageMethod
from .eas import EasConfig
from .env import ConfigError, EnvConfig, default_spawn_radius, scenario_config
from .trainer import TrainConfig

_BOOL_WORDS = {"true": True, "on": True, "yes": True, "false": False, "off": False, "no": False}


def parse_value(text: str):
    text = text.strip()
    lowered = text.lower()
    if lowered in _BOOL_WORDS:
        return _BOOL_WORDS[lowered]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_file(path) -> dict[str, object]:
    """Returns {dotted_key: parsed value}; malformed lines raise with line numbers."""
    out: dict[str, object] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if not key or "." not in key:
                raise ConfigError(f"{path}: line {lineno}: keys are dotted, e.g. env.n_uavs")
            out[key] = parse_value(value)
    return out


_ENV_FIELDS = {f.name for f in fields(EnvConfig)} - {"spawn_center"}
_TRAIN_FIELDS = {f.name for f in fields(TrainConfig)} - {"env", "method", "scenario"}
_ADV_FIELDS = {f.name for f in fields(AdvantageMethod)}
_EAS_FIELDS = {f.name for f in fields(EasConfig)}


def build_train_config(
    scenario: str, overrides: dict[str, object] | None = None
) -> tuple[TrainConfig, EasConfig]:
    """Scenario preset plus dotted-key overrides -> (TrainConfig, EasConfig)."""
    overrides = dict(overrides or {})
    env = scenario_config(scenario)
    method = AdvantageMethod()
    eas = EasConfig()
    train_kwargs: dict[str, object] = {}

    center = list(env.spawn_center)
    for key, value in overrides.items():
        section, _, name = key.partition(".")
        if section == "env":
            if name == "spawn_center_x":
                center[0] = float(value)
            elif name == "spawn_center_y":
                center[1] = float(value)
            elif name in _ENV_FIELDS:
                setattr(env, name, type(getattr(env, name))(value))
            else:
                raise ConfigError(f"unknown config key {key!r}")
        elif section == "advantage":
            if name not in _ADV_FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(method, name, type(getattr(method, name))(value))
        elif section == "train":
            if name == "steps":
                name = "total_env_steps"
            if name not in _TRAIN_FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            train_kwargs[name] = value
        elif section == "eas":
            if name not in _EAS_FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(eas, name, type(getattr(eas, name))(value))
        else:
            raise ConfigError(f"unknown config section {section!r} in {key!r}")
    env.spawn_center = (center[0], center[1])
    if "env.spawn_radius" not in overrides and "env.n_uavs" in overrides:
        env.spawn_radius = default_spawn_radius(env.n_uavs)
    method.__post_init__()

    cfg = TrainConfig(scenario=scenario, env=env, method=method, **train_kwargs)
    return cfg, eas
