"""Flat key = value config files covering every game and training field.

Lines are ``key = value``; blank lines and ``#`` comments are ignored.
Unknown keys are errors so typos fail loudly instead of silently running
with defaults.
"""

from __future__ import annotations

import dataclasses

from .env import ConfigError, GameConfig
from .training import TrainConfig


def _coerce(raw: str, typ, key: str):
    raw = raw.strip()
    if typ is int:
        return int(raw)
    if typ is float:
        return float(raw)
    if typ is str:
        return raw
    if typ is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"bad boolean for {key}: {raw!r}")
    if typ == tuple[int, int]:
        parts = [p for p in raw.replace("(", "").replace(")", "").split(",") if p.strip()]
        if len(parts) != 2:
            raise ConfigError(f"{key} expects two comma-separated integers, got {raw!r}")
        return (int(parts[0]), int(parts[1]))
    raise ConfigError(f"unsupported config type for {key}")


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_configs(
    path: str | None,
    game_overrides: dict | None = None,
) -> tuple[GameConfig, TrainConfig]:
    """Build (GameConfig, TrainConfig) from defaults, file, then overrides."""
    raw: dict[str, str] = {}
    if path is not None:
        with open(path) as fh:
            raw = parse_config_text(fh.read())

    game_fields = {f.name: f.type for f in dataclasses.fields(GameConfig)}
    train_fields = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
    game_kwargs: dict = {}
    train_kwargs: dict = {}
    for key, value in raw.items():
        if key in game_fields:
            game_kwargs[key] = _coerce(value, _field_type(GameConfig, key), key)
        elif key in train_fields:
            train_kwargs[key] = _coerce(value, _field_type(TrainConfig, key), key)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    if game_overrides:
        game_kwargs.update(game_overrides)
    return GameConfig(**game_kwargs), TrainConfig(**train_kwargs)


def _field_type(cls, name: str):
    # dataclass field types arrive as strings under `from __future__ import
    # annotations`; resolve the handful we use.
    for f in dataclasses.fields(cls):
        if f.name == name:
            t = f.type
            if t in (int, float, str, bool):
                return t
            if t == "int":
                return int
            if t == "float":
                return float
            if t == "str":
                return str
            if t == "bool":
                return bool
            if t in ("tuple[int, int]",):
                return tuple[int, int]
            return t
    raise ConfigError(f"no field {name}")
