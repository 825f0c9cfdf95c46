"""Layered plain-text configuration with include support.

Files hold ``key = value`` lines with ``#`` comments and optional
``include <path>`` lines (resolved relative to the including file, loaded
first so later keys override).  Values parse as int, float, bool,
comma-separated lists, or strings.  The packaged ``default.cfg`` is always
the base layer; ``INTENT_ADMIT_CONFIG`` names an optional user layer.
"""

from __future__ import annotations

import os
from importlib import resources

from .errors import ConfigurationError

ENV_VAR = "INTENT_ADMIT_CONFIG"


def _parse_scalar(text: str):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [_parse_scalar(p) for p in text.split(",") if p.strip()]
    return _parse_scalar(text)


def _parse_lines(lines, base_dir: str, out: dict) -> None:
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("include "):
            inc = line[len("include "):].strip()
            inc_path = inc if os.path.isabs(inc) else os.path.join(base_dir, inc)
            _load_file(inc_path, out)
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = parse_value(value)


def _load_file(path: str, out: dict) -> None:
    if not os.path.exists(path):
        raise ConfigurationError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        _parse_lines(f.readlines(), os.path.dirname(os.path.abspath(path)), out)


class Config(dict):
    """Flat dotted-key config with typed accessors."""

    def require(self, key: str):
        if key not in self:
            raise ConfigurationError(f"missing config key {key!r}")
        return self[key]

    def get_float(self, key: str) -> float:
        return float(self.require(key))

    def get_int(self, key: str) -> int:
        v = self.require(key)
        if isinstance(v, float) and not v.is_integer():
            raise ConfigurationError(f"{key} must be an integer, got {v}")
        return int(v)

    def get_bool(self, key: str) -> bool:
        v = self.require(key)
        if not isinstance(v, bool):
            raise ConfigurationError(f"{key} must be a boolean, got {v!r}")
        return v

    def get_str(self, key: str) -> str:
        return str(self.require(key))

    def get_list(self, key: str) -> list:
        v = self.require(key)
        return list(v) if isinstance(v, list) else [v]

    def get_floats(self, key: str) -> list[float]:
        return [float(x) for x in self.get_list(key)]

    def get_ints(self, key: str) -> list[int]:
        return [int(x) for x in self.get_list(key)]

    def get_strs(self, key: str) -> list[str]:
        return [str(x) for x in self.get_list(key)]


def default_config_text() -> str:
    return resources.files("intent_admit").joinpath("data/default.cfg").read_text()


def load_config(path: str | None = None, overrides: dict | None = None) -> Config:
    """Defaults <- INTENT_ADMIT_CONFIG (if set) <- explicit path <- overrides."""
    cfg = Config()
    _parse_lines(default_config_text().splitlines(), os.getcwd(), cfg)
    env_path = os.environ.get(ENV_VAR)
    if env_path:
        _load_file(env_path, cfg)
    if path:
        _load_file(path, cfg)
    if overrides:
        cfg.update(overrides)
    return cfg
