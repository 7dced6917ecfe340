"""Loading of the INI-style experiment/geometry configuration.

The packaged ``default.ini`` is always read first; a user file passed to
:func:`load_config` only needs to contain the keys it overrides.
"""
from __future__ import annotations

import configparser
import hashlib
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError

DEFAULT_CONFIG_NAME = "default.ini"


def default_config_text() -> str:
    return resources.files("softlimb.data").joinpath(DEFAULT_CONFIG_NAME).read_text()


def load_config(path: str | Path | None = None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read_string(default_config_text(), source=DEFAULT_CONFIG_NAME)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read_string(path.read_text(), source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
    return parser


def config_hash(parser: configparser.ConfigParser) -> str:
    """Stable digest of the fully merged configuration."""
    lines = []
    for section in sorted(parser.sections()):
        for key in sorted(parser[section]):
            lines.append(f"{section}.{key}={parser[section][key].strip()}")
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]


def get_float(section: configparser.SectionProxy, key: str) -> float:
    try:
        return float(section[key])
    except KeyError:
        raise ConfigError(f"missing key [{section.name}] {key}") from None
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} is not a number: {section[key]!r}") from None


def get_int(section: configparser.SectionProxy, key: str) -> int:
    value = get_float(section, key)
    if value != int(value):
        raise ConfigError(f"[{section.name}] {key} must be an integer")
    return int(value)


def get_vector(section: configparser.SectionProxy, key: str, size: int) -> np.ndarray:
    try:
        parts = section[key].replace(",", " ").split()
    except KeyError:
        raise ConfigError(f"missing key [{section.name}] {key}") from None
    try:
        vec = np.array([float(p) for p in parts], dtype=float)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} must hold {size} numbers") from None
    if vec.shape != (size,):
        raise ConfigError(f"[{section.name}] {key} must hold {size} numbers, got {len(parts)}")
    return vec


def get_section(parser: configparser.ConfigParser, name: str) -> configparser.SectionProxy:
    if not parser.has_section(name):
        raise ConfigError(f"missing config section [{name}]")
    return parser[name]
