"""Flat, typed ``key = value`` experiment configuration.

A config file is plain text::

    # two-vortex run at a coarser grid
    preset = euler-two-vortex
    n = 128
    dt = 0.05

Every key must belong to the preset's schema (plus the common keys
``preset``, ``seed`` and ``out``); anything else is rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

COMMON_KEYS = ("preset", "seed", "out")


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text):
    low = text.strip().lower()
    if low in ("pi", "+pi"):
        return math.pi
    if low.endswith("pi") and "/" not in low:
        return float(low[:-2].rstrip("*")) * math.pi
    if low.startswith("pi/"):
        return math.pi / float(low[3:])
    return float(text)


PARSERS = {
    "int": int,
    "float": _parse_float,
    "str": str.strip,
    "bool": _parse_bool,
    "floats": lambda s: tuple(_parse_float(v) for v in s.split(",") if v.strip()),
    "ints": lambda s: tuple(int(v) for v in s.split(",") if v.strip()),
    "strs": lambda s: tuple(v.strip() for v in s.split(",") if v.strip()),
}


@dataclass(frozen=True)
class Param:
    kind: str
    default: object
    doc: str = ""

    def parse(self, text):
        if not isinstance(text, str):
            return text
        try:
            return PARSERS[self.kind](text)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read {text!r} as {self.kind}: {exc}") from exc


@dataclass
class ExperimentConfig:
    """A fully resolved preset configuration."""

    preset: str
    params: dict
    seed: int = 0
    out: str | None = None
    overrides: dict = field(default_factory=dict)

    def echo(self):
        return {"preset": self.preset, "seed": self.seed, "params": _jsonable(self.params),
                "overrides": dict(self.overrides)}


def _jsonable(d):
    out = {}
    for k, v in d.items():
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def parse_text(text):
    """``key = value`` lines to an ordered dict of raw strings."""
    raw = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {no}: empty key")
        if key in raw:
            raise ConfigError(f"line {no}: duplicate key {key!r}")
        raw[key] = value
    return raw


def parse_overrides(items):
    """``["n=128", "dt=0.01"]`` to a dict of raw strings."""
    raw = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    return raw


def resolve(preset, schema, raw=None):
    """Validate raw strings against ``schema`` (``{key: Param}``) and fill defaults."""
    raw = dict(raw or {})
    named = raw.pop("preset", preset)
    if named != preset:
        raise ConfigError(f"config names preset {named!r} but {preset!r} was requested")
    seed = int(raw.pop("seed", 0))
    out = raw.pop("out", None)
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {preset}: {', '.join(unknown)}; "
                          f"valid keys: {', '.join(sorted(schema))}")
    params = {k: p.default for k, p in schema.items()}
    for k, v in raw.items():
        params[k] = schema[k].parse(v)
    return ExperimentConfig(preset, params, seed, out, dict(raw))


def load(path, preset=None, schemas=None):
    """Read a config file; ``schemas`` maps preset names to schemas."""
    raw = parse_text(Path(path).read_text())
    name = raw.get("preset", preset)
    if name is None:
        raise ConfigError("config file does not name a preset")
    if schemas is None or name not in schemas:
        raise ConfigError(f"unknown preset {name!r}")
    return resolve(name, schemas[name], raw)


def describe_schema(schema):
    return [(k, p.kind, p.default, p.doc) for k, p in schema.items()]
