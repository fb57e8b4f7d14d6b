"""Run presets, write their outputs and compare manifests.

A run produces one CSV per table, a JSON document per extra output and a
``manifest.json`` recording the resolved configuration, its content hash,
library versions, wall time, step count and the verdict of every check.
CSV floats are written with ``repr`` so identical configurations give
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import config as cfgmod
from . import presets as P
from .errors import ConfigError


@dataclass
class RunManifest:
    """Record of one preset run."""

    preset: str
    anchor: str
    config: dict
    config_hash: str
    versions: dict
    wall_time: float
    steps: int
    checks: dict
    metrics: dict
    outputs: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def as_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def save(self, path):
        Path(path).write_text(json.dumps(_plain(self.as_dict()), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        d = json.loads(Path(path).read_text())
        d.pop("passed", None)
        return cls(**d)


def _plain(obj):
    """Convert numpy scalars, arrays and tuples to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def config_hash(config):
    """SHA-256 of the canonical JSON form of a configuration echo."""
    canon = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def versions():
    return {"osgood_lab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def format_csv(rows):
    """Rows of dicts to CSV text with columns in first-seen order."""
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in cols])
    return buf.getvalue()


def _sha(text):
    return hashlib.sha256(text.encode()).hexdigest()


def make_config(preset, overrides=None, seed=None):
    """Resolve a preset name plus ``key=value`` strings into a config."""
    raw = cfgmod.parse_overrides(overrides) if isinstance(overrides, (list, tuple)) else dict(overrides or {})
    if seed is not None:
        raw["seed"] = str(seed)
    return cfgmod.resolve(preset, P.get(preset).schema, raw)


def schemas():
    return {name: p.schema for name, p in P.PRESETS.items()}


def _stage(name, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:
        msg = exc.args[0] if exc.args else ""
        exc.args = (f"[stage {name}] {msg}",) + exc.args[1:]
        exc.stage = name
        raise


def run_preset(config, out=None):
    """Execute a preset and return its :class:`RunManifest`.

    ``config`` is an :class:`~osgood_lab.config.ExperimentConfig` or a
    preset name (defaults). Outputs go to ``out`` (or ``config.out``)
    when given.
    """
    if isinstance(config, str):
        config = make_config(config)
    preset = P.get(config.preset)
    echo = config.echo()
    params = dict(config.params, seed=config.seed)
    rng = np.random.default_rng(config.seed)
    start = time.perf_counter()
    result = _stage(f"{preset.name}:run", preset.run, params, rng)
    wall = time.perf_counter() - start
    files = {f"{name}.csv": format_csv(rows) for name, rows in result.tables.items()}
    files.update({f"{name}.json": json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"
                  for name, doc in result.documents.items()})
    manifest = RunManifest(
        preset=preset.name, anchor=preset.anchor, config=_plain(echo), config_hash=config_hash(echo),
        versions=versions(), wall_time=wall, steps=int(result.steps),
        checks={k: bool(v) for k, v in result.checks.items()},
        metrics=_plain(result.metrics), outputs={k: _sha(v) for k, v in files.items()},
    )
    target = out if out is not None else config.out
    if target is not None:
        _stage(f"{preset.name}:write", write_outputs, target, files, manifest)
    return manifest


def write_outputs(directory, files, manifest):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (d / name).write_text(text)
    manifest.save(d / "manifest.json")


def _as_manifest(m):
    if isinstance(m, RunManifest):
        return m
    p = Path(m)
    return RunManifest.load(p / "manifest.json" if p.is_dir() else p)


def relative_difference(a, b):
    if a == b:
        return 0.0
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def compare_runs(manifest_a, manifest_b):
    """Per-metric relative differences between two runs of the same preset.

    Returns ``{metric: {"a": ..., "b": ..., "rel_diff": ...}}`` for every
    numeric metric present in both.

    Raises
    ------
    ConfigError
        If the manifests come from different presets.
    """
    a, b = _as_manifest(manifest_a), _as_manifest(manifest_b)
    if a.preset != b.preset:
        raise ConfigError(f"cannot compare runs of different presets ({a.preset} vs {b.preset})")
    report = {}
    for k in sorted(set(a.metrics) & set(b.metrics)):
        va, vb = a.metrics[k], b.metrics[k]
        if isinstance(va, bool) or isinstance(vb, bool):
            continue
        if isinstance(va, (int, float)) and isinstance(vb, (int, float)):
            report[k] = {"a": va, "b": vb, "rel_diff": relative_difference(float(va), float(vb))}
    return report


def list_presets():
    """``(name, anchor, summary)`` for every preset."""
    return [(p.name, p.anchor, p.summary) for p in P.PRESETS.values()]
