"""Uniform-grid scalar and vector fields with a flat binary file format.

A field file is a raw little-endian float64 array (C order, component
first for vector fields) next to a JSON header with the same stem::

    omega.bin   omega.json   ->  {"n": 256, "length": 6.283..., ...}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DomainError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Grid:
    """Square ``n x n`` grid of spacing ``h = length / n`` around ``center``.

    Node ``(i, j)`` sits at ``center + (i - n/2 + s, j - n/2 + s) * h`` with
    ``s = 0.5`` for cell-centred grids and ``s = 0`` otherwise, so for even
    ``n`` and ``s = 0`` the centre is exactly node ``(n/2, n/2)``. Arrays
    use ``ij`` indexing: axis 0 runs along ``x1``.
    """

    n: int
    length: float = TWO_PI
    center: tuple = (math.pi, math.pi)
    periodic: bool = True
    centered: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"grid needs at least 2 nodes per side, got {self.n}")
        if not self.length > 0:
            raise DomainError("grid length must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def torus(cls, n):
        """The periodic grid on ``[0, 2 pi)^2``."""
        return cls(int(n), TWO_PI, (math.pi, math.pi), True, False)

    @classmethod
    def box(cls, center, half_width, n, centered=False):
        """Non-periodic box ``center +- half_width``."""
        c = np.asarray(center, dtype=float)
        return cls(int(n), 2.0 * float(half_width), tuple(c.tolist()), False, bool(centered))

    @property
    def h(self):
        return self.length / self.n

    @property
    def origin(self):
        return (self.center[0] - 0.5 * self.length, self.center[1] - 0.5 * self.length)

    @property
    def cell_area(self):
        return self.h * self.h

    def _offset(self):
        return (0.5 if self.centered else 0.0) - 0.5 * self.n

    def axis(self, k):
        return self.center[k] + (np.arange(self.n) + self._offset()) * self.h

    def mesh(self):
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")

    def points(self):
        """Node coordinates as an ``(n, n, 2)`` array."""
        X, Y = self.mesh()
        return np.stack([X, Y], axis=-1)

    def displacement(self, x, c):
        """``x - c`` with minimum-image wrapping on periodic grids."""
        d = np.asarray(x, dtype=float) - np.asarray(c, dtype=float)
        if self.periodic:
            d = d - self.length * np.round(d / self.length)
        return d

    def distance(self, x, c):
        d = self.displacement(x, c)
        return np.hypot(d[..., 0], d[..., 1])

    def to_index(self, x):
        """Fractional index coordinates of physical points (last axis of size 2)."""
        x = np.asarray(x, dtype=float)
        return np.stack([(x[..., k] - self.center[k]) / self.h - self._offset() for k in range(2)])

    def header(self):
        return {
            "n": self.n,
            "length": self.length,
            "center": list(self.center),
            "periodic": self.periodic,
            "centered": self.centered,
        }


def _interp(grid, values, x, order=3):
    idx = grid.to_index(x)
    mode = "grid-wrap" if grid.periodic else "nearest"
    out = ndimage.map_coordinates(values, idx.reshape(2, -1), order=order, mode=mode)
    return out.reshape(idx.shape[1:])


@dataclass
class ScalarField2D:
    """Samples of a scalar (vorticity, tracer) on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise DomainError(f"values shape {self.values.shape} does not match grid n={self.grid.n}")

    @classmethod
    def from_function(cls, grid, f, time=0.0):
        return cls(grid, f(grid.points()), time)

    def __call__(self, x):
        """Cubic B-spline interpolation (periodic wrap on the torus)."""
        return _interp(self.grid, self.values, x)

    def mean(self):
        return float(np.mean(self.values))

    def copy(self):
        return ScalarField2D(self.grid, self.values.copy(), self.time, dict(self.meta))


@dataclass
class VectorField2D:
    """Two-component field, e.g. a velocity snapshot."""

    grid: Grid
    u1: np.ndarray
    u2: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)
        if self.u1.shape != (self.grid.n, self.grid.n) or self.u2.shape != self.u1.shape:
            raise DomainError("component shapes do not match the grid")

    def __call__(self, x):
        return np.stack([_interp(self.grid, self.u1, x), _interp(self.grid, self.u2, x)], axis=-1)

    def max_speed(self):
        return float(np.sqrt(np.max(self.u1**2 + self.u2**2)))

    def spectral_divergence(self):
        """Max ``|k . u_hat|`` relative to max ``|k| |u_hat|`` (periodic grids only)."""
        if not self.grid.periodic:
            raise DomainError("spectral divergence needs a periodic grid")
        n = self.grid.n
        k = np.fft.fftfreq(n, d=self.grid.length / (TWO_PI * n))
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        a, b = np.fft.fft2(self.u1), np.fft.fft2(self.u2)
        div = np.abs(k1 * a + k2 * b)
        scale = np.max(np.hypot(k1, k2) * np.hypot(np.abs(a), np.abs(b)))
        return float(div.max() / scale) if scale > 0 else 0.0


def save_field(path, f):
    """Write ``path`` (.bin data) and a JSON header next to it."""
    path = Path(path).with_suffix(".bin")
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(f, VectorField2D):
        data = np.stack([f.u1, f.u2])
        comps = 2
    else:
        data = f.values[None]
        comps = 1
    data.astype("<f8").tofile(path)
    head = dict(f.grid.header(), time=f.time, components=comps, dtype="<f8", order="C",
                meta=f.meta)
    path.with_suffix(".json").write_text(json.dumps(head, indent=1, sort_keys=True))
    return path


def load_field(path):
    path = Path(path).with_suffix(".bin")
    head = json.loads(path.with_suffix(".json").read_text())
    grid = Grid(head["n"], head["length"], tuple(head["center"]), head["periodic"], head["centered"])
    data = np.fromfile(path, dtype=head.get("dtype", "<f8"))
    data = data.reshape(head["components"], grid.n, grid.n).astype(float)
    meta = head.get("meta", {})
    if head["components"] == 2:
        return VectorField2D(grid, data[0], data[1], head["time"], meta)
    return ScalarField2D(grid, data[0], head["time"], meta)
