"""Singular profiles ``gamma * F(M(|x - x0| / scale))`` with a smooth cutoff."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import modulus as mod
from .errors import DomainError

SHAPES = ("identity", "power", "log", "sin", "square", "zlogz", "custom")


def smooth_step(u):
    """C-infinity step: 1 for ``u <= 0``, 0 for ``u >= 1``."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u < 1, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
        b = np.where(u > 0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
    return a / (a + b)


def smooth_step_derivative(u):
    """Derivative of :func:`smooth_step` in ``u``."""
    u = np.asarray(u, dtype=float)
    inside = (u > 0) & (u < 1)
    v = np.where(inside, u, 0.5)
    a = np.exp(-1.0 / (1.0 - v))
    b = np.exp(-1.0 / v)
    da = -a / (1.0 - v) ** 2
    db = b / v**2
    return np.where(inside, (da * b - a * db) / (a + b) ** 2, 0.0)


@dataclass(frozen=True)
class SingularProfile:
    """Radial singular structure centred at ``center``.

    The value at distance ``r`` is ``gamma * F(M(r / scale)) * chi(r)`` where
    ``chi`` equals 1 on ``[0, r_cut]`` and decays smoothly to 0 at ``r_end``.
    ``scale`` stretches the modulus so a profile can fill a ball larger
    than ``m_L``; the singular behaviour at the centre is unchanged.

    Parameters
    ----------
    shape : str
        ``identity``, ``power`` (``z**a``, ``0 < a <= 1``), ``log``,
        ``sin`` (``sin(lam z)``), ``square`` (``z**2``), ``zlogz``
        (``z log z``), or ``custom`` with ``custom_F``/``custom_dF``.
    shape_param : float
        ``a`` for ``power`` and ``lam`` for ``sin``.
    """

    center: tuple
    modulus: mod.ModulusSpec
    gamma: float = 1.0
    shape: str = "identity"
    shape_param: float = 1.0
    r_cut: float | None = None
    r_end: float | None = None
    scale: float = 1.0
    custom_F: object = field(default=None, repr=False, compare=False)
    custom_dF: object = field(default=None, repr=False, compare=False)
    custom_slope: float = math.inf

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise DomainError(f"unknown shape {self.shape!r}; choose from {SHAPES}")
        if self.shape == "power" and not 0 < self.shape_param <= 1:
            raise DomainError("power shape needs exponent in (0, 1]")
        if self.shape == "sin" and not self.shape_param > 0:
            raise DomainError("sin shape needs lam > 0")
        if self.shape == "custom" and self.custom_F is None:
            raise DomainError("custom shape needs custom_F")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        top = self.scale * self.modulus.m_L
        r_end = self.r_end
        if r_end is None:
            # F is controlled on |z| >= 1, so stop where M = 1
            r_end = self.scale * float(mod.eval_R_inv(self.modulus, math.exp(-1.0)))
        r_cut = 0.5 * r_end if self.r_cut is None else self.r_cut
        if not 0 < r_cut < r_end <= top * (1 + 1e-12):
            raise DomainError(f"need 0 < r_cut < r_end <= scale*m_L = {top:.6g}")
        object.__setattr__(self, "r_end", float(min(r_end, top)))
        object.__setattr__(self, "r_cut", float(r_cut))

    # outer shape ------------------------------------------------------

    def F(self, z):
        z = np.asarray(z, dtype=float)
        s, a = self.shape, self.shape_param
        if s == "identity":
            return z
        if s == "power":
            return z**a
        if s == "log":
            with np.errstate(divide="ignore"):
                return np.log(z)
        if s == "sin":
            return np.sin(a * z)
        if s == "square":
            return z * z
        if s == "zlogz":
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(z > 0, z * np.log(np.where(z > 0, z, 1.0)), 0.0)
        return np.asarray(self.custom_F(z), dtype=float)

    def dF(self, z):
        z = np.asarray(z, dtype=float)
        s, a = self.shape, self.shape_param
        if s == "identity":
            return np.ones_like(z)
        if s == "power":
            with np.errstate(divide="ignore"):
                return a * z ** (a - 1)
        if s == "log":
            with np.errstate(divide="ignore"):
                return 1.0 / z
        if s == "sin":
            return a * np.cos(a * z)
        if s == "square":
            return 2 * z
        if s == "zlogz":
            with np.errstate(divide="ignore"):
                return np.log(np.where(z > 0, z, np.nan)) + 1.0
        if self.custom_dF is None:
            raise DomainError("custom shape without custom_dF")
        return np.asarray(self.custom_dF(z), dtype=float)

    @property
    def F_slope(self):
        """``sup_{|z| >= 1} |F'(z)|`` (``inf`` for superlinear shapes)."""
        s, a = self.shape, self.shape_param
        return {"identity": 1.0, "power": a, "log": 1.0, "sin": a,
                "square": math.inf, "zlogz": math.inf}.get(s, self.custom_slope)

    # evaluation -------------------------------------------------------

    def M(self, r):
        """``M(r / scale)``; ``inf`` at ``r = 0``."""
        r = np.asarray(r, dtype=float)
        rr = np.clip(r / self.scale, 1e-300, self.modulus.m_L)
        out = np.asarray(mod.eval_M(self.modulus, rr), dtype=float)
        return np.where(r > 0, out, np.inf)

    def structure(self, r):
        """Untapered ``gamma F(M(r/scale))`` for ``0 < r < scale m_L``."""
        return self.gamma * self.F(self.M(r))

    def dM(self, r):
        """``d/dr M(r / scale) = -1 / (scale L(r / scale))``."""
        r = np.asarray(r, dtype=float)
        rr = np.clip(r / self.scale, 1e-300, self.modulus.m_L)
        return np.asarray(mod.eval_dM(self.modulus, rr)) / self.scale

    def d2M(self, r):
        r = np.asarray(r, dtype=float)
        rr = np.clip(r / self.scale, 1e-300, self.modulus.m_L)
        return np.asarray(mod.eval_d2M(self.modulus, rr)) / self.scale**2

    def taper(self, r):
        return smooth_step((np.asarray(r, dtype=float) - self.r_cut) / (self.r_end - self.r_cut))

    def radial(self, r):
        """Tapered profile as a function of distance; 0 beyond ``r_end``."""
        r = np.asarray(r, dtype=float)
        inside = r < self.r_end
        rin = np.where(inside, r, self.r_cut)
        with np.errstate(invalid="ignore"):
            val = self.structure(rin) * self.taper(rin)
        return np.where(inside, val, 0.0)

    def radial_derivative(self, r):
        """``d/dr`` of :meth:`radial` for ``0 < r``."""
        r = np.asarray(r, dtype=float)
        inside = (r > 0) & (r < self.r_end)
        rin = np.where(inside, r, self.r_cut)
        width = self.r_end - self.r_cut
        u = (rin - self.r_cut) / width
        with np.errstate(invalid="ignore"):
            Mr = self.M(rin)
            val = self.gamma * (self.dF(Mr) * self.dM(rin) * self.taper(rin)
                                + self.F(Mr) * smooth_step_derivative(u) / width)
        return np.where(inside, val, 0.0)

    def capped_M(self, r, eps):
        """``M(r / scale)`` for ``r >= eps``; below ``eps`` a quadratic in
        ``r^2`` matching value, first and second derivative at ``eps``."""
        r = np.asarray(r, dtype=float)
        if not 0 < eps < self.r_end:
            raise DomainError("mollification scale must lie in (0, r_end)")
        M0 = float(self.M(eps))
        a = float(self.dM(eps)) / (2 * eps)
        b = (float(self.d2M(eps)) - 2 * a) / (8 * eps * eps)
        q = r * r - eps * eps
        cap = M0 + a * q + b * q * q
        return np.where(r >= eps, self.M(np.maximum(r, eps)), cap)

    def mollified(self, r, eps):
        """Grid representation: :meth:`radial` with ``M`` capped below ``eps``."""
        r = np.asarray(r, dtype=float)
        inside = r < self.r_end
        rin = np.where(inside, r, self.r_cut)
        val = self.gamma * self.F(self.capped_M(rin, eps)) * self.taper(rin)
        return np.where(inside, val, 0.0)

    def distance(self, x, period=None):
        d = np.asarray(x, dtype=float) - np.asarray(self.center)
        if period is not None:
            d = d - period * np.round(d / period)
        return np.hypot(d[..., 0], d[..., 1])

    def __call__(self, x, period=None):
        return self.radial(self.distance(x, period))

    def moved(self, center):
        """Same profile about a new centre."""
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw["center"] = tuple(np.asarray(center, dtype=float).tolist())
        return SingularProfile(**kw)

    def describe(self):
        return {"center": list(self.center), "gamma": self.gamma, "shape": self.shape,
                "shape_param": self.shape_param, "modulus": self.modulus.name,
                "r_cut": self.r_cut, "r_end": self.r_end, "scale": self.scale,
                "F_slope": self.F_slope}
