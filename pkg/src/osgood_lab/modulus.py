"""Osgood moduli of continuity.

A modulus ``L`` on ``(0, m_L]`` defines the Osgood integral

    M(z) = int_z^{m_L} dr / L(r),      R(z) = exp(-M(z)).

Named moduli (Lipschitz, log-Lipschitz, iterated-log chains) use closed
forms; tabulated moduli use monotone cubic interpolation in log-log
coordinates and adaptive quadrature in ``s = log(1/r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericError

LIPSCHITZ = "lipschitz"
LOG_LIPSCHITZ = "loglipschitz"
CHAIN = "chain"
CUSTOM = "custom"

# e_3(1) ~ 3.8e6; e_4(1) overflows double precision.
MAX_CHAIN_DEPTH = 3


def iterated_log(n, z):
    """n-fold logarithm ``log log ... log z``; ``n = 0`` is the identity.

    Raises DomainError if some intermediate argument is not positive.
    """
    if n < 0 or int(n) != n:
        raise DomainError(f"iteration count must be a nonnegative integer, got {n}")
    scalar = np.isscalar(z)
    v = np.asarray(z, dtype=float)
    for _ in range(int(n)):
        if np.any(~(v > 0)):
            raise DomainError("iterated logarithm leaves its domain (argument <= 0)")
        v = np.log(v)
    return float(v) if scalar else v


def iterated_exp(n, z):
    """n-fold exponential tower, the inverse of :func:`iterated_log`."""
    if n < 0 or int(n) != n:
        raise DomainError(f"iteration count must be a nonnegative integer, got {n}")
    scalar = np.isscalar(z)
    v = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        for _ in range(int(n)):
            v = np.exp(v)
    return float(v) if scalar else v


def positive_iterated_log(n, z):
    """Iterated ``log_+``: each stage is ``max(0, log v)`` with ``log_+ 0 = 0``.

    For ``z > e_{n-1}(1)`` this agrees with :func:`iterated_log`; below
    that it is zero instead of negative or undefined.
    """
    v = np.asarray(z, dtype=float)
    for _ in range(int(n)):
        v = np.where(v > 1.0, np.log(np.where(v > 1.0, v, 1.0)), 0.0)
    return v


@dataclass(frozen=True)
class ModulusSpec:
    """Immutable description of a modulus of continuity ``L`` on ``(0, m_L]``."""

    kind: str
    m_L: float
    depth: int = 0
    nodes_z: tuple = field(default=(), repr=False)
    nodes_L: tuple = field(default=(), repr=False)
    divergence_threshold: float = 3.0
    _interp: object = field(default=None, repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # construction -----------------------------------------------------

    @classmethod
    def lipschitz(cls):
        return cls(LIPSCHITZ, 1.0, depth=0)

    @classmethod
    def log_lipschitz(cls):
        return cls(LOG_LIPSCHITZ, math.exp(-1.0), depth=1)

    @classmethod
    def iterated_log_chain(cls, n):
        if n < 1 or int(n) != n:
            raise DomainError(f"chain depth must be a positive integer, got {n}")
        if n > MAX_CHAIN_DEPTH:
            raise DomainError(
                f"chain depth {n} needs m_L = 1/e_{n}(1), which underflows double precision"
            )
        return cls(CHAIN, 1.0 / iterated_exp(int(n), 1.0), depth=int(n))

    @classmethod
    def custom(cls, z, L, m_L=None, divergence_threshold=3.0):
        """Tabulated modulus. ``z`` strictly increasing and positive, ``L > 0``."""
        z = np.asarray(z, dtype=float)
        L = np.asarray(L, dtype=float)
        if z.ndim != 1 or z.shape != L.shape or z.size < 4:
            raise DomainError("custom modulus needs matching 1-D tables with >= 4 nodes")
        if np.any(z <= 0) or np.any(np.diff(z) <= 0):
            raise DomainError("tabulated z must be positive and strictly increasing")
        if np.any(~(L > 0)):
            raise DomainError("tabulated L must be strictly positive")
        if np.any(np.diff(L) < 0):
            raise DomainError("tabulated L must be nondecreasing")
        m = float(z[-1]) if m_L is None else float(m_L)
        if m > z[-1] * (1 + 1e-12) or m <= z[0]:
            raise DomainError("m_L must lie inside the tabulated range")
        interp = PchipInterpolator(np.log(z), np.log(L), extrapolate=False)
        return cls(
            CUSTOM,
            m,
            depth=0,
            nodes_z=tuple(z.tolist()),
            nodes_L=tuple(L.tolist()),
            divergence_threshold=float(divergence_threshold),
            _interp=interp,
        )

    @classmethod
    def from_file(cls, path, m_L=None, divergence_threshold=3.0):
        """Load a two-column text table ``z L(z)``."""
        data = np.loadtxt(Path(path), dtype=float, ndmin=2)
        if data.shape[1] != 2:
            raise DomainError(f"{path}: expected two columns, found {data.shape[1]}")
        return cls.custom(data[:, 0], data[:, 1], m_L=m_L,
                          divergence_threshold=divergence_threshold)

    @classmethod
    def tabulate(cls, named, n_nodes=4000, z_min=1e-14, **kw):
        """Custom tabulation of a named modulus on a log-spaced grid."""
        z = np.geomspace(z_min, named.m_L, n_nodes)
        z[-1] = named.m_L
        return cls.custom(z, eval_L(named, z), m_L=named.m_L, **kw)

    # properties -------------------------------------------------------

    @property
    def name(self):
        if self.kind == CHAIN:
            return f"chain{self.depth}"
        return self.kind

    @property
    def z_min(self):
        return self.nodes_z[0] if self.kind == CUSTOM else 0.0

    @property
    def is_osgood(self):
        if self.kind != CUSTOM:
            return True
        return float(eval_M(self, self.z_min)) > self.divergence_threshold

    def describe(self):
        d = {"kind": self.kind, "m_L": self.m_L}
        if self.kind == CHAIN:
            d["depth"] = self.depth
        if self.kind == CUSTOM:
            d["nodes"] = len(self.nodes_z)
            d["z_min"] = self.z_min
        return d


def _as_array(z):
    return np.isscalar(z), np.asarray(z, dtype=float)


def _check_domain(spec, z, open_right=False):
    bad = ~(z > 0)
    if open_right:
        bad |= z >= spec.m_L
    else:
        bad |= z > spec.m_L * (1 + 1e-12)
    if np.any(bad):
        raise DomainError(f"z outside (0, {spec.m_L:.6g}] for modulus {spec.name}")


def _custom_logL(spec, logz):
    """log L(z) from the interpolant, power-law extension below the table."""
    lz0 = math.log(spec.nodes_z[0])
    inside = logz >= lz0
    out = np.empty_like(logz)
    out[inside] = spec._interp(np.minimum(logz[inside], math.log(spec.nodes_z[-1])))
    if np.any(~inside):
        slope = float(spec._interp(lz0, 1))
        out[~inside] = math.log(spec.nodes_L[0]) + slope * (logz[~inside] - lz0)
    return out


class _CustomTables:
    """Cumulative Osgood integral at the table nodes of a custom modulus."""

    def __init__(self, spec, epsrel):
        pp = spec._interp
        self.bp = pp.x
        self.coef = pp.c
        lz = np.log(np.asarray(spec.nodes_z))
        self.slope0 = float(pp(lz[0], 1))
        self.lz0 = lz[0]
        self.logL0 = math.log(spec.nodes_L[0])
        anchors = np.append(lz[lz < math.log(spec.m_L)], math.log(spec.m_L))
        self.anchors_s = -anchors[::-1]  # increasing s = log(1/z)
        a, b = self.anchors_s[:-1], self.anchors_s[1:]
        if a.size:
            pieces, err = integrate.quad_vec(
                lambda tau: (b - a) * self.g(a + tau * (b - a)), 0.0, 1.0,
                epsrel=epsrel, epsabs=0.0, norm="max", limit=400)
            if not np.all(np.isfinite(pieces)) or err > 1e3 * epsrel * max(pieces.max(), 1e-300):
                raise NumericError("quadrature of 1/L did not converge",
                                   {"abserr": err, "max_piece": float(pieces.max())})
        else:
            pieces = np.zeros(0)
        self.cum = np.concatenate([[0.0], np.cumsum(pieces)])  # M at anchors_s

    def g(self, s):
        """Integrand r/L(r) as a function of s = log(1/r) (vectorized)."""
        return np.exp(-s - self.logL(-s))

    def logL(self, lz):
        lz = np.asarray(lz, dtype=float)
        out = np.empty_like(lz)
        inside = lz >= self.lz0
        x = np.minimum(lz[inside], self.bp[-1])
        i = np.clip(np.searchsorted(self.bp, x, side="right") - 1, 0, self.bp.size - 2)
        d = x - self.bp[i]
        c = self.coef
        out[inside] = ((c[0, i] * d + c[1, i]) * d + c[2, i]) * d + c[3, i]
        out[~inside] = self.logL0 + self.slope0 * (lz[~inside] - self.lz0)
        return out

    def M(self, z, epsrel):
        s = np.log(1.0 / np.asarray(z, dtype=float))
        out = np.empty_like(s)
        top = self.anchors_s[-1]
        inside = s <= top
        if np.any(inside):
            si = s[inside]
            j = np.clip(np.searchsorted(self.anchors_s, si, side="left"), 0,
                        self.anchors_s.size - 1)
            a = self.anchors_s[np.maximum(j - 1, 0)]
            width = np.where(j > 0, si - a, 0.0)
            part, _ = integrate.quad_vec(lambda tau: width * self.g(a + tau * width), 0.0, 1.0,
                                         epsrel=epsrel, epsabs=0.0, norm="max", limit=400)
            out[inside] = np.where(j > 0, self.cum[np.maximum(j - 1, 0)] + part, 0.0)
        if np.any(~inside):
            # analytic tail for L = L0 (z/z0)^alpha below the table
            z0, alpha = math.exp(self.lz0), self.slope0
            zt = np.exp(-s[~inside])
            if abs(1.0 - alpha) < 1e-12:
                tail = z0 / math.exp(self.logL0) * np.log(z0 / zt)
            else:
                tail = (z0**alpha / math.exp(self.logL0)) * (z0 ** (1 - alpha) - zt ** (1 - alpha)) / (1 - alpha)
            out[~inside] = self.cum[-1] + tail
        return out


def _tables(spec, epsrel=1e-12):
    cache = spec._cache
    key = ("tables", epsrel)
    if key not in cache:
        cache[key] = _CustomTables(spec, epsrel)
    return cache[key]


def eval_L(spec, z):
    """The modulus ``L(z)`` for ``z`` in ``(0, m_L]``."""
    scalar, z = _as_array(z)
    _check_domain(spec, z)
    if spec.kind == LIPSCHITZ:
        out = z.copy()
    elif spec.kind in (LOG_LIPSCHITZ, CHAIN):
        out = z.copy()
        v = np.log(1.0 / z)
        for _ in range(spec.depth):
            out = out * v
            v = np.log(np.maximum(v, 1e-300))
    else:
        out = np.exp(_custom_logL(spec, np.log(z)))
    return float(out) if scalar else out


def eval_dL(spec, z):
    """Derivative ``L'(z)``."""
    scalar, z = _as_array(z)
    _check_domain(spec, z)
    if spec.kind == LIPSCHITZ:
        out = np.ones_like(z)
    elif spec.kind in (LOG_LIPSCHITZ, CHAIN):
        # d log L / dz = 1/z + sum_k l_k'/l_k with l_1 = log(1/z), l_k = log l_{k-1}
        logs = []
        v = np.log(1.0 / z)
        for _ in range(spec.depth):
            logs.append(v)
            v = np.log(np.maximum(v, 1e-300))
        dlog = 1.0 / z
        dl = -1.0 / z
        for lk in logs:
            dlog = dlog + dl / lk
            dl = dl / lk
        out = eval_L(spec, z) * dlog
    else:
        lz = np.log(z)
        lz0 = math.log(spec.nodes_z[0])
        slope = np.where(lz >= lz0, spec._interp(np.maximum(lz, lz0), 1),
                         float(spec._interp(lz0, 1)))
        out = slope * np.exp(_custom_logL(spec, lz)) / z
    return float(out) if scalar else out


def eval_M(spec, z, epsrel=1e-12):
    """Osgood integral ``M(z) = int_z^{m_L} dr/L(r)``.

    Tabulated moduli use adaptive quadrature in ``s = log(1/r)``; the
    tolerance may be loosened but never beyond ``1e-8``.
    """
    epsrel = min(epsrel, 1e-8)
    scalar, z = _as_array(z)
    _check_domain(spec, z)
    if spec.kind == LIPSCHITZ:
        out = np.log(1.0 / z)
    elif spec.kind in (LOG_LIPSCHITZ, CHAIN):
        out = np.log(1.0 / z)
        for _ in range(spec.depth):
            out = np.log(out)
        out = np.maximum(out, 0.0)
    else:
        out = _tables(spec).M(z.ravel(), epsrel).reshape(z.shape)
    return float(out) if scalar else out


def eval_dM(spec, z):
    """``M'(z) = -1/L(z)``."""
    return -1.0 / np.asarray(eval_L(spec, z)) if not np.isscalar(z) else -1.0 / eval_L(spec, z)


def eval_d2M(spec, z):
    """``M''(z) = L'(z)/L(z)^2``."""
    L = np.asarray(eval_L(spec, z))
    out = np.asarray(eval_dL(spec, z)) / L**2
    return float(out) if np.isscalar(z) else out


def eval_R(spec, z):
    """``R(z) = exp(-M(z))``, strictly increasing with ``R(m_L) = 1``."""
    m = eval_M(spec, z)
    return math.exp(-m) if np.isscalar(m) else np.exp(-m)


def eval_R_inv(spec, w, xtol=1e-13):
    """Inverse of :func:`eval_R` for ``w`` in ``(0, 1]``."""
    scalar, w = _as_array(w)
    if np.any(~(w > 0)) or np.any(w > 1 + 1e-14):
        raise DomainError("R^{-1} is defined on (0, 1]")
    w = np.minimum(w, 1.0)
    if spec.kind == LIPSCHITZ:
        out = w.copy()
    elif spec.kind in (LOG_LIPSCHITZ, CHAIN):
        # R = 1/log_n(1/z)  =>  z = exp(-e_{n-1}(1/w))
        with np.errstate(over="ignore"):
            out = np.exp(-iterated_exp(spec.depth - 1, 1.0 / w))
        out = np.minimum(out, spec.m_L)
        if np.any(out <= 0.0):
            raise DomainError("R^{-1}(w) underflows double precision for the smallest w")
    else:
        out = _custom_R_inv(spec, w.ravel(), xtol).reshape(w.shape)
    return float(out) if scalar else out


def _custom_R_inv(spec, w, xtol):
    """Safeguarded Newton in s = log(1/z) on M(s) = -log w, with dM/ds = r/L(r)."""
    tab = _tables(spec)
    target = -np.log(w)
    s_lo = np.full(w.shape, tab.anchors_s[0])
    s_hi = np.empty(w.shape)
    k = np.searchsorted(tab.cum, target)
    inside = k < tab.cum.size
    kk = np.clip(k, 1, tab.cum.size - 1)
    s_lo[inside] = tab.anchors_s[kk[inside] - 1]
    s_hi[inside] = tab.anchors_s[kk[inside]]
    if np.any(~inside):
        s_lo[~inside] = tab.anchors_s[-1]
        hi = np.full(int((~inside).sum()), tab.anchors_s[-1])
        for _ in range(70):
            m = tab.M(np.exp(-hi), 1e-12)
            short = m <= target[~inside]
            if not short.any():
                break
            hi[short] += 10.0
            if hi.max() > 700:
                raise DomainError("R^-1 not attained: M is bounded (non-Osgood modulus)")
        s_hi[~inside] = hi
    s = 0.5 * (s_lo + s_hi)
    for _ in range(100):
        f = tab.M(np.exp(-s), 1e-12) - target
        s_lo = np.where(f < 0, s, s_lo)
        s_hi = np.where(f > 0, s, s_hi)
        step = f / tab.g(s)
        new = s - step
        bad = ~((new > s_lo) & (new < s_hi))
        new = np.where(bad, 0.5 * (s_lo + s_hi), new)
        done = np.abs(new - s) < xtol
        s = new
        if np.all(done | (s_hi - s_lo < xtol)):
            break
    else:
        raise NumericError("R^-1 iteration did not converge", {"max_residual": float(np.abs(f).max())})
    out = np.exp(-s)
    out[target <= 0] = spec.m_L
    return out


def continuity_constant(spec, n_points=400, z_min=None):
    """Measured sup of ``z log(1/z) / L(z)`` over a log grid in ``(z_min, min(m_L, 1/e))``.

    Returns ``(constant, bounded)`` where ``bounded`` is False when the ratio
    is still increasing at the small-z end of the grid.
    """
    top = min(spec.m_L, math.exp(-1.0))
    lo = z_min if z_min is not None else (spec.z_min if spec.kind == CUSTOM else 1e-300)
    lo = max(lo, 1e-300)
    z = np.geomspace(lo, top, n_points)
    ratio = z * np.log(1.0 / z) / eval_L(spec, z)
    tail = ratio[:5]
    bounded = not bool(np.all(np.diff(tail) < 0) and tail[0] > 1.01 * tail[-1])
    return float(ratio.max()), bounded


@dataclass(frozen=True)
class GrowthFactor:
    """``mu(t) = exp(int_0^t ||u(s)||_L ds)``."""

    t: float
    lint: float
    mu: float

    @property
    def log_mu(self):
        return self.lint


def mu_factor(lint, t=float("nan")):
    """Growth factor from the accumulated modulus integral ``lint >= 0``."""
    if not lint >= 0:
        raise DomainError(f"accumulated modulus norm must be nonnegative, got {lint}")
    return GrowthFactor(t=t, lint=float(lint), mu=math.exp(lint))


def modulus_integral(C, t):
    """``int_0^|t| C(s) ds`` for a constant or piecewise-constant bound.

    ``C`` is a float, or a sequence of ``(t_start, value)`` breakpoints
    sorted by ``t_start`` with the first at 0.
    """
    t = abs(float(t))
    if np.isscalar(C):
        return float(C) * t
    pieces = list(C)
    total = 0.0
    for i, (t0, c) in enumerate(pieces):
        t1 = pieces[i + 1][0] if i + 1 < len(pieces) else math.inf
        if t0 >= t:
            break
        total += c * (min(t1, t) - t0)
    return total
