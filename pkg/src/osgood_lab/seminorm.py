"""Lp and Yudovich norms, singularity seminorms, and iterated-log Lp growth.

The seminorm of ``f`` at ``x`` with respect to an Osgood integral ``M`` is

    [f]_{x,gamma,L} = lim_{r -> 0} sup_{0 < |x-y| < r} |f(x) - f(y)| / M(|x-y|)^gamma,

and the global seminorm takes the sup over all pairs. A grid can only
bracket the limit, so every table carries an extrapolated value and a
trend flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import modulus as mod
from .errors import DomainError, NumericError, ResolutionError

DEFAULT_P_GRID = tuple(2.0**k for k in range(1, 9))  # 2, 4, ..., 256
MIN_PAIR_CELLS = 2.0
MIN_RADIUS_CELLS = 4.0
CONVERGED_SPREAD = 0.02


# ---------------------------------------------------------------------------
# Lp and Yudovich norms

def _region_mask(field_, region):
    if region is None:
        return np.ones(field_.values.shape, dtype=bool)
    center, radius = region
    mask = field_.grid.distance(field_.grid.points(), center) < radius
    if not mask.any():
        raise DomainError("integration region contains no grid nodes")
    return mask


def lp_norm(field_, p, region=None):
    """Midpoint-rule ``(int |f|^p)^(1/p)`` over the grid or a disk.

    Parameters
    ----------
    field_ : ScalarField2D
    p : float
        Exponent in ``[1, inf]``; ``p = inf`` returns the grid max of ``|f|``.
    region : tuple, optional
        ``(center, radius)`` restricting the sum to an open disk.
    """
    if not (p >= 1):
        raise DomainError(f"exponent must be >= 1, got {p}")
    mask = _region_mask(field_, region)
    a = np.abs(field_.values[mask])
    top = float(a.max())
    if math.isinf(p):
        return top
    if top == 0.0 or not math.isfinite(top):
        return top
    # scale by the max so large p cannot overflow
    s = np.sum((a / top) ** p) * field_.grid.cell_area
    return top * float(s) ** (1.0 / p)


def theta(name, p):
    """Growth function ``Theta(p)`` for Yudovich spaces.

    ``name`` is ``const``, ``log_k`` (k-fold log of p, ``log_0 = p``),
    or ``log*loglog`` for ``log p * log log p``. The aliases ``p``, ``log``
    and ``loglog`` stand for ``log_0``, ``log_1`` and ``log_2``.
    """
    p = np.asarray(p, dtype=float)
    alias = {"p": "log_0", "log": "log_1", "loglog": "log_2", "1": "const"}
    key = alias.get(name, name)
    if key == "const":
        return np.ones_like(p)
    if key == "log*loglog":
        return np.log(p) * np.log(np.log(p))
    if key.startswith("log_"):
        return mod.iterated_log(int(key[4:]), p)
    raise DomainError(f"unknown growth function {name!r}")


@dataclass
class NormReport:
    """Lp norms over a finite exponent grid and the Yudovich ratio."""

    p_grid: np.ndarray
    lp_values: np.ndarray
    theta_name: str
    ratios: np.ndarray
    yudovich_ratio: float
    p_at_sup: float
    growing: bool

    @property
    def trend(self):
        return "growing" if self.growing else "bounded"


def yudovich_norm(field_, theta_name="log", p_grid=DEFAULT_P_GRID, region=None,
                  growth_tol=0.01):
    """``sup_p ||f||_p / Theta(p)`` over ``p_grid``.

    Membership in a Yudovich space cannot be decided from finitely many
    exponents; ``growing`` is set when the ratio still rises by more than
    ``growth_tol`` between the last two exponents.
    """
    pg = np.asarray(sorted(p_grid), dtype=float)
    th = theta(theta_name, pg)
    if np.any(~(th > 0)):
        raise DomainError(f"Theta={theta_name} is not positive on the exponent grid")
    vals = np.array([lp_norm(field_, p, region) for p in pg])
    ratios = vals / th
    k = int(np.argmax(ratios))
    growing = bool(pg.size > 1 and ratios[-1] > ratios[-2] * (1 + growth_tol))
    return NormReport(pg, vals, theta_name, ratios, float(ratios[k]), float(pg[k]), growing)


# ---------------------------------------------------------------------------
# seminorms

@dataclass
class SeminormTable:
    center: object
    gamma: float
    radii: np.ndarray
    values: np.ndarray
    limit: float
    trend: str
    modulus: str = ""
    meta: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.radii.tolist(), self.values.tolist()))


def extrapolate_limit(values, spread=CONVERGED_SPREAD):
    """Estimate ``lim_{r->0}`` from values at decreasing radii.

    Returns ``(limit, trend)``. The last three values decide: a relative
    spread below ``spread`` is ``converged`` to the last value; a
    geometrically contracting decrease is ``converged`` to its Aitken
    limit (clipped at 0); otherwise ``diverging`` when increasing and
    ``oscillating`` when not monotone.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise DomainError("need at least three radii to extrapolate")
    a, b, c = v[-3:]
    top = max(abs(a), abs(b), abs(c))
    if top == 0.0:
        return 0.0, "converged"
    if (max(a, b, c) - min(a, b, c)) / top < spread:
        return float(c), "converged"
    d1, d2 = b - a, c - b
    if d1 < 0 and d2 < 0:
        q = d2 / d1
        if 0 < q < 0.8:
            lim = c - d2 * d2 / (d2 - d1)
            return float(max(lim, 0.0)), "converged"
        return float(c), "oscillating"
    if d1 > 0 and d2 > 0:
        return float(c), "diverging"
    return float(c), "oscillating"


def _check_radii(spec, grid, radii):
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < 1 or np.any(np.diff(r) >= 0):
        raise DomainError("radii must be a strictly decreasing list")
    if r[0] >= spec.m_L:
        raise DomainError(f"radii must stay below m_L = {spec.m_L}")
    if r[-1] < MIN_RADIUS_CELLS * grid.h:
        raise ResolutionError(
            f"smallest radius {r[-1]:.3g} spans fewer than {MIN_RADIUS_CELLS:g} cells (h={grid.h:.3g})"
        )
    return r


def _center_value(field_, x):
    idx = field_.grid.to_index(np.asarray(x, dtype=float))
    near = np.round(idx).astype(int)
    n = field_.grid.n
    if np.all(np.abs(idx - near) < 1e-6):
        i, j = near % n if field_.grid.periodic else near
        if 0 <= i < n and 0 <= j < n:
            v = field_.values[i, j]
            return float(v) if np.isfinite(v) else 0.0
    v = float(np.asarray(field_(np.asarray(x, dtype=float)[None]))[0])
    return v if np.isfinite(v) else 0.0


def local_seminorm(field_, spec, x, gamma, radii, center_value=None):
    """Localized seminorm table at the point ``x``.

    Only nodes ``y`` with ``|x - y| >= 2h`` enter the sup. The value
    ``f(x)`` is the node value when ``x`` is a node, an interpolated value
    otherwise, or ``center_value`` when given; a non-finite centre value is
    replaced by 0, which leaves the limit unchanged for ``gamma > 0``.
    """
    r = _check_radii(spec, field_.grid, radii)
    fx = _center_value(field_, x) if center_value is None else float(center_value)
    d = field_.grid.distance(field_.grid.points(), x)
    sel = (d >= MIN_PAIR_CELLS * field_.grid.h) & (d < r[0]) & np.isfinite(field_.values)
    d, fy = d[sel], field_.values[sel]
    ratio = np.abs(fx - fy) / mod.eval_M(spec, d) ** gamma
    order = np.argsort(d)
    d, run = d[order], np.maximum.accumulate(ratio[order])
    vals = np.empty(r.size)
    for k, rk in enumerate(r):
        m = np.searchsorted(d, rk)
        vals[k] = run[m - 1] if m > 0 else 0.0
    lim, trend = extrapolate_limit(vals) if r.size >= 3 else (float(vals[-1]), "oscillating")
    return SeminormTable(tuple(np.asarray(x, dtype=float).tolist()), float(gamma), r, vals,
                         lim, trend, spec.name)


def _shift_pairs(values, di, dj, periodic):
    if periodic:
        return values, np.roll(values, (-di, -dj), axis=(0, 1))
    n = values.shape[0]
    a = values[max(0, -di):n - max(0, di), max(0, -dj):n - max(0, dj)]
    b = values[max(0, di):n + min(0, di), max(0, dj):n + min(0, dj)]
    return a, b


def global_seminorm(field_, spec, gamma, radii):
    """Global seminorm table: sup over all node pairs with ``2h <= |x-y| < r``."""
    grid = field_.grid
    r = _check_radii(spec, grid, radii)
    kmax = int(math.ceil(r[0] / grid.h))
    dists, sups = [], []
    vals_f = np.where(np.isfinite(field_.values), field_.values, np.nan)
    for di in range(0, kmax + 1):
        for dj in range(-kmax, kmax + 1):
            if di == 0 and dj <= 0:
                continue  # each unordered offset once
            dist = math.hypot(di, dj) * grid.h
            if dist < MIN_PAIR_CELLS * grid.h or dist >= r[0]:
                continue
            a, b = _shift_pairs(vals_f, di, dj, grid.periodic)
            diff = np.abs(a - b)
            if diff.size == 0 or np.all(np.isnan(diff)):
                continue
            dists.append(dist)
            sups.append(np.nanmax(diff))
    dists = np.asarray(dists)
    ratio = np.asarray(sups) / mod.eval_M(spec, dists) ** gamma
    order = np.argsort(dists)
    dists, run = dists[order], np.maximum.accumulate(ratio[order])
    vals = np.empty(r.size)
    for k, rk in enumerate(r):
        m = np.searchsorted(dists, rk)
        vals[k] = run[m - 1] if m > 0 else 0.0
    lim, trend = extrapolate_limit(vals) if r.size >= 3 else (float(vals[-1]), "oscillating")
    return SeminormTable("global", float(gamma), r, vals, lim, trend, spec.name)


# ---------------------------------------------------------------------------
# iterated-log Lp growth on the unit disk

@dataclass(frozen=True)
class LpGrowthRow:
    p: float
    norm: float
    reference: float
    ratio: float
    log_integral: float


def _log_integrand(n, p, s):
    # |log_n(1/r)|^p r dr with s = log(1/r):  log_{n-1}(s)^p e^{-2s} ds
    f = mod.positive_iterated_log(n - 1, s)
    with np.errstate(divide="ignore"):
        return p * np.log(f) - 2.0 * s


def log_lp_integral(n, p):
    """``log( 2 pi int_0^1 log_{n,+}(1/r)^p r dr )`` computed in the log domain.

    Each logarithm is taken with positive part, so the integrand vanishes
    where ``log_n(1/r)`` would be undefined or negative.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    s0 = 0.0 if n == 1 else mod.iterated_exp(n - 2, 1.0)
    res = optimize.minimize_scalar(lambda s: -_log_integrand(n, p, s),
                                   bounds=(s0, s0 + p + 10.0), method="bounded",
                                   options={"xatol": 1e-10})
    s_star = float(res.x)
    peak = float(_log_integrand(n, p, s_star))
    if not math.isfinite(peak):
        raise NumericError("log-domain peak is not finite", {"n": n, "p": p, "s_star": s_star})

    def g(s):
        return math.exp(float(_log_integrand(n, p, s)) - peak)

    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    left, e1 = integrate.quad(g, s0, s_star, **opts)
    right, e2 = integrate.quad(g, s_star, math.inf, **opts)
    total = left + right
    if not (total > 0 and math.isfinite(total)):
        raise NumericError("log-domain quadrature overflowed", {"n": n, "p": p})
    return math.log(2.0 * math.pi) + peak + math.log(total)


def iterated_log_lp_growth(n, p_grid=DEFAULT_P_GRID):
    """Rows ``(p, ||log_n(1/|x|)||_{L^p(B_1)}, log_{n-1}(p), ratio)``.

    The reference ``log_{n-1}(p)`` uses plain iterated logs, so it can be
    zero or negative at small ``p`` for ``n >= 3``; the ratio is then
    reported as computed.
    """
    rows = []
    for p in p_grid:
        p = float(p)
        if not 1.0 <= p <= 1024.0:
            raise DomainError(f"p={p} outside [1, 1024]")
        li = log_lp_integral(n, p)
        norm = math.exp(li / p)
        try:
            ref = float(mod.iterated_log(n - 1, p))
        except DomainError:
            ref = float("nan")
        ratio = norm / ref if ref != 0.0 else float("inf")
        rows.append(LpGrowthRow(p, norm, ref, ratio, li))
    return rows


def relative_changes(rows):
    """Relative change of the ratio between consecutive rows."""
    r = np.array([row.ratio for row in rows])
    return np.abs(np.diff(r)) / np.abs(r[:-1])
