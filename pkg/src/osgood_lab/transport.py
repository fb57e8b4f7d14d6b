"""Semi-Lagrangian linear transport and singular-structure remainders.

The solution of ``d_t theta + u . grad theta = 0`` is the pullback
``theta(x, t) = theta_0(phi^{-1}(x, t))``. Every grid node is traced back
to time 0 and the initial data are evaluated there, so a singular profile
is never interpolated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import modulus as mod
from .errors import DomainError, IntegrationError, ResolutionError
from .fields import Grid, ScalarField2D
from .flow import Hyperbolic, flow_map, inverse_flow, BahouriChemin
from .profile import SingularProfile
from .seminorm import SeminormTable, local_seminorm

EXCLUDED_CELLS = 2.0
MIN_VALID_CELLS = 8.0


class InitialData:
    """``theta_0 = profile + background``; either part may be absent.

    ``background`` is a callable on points ``(..., 2)`` or a
    :class:`ScalarField2D` (then interpolated).
    """

    def __init__(self, profile=None, background=None):
        self.profile = profile
        self.background = background

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        if self.profile is not None:
            out = out + self.profile(x)
        if self.background is not None:
            out = out + np.asarray(self.background(x), dtype=float)
        return out


def _as_initial(theta0):
    if isinstance(theta0, (InitialData, ScalarField2D)) or callable(theta0):
        return theta0
    raise DomainError("theta0 must be InitialData, a ScalarField2D or a callable")


def _fill_from_neighbors(values, bad):
    if not bad.any():
        return values
    _, idx = ndimage.distance_transform_edt(bad, return_indices=True)
    return values[tuple(idx)]


def pullback(u, theta0, points, t, tol=1e-10, max_step=None, chunk=None):
    """``theta_0(phi^{-1}(x, t))`` at arbitrary points.

    Returns ``(values, failed)`` where ``failed`` flags points whose
    back-trajectory could not be integrated (values there are NaN).
    """
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    out = np.full(flat.shape[0], np.nan)
    failed = np.zeros(flat.shape[0], dtype=bool)
    if t == 0:
        return np.asarray(theta0(pts), dtype=float), failed.reshape(pts.shape[:-1])
    step = chunk or flat.shape[0]
    for a in range(0, flat.shape[0], step):
        sl = slice(a, a + step)
        try:
            back = inverse_flow(u, flat[sl], t, tol=tol, max_step=max_step)
        except IntegrationError:
            if step > 256:
                sub, bad = pullback(u, theta0, flat[sl], t, tol, max_step, chunk=max(step // 8, 256))
                out[sl], failed[sl] = sub, bad
            else:
                failed[sl] = True
            continue
        out[sl] = theta0(back)
    failed |= ~np.isfinite(out) & ~np.isinf(out)
    shape = pts.shape[:-1]
    return out.reshape(shape), failed.reshape(shape)


def solve_transport(u, theta0, t, grid, tol=1e-10, max_step=None, region=None):
    """Transported field on ``grid`` at time ``t``.

    Parameters
    ----------
    region : tuple, optional
        ``(center, radius)``: only nodes in this disk are computed, the
        rest are NaN.

    Nodes whose back-trajectory fails are filled from the nearest valid
    node; their count is stored in ``meta["failed_nodes"]``.
    """
    theta0 = _as_initial(theta0)
    pts = grid.points()
    values = np.full((grid.n, grid.n), np.nan)
    if region is None:
        mask = np.ones((grid.n, grid.n), dtype=bool)
    else:
        mask = grid.distance(pts, region[0]) < region[1]
    vals, failed = pullback(u, theta0, pts[mask], t, tol=tol, max_step=max_step)
    values[mask] = vals
    bad = np.zeros_like(mask)
    bad[mask] = failed
    if bad.any():
        filled = _fill_from_neighbors(np.where(bad, np.nan, values), bad | ~mask)
        values = np.where(bad, filled, values)
    return ScalarField2D(grid, values, float(t), {"failed_nodes": int(bad.sum())})


# ---------------------------------------------------------------------------
# remainder bound

def select_r0(spec, mu, safety=0.9):
    """Largest ``r`` with ``M(r) > 1`` and ``M(R^{-1}(mu R(r))) > 1``, times ``safety``.

    Both conditions reduce to ``R(r) < e^{-1} / mu``.
    """
    if mu < 1:
        raise DomainError("growth factor must be >= 1")
    return safety * float(mod.eval_R_inv(spec, math.exp(-1.0) / mu))


def valid_radius(spec, mu, r):
    """``R^{-1}(R(r) / mu)``: the image of ``B_r`` under the flow contains this ball."""
    return float(mod.eval_R_inv(spec, float(mod.eval_R(spec, r)) / mu))


@dataclass
class RemainderRecord:
    t: float
    r: float
    r_valid: float
    sup_b: float
    b0_sup: float
    F_slope: float
    log_mu: float
    bound: float
    margin: float
    passed: bool
    excluded_radius: float
    n_points: int
    sign_changes: int | None = None
    meta: dict = field(default_factory=dict)

    def as_dict(self):
        return dict(self.__dict__)


def measure_b0_sup(theta0, profile, r, n_radii=400, n_angles=256, r_min_rel=1e-9):
    """``sup |theta_0 - gamma F(M(|x - x0|))|`` on ``B_r(x0)`` from a polar sample."""
    rad = np.geomspace(r_min_rel * r, r, n_radii)
    ang = np.linspace(0, 2 * math.pi, n_angles, endpoint=False)
    R, A = np.meshgrid(rad, ang, indexing="ij")
    pts = np.asarray(profile.center) + np.stack([R * np.cos(A), R * np.sin(A)], axis=-1)
    b = np.asarray(theta0(pts)) - profile.structure(R)
    return float(np.max(np.abs(b)))


def _sign_changes(profile, r_lo, r_hi):
    if profile.shape != "sin":
        return None
    lam = profile.shape_param
    hi = lam * float(profile.M(r_lo)) / math.pi
    lo = lam * float(profile.M(r_hi)) / math.pi
    return int(math.floor(hi) - math.floor(lo))


def extract_remainder(theta, profile, center_t, mu, r, b0_sup, bound_slack=0.0):
    """Remainder ``b = theta - gamma F(M(|x - center_t|))`` on the valid ball.

    Parameters
    ----------
    theta : ScalarField2D
        Transported field (NaN outside the computed region is allowed).
    mu : GrowthFactor
    r : float
        Initial ball radius; the valid radius is ``R^{-1}(R(r) / mu)``
        in the profile's scaled coordinates.
    b0_sup : float
        ``||b_0||_inf`` on ``B_r(x0)``.
    bound_slack : float
        Relative slack applied to the ``[F] log mu`` term in ``passed``.

    Nodes closer than two cells to ``center_t`` are excluded.
    """
    s = profile.scale
    r_valid = s * valid_radius(profile.modulus, mu.mu, r / s)
    h = theta.grid.h
    if r_valid < MIN_VALID_CELLS * h:
        raise ResolutionError(f"valid radius {r_valid:.3g} spans fewer than 8 cells (h={h:.3g})")
    d = theta.grid.distance(theta.grid.points(), center_t)
    sel = (d >= EXCLUDED_CELLS * h) & (d < r_valid) & np.isfinite(theta.values)
    b = np.full(theta.values.shape, np.nan)
    b[sel] = theta.values[sel] - profile.structure(d[sel])
    sup_b = float(np.max(np.abs(b[sel]))) if sel.any() else 0.0
    growth = profile.F_slope * mu.log_mu if mu.log_mu > 0 else 0.0
    bound = b0_sup + growth
    margin = b0_sup + growth * (1 + bound_slack) - sup_b
    rec = RemainderRecord(
        t=mu.t, r=float(r), r_valid=r_valid, sup_b=sup_b, b0_sup=float(b0_sup),
        F_slope=profile.F_slope, log_mu=mu.log_mu, bound=bound, margin=margin,
        passed=bool(margin >= -1e-12 * max(1.0, bound)),
        excluded_radius=EXCLUDED_CELLS * h, n_points=int(sel.sum()),
        sign_changes=_sign_changes(profile, EXCLUDED_CELLS * h, r_valid),
    )
    return ScalarField2D(theta.grid, b, theta.time), rec


def local_structure_run(u, profile, background, t, n=256, tol=1e-12, C=None, r=None,
                        bound_slack=0.05):
    """Transport ``profile + background`` and check the remainder bound.

    ``C`` bounds ``||u||_L`` for the profile's modulus (default
    ``u.modulus_constant``); ``r`` defaults to :func:`select_r0`, clipped
    to the profile's untapered core.
    """
    spec = profile.modulus
    C = u.modulus_constant(spec) if C is None else C
    mu = mod.mu_factor(mod.modulus_integral(C, t), t)
    s = profile.scale
    if r is None:
        r = min(s * select_r0(spec, mu.mu), profile.r_cut)
    theta0 = InitialData(profile, background)
    b0_sup = measure_b0_sup(theta0, profile, r)
    center_t = flow_map(u, np.asarray(profile.center, dtype=float), t, tol=tol)
    r_valid = s * valid_radius(spec, mu.mu, r / s)
    grid = Grid.box(center_t, 1.05 * r_valid, n)
    theta = solve_transport(u, theta0, t, grid, tol=tol, region=(center_t, r_valid))
    _, rec = extract_remainder(theta, profile, center_t, mu, r, b0_sup, bound_slack)
    rec.meta.update({"center_t": center_t.tolist(), "lint": mu.lint, "mu": mu.mu,
                     "field": u.describe(), "profile": profile.describe(),
                     "failed_nodes": theta.meta["failed_nodes"], "n": n})
    return rec


# ---------------------------------------------------------------------------
# seminorm propagation

@dataclass
class SeminormComparison:
    initial: SeminormTable
    transported: SeminormTable
    mapped_radii: np.ndarray
    bracket_low: np.ndarray
    bracket_high: np.ndarray
    mu: float
    agreement: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.agreement <= self.tolerance)


def seminorm_transport_check(u, spec, theta0, x, gamma, t, radii, n=1024, tol=1e-12, C=None,
                             tolerance=0.10, center_value=None):
    """Local seminorm of ``theta_0`` at ``x`` against that of ``theta(t)`` at ``phi(x, t)``.

    The transported table uses the radii ``R^{-1}(R(r_k) / mu)``, the
    largest balls guaranteed to lie in the image of ``B_{r_k}(x)``. The
    per-radius bracket ``(1 -+ log mu / M(r'_k))^gamma`` is reported.

    ``center_value`` is used as ``theta(x, 0) = theta(phi(x, t), t)`` in
    both tables. It defaults to 0 when ``theta0`` carries a profile centred
    at ``x`` (the value there is infinite), and to ``theta0(x)`` otherwise.
    """
    radii = np.asarray(radii, dtype=float)
    x = np.asarray(x, dtype=float)
    C = u.modulus_constant(spec) if C is None else C
    mu = mod.mu_factor(mod.modulus_integral(C, t), t)
    if center_value is None:
        prof = getattr(theta0, "profile", None)
        if prof is not None and np.allclose(prof.center, x, rtol=0, atol=1e-15):
            center_value = 0.0
        else:
            center_value = float(np.asarray(theta0(x[None]))[0])
    g0 = Grid.box(x, 1.02 * radii[0], n)
    f0 = solve_transport(u, theta0, 0.0, g0, region=(x, radii[0]))
    tab0 = local_seminorm(f0, spec, x, gamma, radii, center_value=center_value)
    c = flow_map(u, x, t, tol=tol)
    mapped = np.array([valid_radius(spec, mu.mu, rk) for rk in radii])
    g1 = Grid.box(c, 1.02 * mapped[0], n)
    f1 = solve_transport(u, theta0, t, g1, tol=tol, region=(c, mapped[0]))
    tab1 = local_seminorm(f1, spec, c, gamma, mapped, center_value=center_value)
    Mr = np.asarray(mod.eval_M(spec, mapped))
    low = np.clip(1 - mu.log_mu / Mr, 0, None) ** gamma
    high = (1 + mu.log_mu / Mr) ** gamma
    ref = abs(tab0.limit)
    agreement = abs(tab1.limit - tab0.limit) / ref if ref > 0 else abs(tab1.limit)
    return SeminormComparison(tab0, tab1, mapped, low, high, mu.mu, float(agreement), tolerance)


# ---------------------------------------------------------------------------
# sharpness

@dataclass
class DivergenceTable:
    kind: str
    shape: str
    t: float
    radii: np.ndarray
    M: np.ndarray
    sup_b: np.ndarray
    slope: float
    intercept: float
    min_ratio: float
    meta: dict = field(default_factory=dict)

    def rows(self):
        return [
            {"r": float(r), "log_inv_r": float(-math.log(r)), "M": float(m), "sup_b": float(b)}
            for r, m, b in zip(self.radii, self.M, self.sup_b)
        ]


DEFAULT_SHARPNESS_RADII = tuple(2.0 ** -k for k in range(4, 11))


def sharpness_experiment(kind, shape="square", t=1.0, radii=DEFAULT_SHARPNESS_RADII, K=64,
                         n_angles=720, ring_width=0.02, n_rings=3, tol=1e-11):
    """Remainder growth for superlinear outer shapes at a fixed stagnation point.

    ``kind`` is ``lipschitz_superlinear`` (hyperbolic field, ``M = log(1/r)``)
    or ``loglipschitz_superlinear`` (truncated Bahouri-Chemin field,
    ``M = log log(1/r)``). The profile sits at the origin, which both
    fields fix, so ``b(y, t) = F(M(|phi^{-1}(y)|)) - F(M(|y|))``. For each
    radius the sup of ``|b|`` over a thin ring ``r (1 +- ring_width)``
    is recorded, and ``sup|b|`` is fitted linearly against ``log(1/r)``.
    """
    if kind == "lipschitz_superlinear":
        spec, u = mod.ModulusSpec.lipschitz(), Hyperbolic()
        r_cut, r_end = 0.5, 0.9
    elif kind == "loglipschitz_superlinear":
        spec, u = mod.ModulusSpec.log_lipschitz(), BahouriChemin(K)
        r_cut, r_end = 0.2, 0.3
    else:
        raise DomainError(f"unknown sharpness kind {kind!r}")
    radii = np.asarray(radii, dtype=float)
    if radii.max() * (1 + ring_width) >= r_cut:
        raise DomainError(f"radii must stay inside the profile core r < {r_cut}")
    prof = SingularProfile((0.0, 0.0), spec, shape=shape, r_cut=r_cut, r_end=r_end)
    ang = np.linspace(0, 2 * math.pi, n_angles, endpoint=False)
    rel = np.linspace(1 - ring_width, 1 + ring_width, n_rings)
    R = radii[:, None, None] * rel[None, :, None]
    A = np.broadcast_to(ang, R.shape[:2] + (n_angles,))
    R = np.broadcast_to(R, A.shape)
    pts = np.stack([R * np.cos(A), R * np.sin(A)], axis=-1)
    vals, failed = pullback(u, InitialData(prof), pts, t, tol=tol)
    b = np.abs(vals - prof.structure(R))
    b[failed] = np.nan
    sup_b = np.nanmax(b.reshape(radii.size, -1), axis=1)
    Mr = np.asarray(mod.eval_M(spec, radii))
    slope, intercept = np.polyfit(-np.log(radii), sup_b, 1)
    return DivergenceTable(kind, shape, float(t), radii, Mr, sup_b, float(slope), float(intercept),
                           float(np.min(sup_b / Mr)),
                           {"field": u.describe(), "n_angles": n_angles, "ring_width": ring_width})
