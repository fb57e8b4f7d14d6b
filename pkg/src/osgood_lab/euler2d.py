"""Pseudo-spectral 2D Euler in vorticity form on the periodic square.

The vorticity is stored as real-FFT modes on an ``n x n`` grid whose node
``(i, j)`` sits at ``(i h, j h)``. Velocities come from the Biot-Savart
law ``u = grad^perp Delta^{-1} omega`` with ``grad^perp = (-d2, d1)``, so
``omega = cos x1`` gives ``u = (0, sin x1)``. Nonlinear products are
dealiased with the 2/3 rule and time stepping is classical RK4.

Singular vortices are carried on the grid in mollified form (``M`` capped
below ``eps_m = 2 h`` by a C^2 quadratic in ``r^2``) while their centres
follow ``dphi/dt = u_r(phi)``, the velocity with the vortex's own
contribution removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import CFLError, CollisionError, DomainError, ExcludedZoneError, PreconditionError
from .fields import Grid, ScalarField2D, VectorField2D
from .modulus import ModulusSpec, eval_R_inv
from .profile import SingularProfile
from .seminorm import theta

TWO_PI = 2.0 * math.pi
CFL_LIMIT = 0.5
EPS_CELLS = 2.0
COLLISION_CELLS = 4.0
MEAN_TOL = 1e-12
DEFAULT_P = (2.0, 4.0, 8.0, 16.0)


@lru_cache(maxsize=8)
def _wavenumbers(n, length):
    m1 = np.fft.fftfreq(n, d=1.0 / n)
    m2 = np.fft.rfftfreq(n, d=1.0 / n)
    scale = TWO_PI / length
    k1 = (m1 * scale)[:, None]
    k2 = (m2 * scale)[None, :]
    ksq = k1 * k1 + k2 * k2
    inv = np.zeros_like(ksq)
    inv[ksq > 0] = 1.0 / ksq[ksq > 0]
    mask = (np.abs(m1)[:, None] < n / 3.0) & (np.abs(m2)[None, :] < n / 3.0)
    return k1, k2, ksq, inv, mask


def torus_grid(n, length=TWO_PI):
    """Grid with node ``(i, j)`` at ``(i h, j h)``."""
    return Grid(int(n), float(length), (0.5 * length, 0.5 * length), True, False)


@dataclass
class SpectralState:
    """Dealiased vorticity modes at time ``t``."""

    n: int
    w_hat: np.ndarray
    t: float = 0.0
    length: float = TWO_PI

    @classmethod
    def from_vorticity(cls, values, t=0.0, length=TWO_PI):
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        if values.shape != (n, n) or n & (n - 1):
            raise DomainError("vorticity must be a square array with a power-of-two side")
        mask = _wavenumbers(n, float(length))[4]
        return cls(n, np.fft.rfft2(values) * mask, float(t), float(length))

    @property
    def grid(self):
        return torus_grid(self.n, self.length)

    def vorticity(self):
        return np.fft.irfft2(self.w_hat, s=(self.n, self.n))

    def field(self):
        return ScalarField2D(self.grid, self.vorticity(), self.t)

    def mean(self):
        return float(self.w_hat[0, 0].real) / (self.n * self.n)

    def copy(self):
        return SpectralState(self.n, self.w_hat.copy(), self.t, self.length)


def _velocity_hat(state):
    k1, k2, _, inv, _ = _wavenumbers(state.n, state.length)
    return 1j * k2 * inv * state.w_hat, -1j * k1 * inv * state.w_hat


def _check_mean_free(state):
    scale = max(float(np.max(np.abs(state.w_hat))), 1.0)
    if abs(state.w_hat[0, 0]) > MEAN_TOL * scale * state.n:
        raise PreconditionError(
            f"vorticity mean {state.mean():.3e} is not zero; the torus Biot-Savart law needs mean-free data")


def biot_savart(state):
    """Velocity of a mean-free vorticity state, in physical space."""
    _check_mean_free(state)
    a, b = _velocity_hat(state)
    s = (state.n, state.n)
    return VectorField2D(state.grid, np.fft.irfft2(a, s=s), np.fft.irfft2(b, s=s), state.t)


def curl_hat(u1, u2, length=TWO_PI):
    """Modes of ``d1 u2 - d2 u1`` for physical velocity components."""
    n = u1.shape[0]
    k1, k2 = _wavenumbers(n, float(length))[:2]
    return 1j * k1 * np.fft.rfft2(u2) - 1j * k2 * np.fft.rfft2(u1)


def energy(state):
    """Kinetic energy ``0.5 int |u|^2``."""
    a, b = _velocity_hat(state)
    s = (state.n, state.n)
    u1, u2 = np.fft.irfft2(a, s=s), np.fft.irfft2(b, s=s)
    return 0.5 * float(np.mean(u1 * u1 + u2 * u2)) * state.length**2


def enstrophy(state):
    """``0.5 int omega^2``."""
    w = state.vorticity()
    return 0.5 * float(np.mean(w * w)) * state.length**2


def spectral_point_values(values_hat, points, n, length=TWO_PI):
    """Evaluate the trigonometric interpolant of real-FFT modes at points.

    Parameters
    ----------
    values_hat : ndarray, shape (n, n//2 + 1)
    points : array_like, shape (P, 2)
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    k1, k2 = _wavenumbers(n, float(length))[:2]
    weight = np.full(k2.shape[1], 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    e1 = np.exp(1j * np.outer(x[:, 0], k1[:, 0]))
    e2 = np.exp(1j * np.outer(x[:, 1], k2[0]))
    inner = e1 @ (values_hat * weight)
    return np.real(np.sum(inner * e2, axis=1)) / (n * n)


class EulerSolver:
    """RK4 pseudo-spectral stepper.

    Parameters
    ----------
    n : int
        Grid size (power of two).
    forcing : callable, optional
        ``f(points, t)`` returning an ``(n, n)`` array; its mean is removed.
    length : float
        Side of the periodic square.
    """

    def __init__(self, n, forcing=None, length=TWO_PI):
        if n < 8 or n & (n - 1):
            raise DomainError(f"grid size must be a power of two >= 8, got {n}")
        self.n = int(n)
        self.length = float(length)
        self.forcing = forcing
        self.grid = torus_grid(self.n, self.length)
        self._points = self.grid.points()
        self.n_steps = 0

    @property
    def h(self):
        return self.grid.h

    def _rhs(self, w_hat, t):
        k1, k2, _, inv, mask = _wavenumbers(self.n, self.length)
        s = (self.n, self.n)
        u1_hat = 1j * k2 * inv * w_hat
        u2_hat = -1j * k1 * inv * w_hat
        u1 = np.fft.irfft2(u1_hat, s=s)
        u2 = np.fft.irfft2(u2_hat, s=s)
        wx = np.fft.irfft2(1j * k1 * w_hat, s=s)
        wy = np.fft.irfft2(1j * k2 * w_hat, s=s)
        out = -np.fft.rfft2(u1 * wx + u2 * wy)
        if self.forcing is not None:
            out = out + np.fft.rfft2(np.asarray(self.forcing(self._points, t), dtype=float))
        out *= mask
        out[0, 0] = 0.0
        return out, (u1_hat, u2_hat), float(np.sqrt(np.max(u1 * u1 + u2 * u2)))

    def cfl_dt(self, state):
        """Largest admissible step ``0.5 h / max|u|``."""
        umax = biot_savart(state).max_speed()
        return math.inf if umax == 0 else CFL_LIMIT * self.h / umax

    def step(self, state, dt, centers=None, corrections=None):
        """Advance one RK4 step.

        With ``centers`` (shape ``(m, 2)``) the points are advanced with the
        same stages using the spectral velocity at each stage minus the
        fixed ``corrections``. Returns the new state, and the new centres
        when they were given.
        """
        _check_mean_free(state)
        t, w = state.t, state.w_hat
        k1w, uh1, umax = self._rhs(w, t)
        limit = math.inf if umax == 0 else CFL_LIMIT * self.h / umax
        if dt > limit * (1 + 1e-12):
            raise CFLError(f"dt={dt:.4g} exceeds the CFL limit {limit:.4g}", suggested_dt=0.9 * limit)
        track = centers is not None
        if track:
            phi = np.atleast_2d(np.asarray(centers, dtype=float))
            corr = np.zeros_like(phi) if corrections is None else np.asarray(corrections, dtype=float)

            def vel(uh, p):
                return np.stack([spectral_point_values(uh[0], p, self.n, self.length),
                                 spectral_point_values(uh[1], p, self.n, self.length)], axis=-1) - corr

            v1 = vel(uh1, phi)
        k2w, uh2, _ = self._rhs(w + 0.5 * dt * k1w, t + 0.5 * dt)
        if track:
            v2 = vel(uh2, phi + 0.5 * dt * v1)
        k3w, uh3, _ = self._rhs(w + 0.5 * dt * k2w, t + 0.5 * dt)
        if track:
            v3 = vel(uh3, phi + 0.5 * dt * v2)
        k4w, uh4, _ = self._rhs(w + dt * k3w, t + dt)
        new = SpectralState(self.n, w + dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w), t + dt, self.length)
        self.n_steps += 1
        if not track:
            return new
        v4 = vel(uh4, phi + dt * v3)
        return new, phi + dt / 6.0 * (v1 + 2 * v2 + 2 * v3 + v4)

    def run(self, state, T, dt, callback=None):
        """Step to time ``T`` with steps of at most ``dt``; ``callback(state)``
        is called after every step."""
        n_steps = max(1, int(math.ceil((T - state.t) / dt - 1e-9)))
        h = (T - state.t) / n_steps
        for _ in range(n_steps):
            state = self.step(state, h)
            if callback is not None:
                callback(state)
        return state


# ---------------------------------------------------------------------------
# singular vortices


def loglog_vortex(center, gamma=1.0, radius=math.pi / 4, shape="identity", shape_param=1.0,
                  modulus=None):
    """Profile ``gamma F(M(r / rho))`` with ``rho`` chosen so that ``M = 1``
    exactly at ``r = radius``, the edge of its support."""
    spec = modulus or ModulusSpec.log_lipschitz()
    rho = radius / float(eval_R_inv(spec, math.exp(-1.0)))
    return SingularProfile(center, spec, gamma=gamma, shape=shape, shape_param=shape_param,
                           r_cut=0.5 * radius, r_end=radius, scale=rho)


@dataclass
class VortexSystem:
    """Singular vortices plus a bounded background.

    The vorticity is ``sum_i profile_i(|x - phi_i|) + b`` with the vortex
    strength stored as ``profile.gamma``. ``background`` is ``None``, an
    ``(n, n)`` array, or a callable on ``(..., 2)`` point arrays.
    """

    vortices: list
    background: object = None
    length: float = TWO_PI
    centers: np.ndarray = None
    trajectory: list = field(default_factory=list)

    def __post_init__(self):
        if self.centers is None:
            self.centers = np.array([p.center for p in self.vortices], dtype=float).reshape(-1, 2)
        limit = self.length / 8.0
        for p in self.vortices:
            if p.r_end > limit * (1 + 1e-12):
                raise DomainError(f"profile support {p.r_end:.4g} exceeds {limit:.4g} (a quarter of the half-period)")
        c = self.centers
        for i in range(len(c)):
            for j in range(i):
                if _torus_distance(c[i], c[j], self.length) == 0:
                    raise DomainError("vortex centres must be distinct")

    @property
    def strengths(self):
        return np.array([p.gamma for p in self.vortices])

    def background_values(self, grid):
        if self.background is None:
            return np.zeros((grid.n, grid.n))
        if callable(self.background):
            return np.asarray(self.background(grid.points()), dtype=float)
        return np.asarray(self.background, dtype=float)

    def distances(self, grid, centers=None):
        centers = self.centers if centers is None else centers
        pts = grid.points()
        return [grid.distance(pts, c) for c in centers]

    def singular_part(self, grid, centers=None, eps=None):
        """Sum of profiles about the given centres; mollified when ``eps`` is set."""
        out = np.zeros((grid.n, grid.n))
        for p, r in zip(self.vortices, self.distances(grid, centers)):
            out += p.radial(r) if eps is None else p.mollified(r, eps)
        return out

    def initial_vorticity(self, grid, eps):
        """Grid vorticity at t = 0 and the mean-compensated background."""
        sing = self.singular_part(grid, eps=eps)
        b0 = self.background_values(grid)
        total = sing + b0
        mean = float(np.mean(total))
        return total - mean, b0 - mean


def _torus_distance(a, b, length):
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d - length * np.round(d / length)
    return float(np.hypot(d[0], d[1]))


def _single_vortex_hat(profile, grid, center, eps):
    w = profile.mollified(grid.distance(grid.points(), center), eps)
    state = SpectralState.from_vorticity(w - np.mean(w), length=grid.length)
    return state, _velocity_hat(state)


def self_velocity_corrections(system, n, eps):
    """Spectral velocity of each mollified vortex alone at its own centre.

    By radial symmetry the exact value is zero; what remains is the grid
    sampling and dealiasing error, measured once and subtracted from the
    centre velocities.
    """
    grid = torus_grid(n, system.length)
    out = np.zeros((len(system.vortices), 2))
    for j, (p, c) in enumerate(zip(system.vortices, system.centers)):
        _, (a, b) = _single_vortex_hat(p, grid, c, eps)
        out[j] = [spectral_point_values(a, c, n, system.length)[0],
                  spectral_point_values(b, c, n, system.length)[0]]
    return out


def theta_norm_on_ball(theta_name, p, radius):
    """``|| Theta(log(1/|x|)) ||_{L^p(B_radius)}``, with the argument of
    Theta clamped below at ``e^e`` so that every choice is at least 1."""
    floor = math.exp(math.e)

    def g(r):
        arg = max(math.log(1.0 / r), floor) if r > 0 else math.inf
        return float(theta(theta_name, arg)) ** p * r

    r_switch = min(radius, math.exp(-floor))
    head, _ = integrate.quad(g, 0.0, r_switch, limit=200)
    tail, _ = integrate.quad(g, r_switch, radius, limit=200) if radius > r_switch else (0.0, 0.0)
    return (TWO_PI * (head + tail)) ** (1.0 / p)


def remainder_source(profile, center, u_r, x, h, forcing=0.0):
    """Source ``g`` of the remainder equation ``d_t b + u . grad b = g``.

    ``g(x) = (u_r(phi) - u_r(x)) . (x - phi)/|x - phi| * P'(|x - phi|) + f``
    where ``P`` is the radial profile (``P' = gamma F'(M) M'`` inside the
    cutoff radius).

    Parameters
    ----------
    profile : SingularProfile
    center : array_like
        Current centre ``phi``.
    u_r : callable
        Regular velocity, ``u_r(points) -> (..., 2)``.
    x : array_like, shape (..., 2)
    h : float
        Grid spacing; points within ``2 h`` of the centre are rejected.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(center, dtype=float)
    d = x - c
    r = np.hypot(d[..., 0], d[..., 1])
    if np.any(r < 2 * h):
        raise ExcludedZoneError(f"point within {2 * h:.3g} of a singular centre")
    du = np.asarray(u_r(c[None]), dtype=float).reshape(2) - np.asarray(u_r(x), dtype=float)
    radial = (du[..., 0] * d[..., 0] + du[..., 1] * d[..., 1]) / r
    return radial * profile.radial_derivative(r) + forcing


def _lp(values, p, area):
    a = np.abs(values)
    top = float(a.max()) if a.size else 0.0
    if math.isinf(p) or top == 0.0:
        return top
    return top * float(np.sum((a / top) ** p) * area) ** (1.0 / p)


@dataclass
class MonitorRow:
    t: float
    centers: np.ndarray
    sup_b: float
    l1_b: float
    lp_b: dict
    yudovich: float
    source_const: float
    ur_lip: float
    max_g: float
    energy: float
    enstrophy: float
    drift_l2: float


@dataclass
class EulerRun:
    """Output of :func:`run_singular_vortex`."""

    times: np.ndarray
    center_path: np.ndarray
    monitors: list
    state: SpectralState
    system: VortexSystem
    b0_norms: dict
    eps: float
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(m, name) for m in self.monitors])

    def norm_rows(self):
        rows = []
        for m in self.monitors:
            row = {"t": m.t, "sup_b": m.sup_b, "l1_b": m.l1_b}
            row.update({f"lp_{int(p)}": v for p, v in m.lp_b.items()})
            row.update(yudovich=m.yudovich, source_const=m.source_const, ur_lip=m.ur_lip,
                       max_g=m.max_g, energy=m.energy, enstrophy=m.enstrophy, drift_l2=m.drift_l2)
            rows.append(row)
        return rows

    def center_rows(self):
        rows = []
        for t, c in zip(self.times, self.center_path):
            row = {"t": float(t)}
            for j, (a, b) in enumerate(c):
                row[f"x{j}"], row[f"y{j}"] = float(a), float(b)
            rows.append(row)
        return rows

    def bound_check(self, theta_name="const", p_grid=DEFAULT_P, slack=0.1):
        """Rows ``(t, p, lhs, rhs, passed)`` of the L^p remainder bound.

        ``rhs = ||b0||_p + t C(t) sum_j ||Theta(log 1/|.|)||_{L^p(B_j)} (1 + slack)``
        with ``C(t)`` the running max of the measured source constant.
        """
        radii = [p.r_end for p in self.system.vortices]
        out = []
        c_run = 0.0
        for m in self.monitors:
            c_run = max(c_run, m.source_const)
            for p in p_grid:
                weight = sum(theta_norm_on_ball(theta_name, p, r) for r in radii)
                rhs = self.b0_norms[p] + m.t * c_run * weight * (1 + slack)
                out.append((m.t, p, m.lp_b[p], rhs, bool(m.lp_b[p] <= rhs)))
        return out


def _monitor(system, solver, state, centers, eps, corrections, w_ref, p_grid, theta_name):
    grid = solver.grid
    n, length = solver.n, solver.length
    area = grid.cell_area
    w = state.vorticity()
    dists = system.distances(grid, centers)
    keep = np.ones((n, n), dtype=bool)
    for r in dists:
        keep &= r >= 2 * eps
    analytic = np.zeros((n, n))
    for p, r in zip(system.vortices, dists):
        analytic += p.radial(np.maximum(r, 2 * eps))
    b = (w - analytic)[keep]
    lp = {p: _lp(b, p, area) for p in p_grid}
    sup_b = _lp(b, math.inf, area)
    ratios = [lp[p] / float(theta(theta_name, p)) for p in p_grid]
    a, bb = _velocity_hat(state)
    s = (n, n)
    u1, u2 = np.fft.irfft2(a, s=s), np.fft.irfft2(bb, s=s)
    floor = math.exp(math.e)
    source_const = ur_lip = max_g = 0.0
    for j, (p, c, r) in enumerate(zip(system.vortices, centers, dists)):
        _, (sa, sb) = _single_vortex_hat(p, grid, c, eps)
        r1, r2 = u1 - np.fft.irfft2(sa, s=s), u2 - np.fft.irfft2(sb, s=s)
        c0 = np.array([spectral_point_values(a - sa, c, n, length)[0],
                       spectral_point_values(bb - sb, c, n, length)[0]])
        ann = (r >= 2 * eps) & (r < p.r_end)
        if not ann.any():
            continue
        d = grid.displacement(grid.points()[ann], c)
        rr = r[ann]
        du1, du2 = c0[0] - r1[ann], c0[1] - r2[ann]
        g = (du1 * d[:, 0] + du2 * d[:, 1]) / rr * p.radial_derivative(rr)
        th = theta(theta_name, np.maximum(np.log(1.0 / rr), floor))
        source_const = max(source_const, float(np.max(np.abs(g) / th)))
        inner = rr < p.r_cut
        if inner.any():
            lb = rr[inner] * (1.0 + np.log(1.0 / rr[inner]))
            ur_lip = max(ur_lip, float(np.max(np.hypot(du1[inner], du2[inner]) / lb)))
            max_g = max(max_g, float(np.max(np.abs(g[inner]))))
    drift = float(np.linalg.norm(w - w_ref) / max(np.linalg.norm(w_ref), 1e-300))
    return MonitorRow(state.t, np.array(centers, dtype=float), sup_b, _lp(b, 1.0, area), lp,
                      float(max(ratios)), source_const, ur_lip, max_g, energy(state),
                      enstrophy(state), drift)


def run_singular_vortex(system, T, dt, n=256, monitor_every=10, p_grid=DEFAULT_P,
                        theta_name="const", forcing=None, eps_cells=EPS_CELLS, on_monitor=None):
    """Evolve a vortex system with the field and centres sharing RK4 stages.

    Parameters
    ----------
    system : VortexSystem
    T, dt : float
        Final time and (maximal) step; the step is shrunk to hit ``T``.
    n : int
        Grid size.
    monitor_every : int
        Steps between remainder diagnostics (t = 0 and t = T always monitored).
    theta_name : str
        Growth function used for Yudovich ratios and the source constant.
    eps_cells : float
        Mollification scale in grid cells (at least 2).

    Returns
    -------
    EulerRun
    """
    if eps_cells < 2.0:
        raise DomainError("profiles must be mollified at >= 2 grid cells")
    solver = EulerSolver(n, forcing=forcing, length=system.length)
    grid = solver.grid
    eps = eps_cells * grid.h
    w0, _ = system.initial_vorticity(grid, eps)
    state = SpectralState.from_vorticity(w0, length=system.length)
    corrections = self_velocity_corrections(system, n, eps)
    centers = system.centers.copy()
    w_ref = state.vorticity()
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n_steps
    times = [0.0]
    path = [centers.copy()]
    monitors = [_monitor(system, solver, state, centers, eps, corrections, w_ref, p_grid, theta_name)]
    # the dealiased initial remainder is the data actually evolved
    b0_norms = dict(monitors[0].lp_b)
    b0_norms[math.inf] = monitors[0].sup_b
    if on_monitor:
        on_monitor(monitors[-1], state)
    for k in range(1, n_steps + 1):
        state, centers = solver.step(state, h, centers, corrections)
        centers = np.mod(centers, system.length)
        times.append(state.t)
        path.append(centers.copy())
        if len(centers) > 1:
            sep = min(_torus_distance(centers[i], centers[j], system.length)
                      for i in range(len(centers)) for j in range(i))
            if sep < COLLISION_CELLS * grid.h:
                raise CollisionError(f"centres within {sep:.3g} < {COLLISION_CELLS} cells at t={state.t:.4g}",
                                     {"t": state.t, "centers": centers.tolist(), "separation": sep})
        if k % monitor_every == 0 or k == n_steps:
            monitors.append(_monitor(system, solver, state, centers, eps, corrections, w_ref,
                                     p_grid, theta_name))
            if on_monitor:
                on_monitor(monitors[-1], state)
    final = VortexSystem([p.moved(c) for p, c in zip(system.vortices, centers)], None,
                         system.length, centers.copy(), [np.array(path)])
    meta = {"n": n, "dt": h, "steps": n_steps, "eps_m": eps, "dealias": "2/3 rule",
            "theta": theta_name, "corrections": corrections.tolist()}
    return EulerRun(np.array(times), np.array(path), monitors, state, final, b0_norms, eps, meta)


# ---------------------------------------------------------------------------
# oracles and experiments


def reduced_vortex_ode(system, T, n_out=200, eps=None, rtol=1e-10):
    """Centre dynamics driven only by the other vortices.

    Each vortex ``i`` acts on ``phi_j`` through the exact velocity of its
    radial profile (nearest periodic image) plus the solid-body term
    ``-Gamma_i (x - phi_i)^perp / (2 A)`` of the uniform compensating
    background on the torus of area ``A``.
    """
    from .flow import RadialVortex

    if eps is not None:
        profiles = [_MollifiedView(p, eps) for p in system.vortices]
    else:
        profiles = system.vortices
    rv = [RadialVortex(p) for p in profiles]
    area = system.length**2
    gam = np.array([v.circulation for v in rv])
    m = len(rv)

    def rhs(t, y):
        phi = y.reshape(m, 2)
        out = np.zeros_like(phi)
        for j in range(m):
            for i in range(m):
                if i == j:
                    continue
                d = phi[j] - phi[i]
                d = d - system.length * np.round(d / system.length)
                r = math.hypot(d[0], d[1])
                w = float(rv[i].angular_velocity(r)) - gam[i] / (2 * area)
                out[j] += w * np.array([-d[1], d[0]])
        return out.ravel()

    ts = np.linspace(0.0, T, n_out)
    sol = integrate.solve_ivp(rhs, (0.0, T), system.centers.ravel(), t_eval=ts,
                              rtol=rtol, atol=rtol, method="DOP853")
    return sol.t, sol.y.T.reshape(-1, m, 2)


@dataclass(frozen=True)
class _MollifiedView:
    """Profile adaptor exposing the mollified radial function."""

    base: SingularProfile
    eps: float

    @property
    def center(self):
        return self.base.center

    @property
    def r_end(self):
        return self.base.r_end

    def radial(self, r):
        return self.base.mollified(r, self.eps)

    def describe(self):
        return dict(self.base.describe(), eps=self.eps)


def pair_angle(path, length=TWO_PI):
    """Unwrapped angle of ``phi_1 - phi_0`` along a centre path ``(T, 2, 2)``."""
    d = path[:, 1] - path[:, 0]
    d = d - length * np.round(d / length)
    return np.unwrap(np.arctan2(d[:, 1], d[:, 0]))


def rotation_period(times, path, length=TWO_PI):
    """Period from a least-squares fit of the pair angle against time."""
    ang = pair_angle(np.asarray(path), length)
    slope = np.polyfit(np.asarray(times), ang, 1)[0]
    return math.inf if slope == 0 else TWO_PI / abs(slope)


def two_vortex_system(d=math.pi / 4, gamma=2.25, radius=0.2, center=(math.pi, math.pi)):
    """Two equal loglog vortices a distance ``d`` apart along ``x1``.

    The default support radius ``0.2`` keeps each vortex compact next to
    ``d``; with wider, weakly held skirts the partner's strain peels
    vorticity off and the pair rotates measurably faster than two rigid
    vortices would.
    """
    c = np.asarray(center, dtype=float)
    off = np.array([0.5 * d, 0.0])
    return VortexSystem([loglog_vortex(c - off, gamma, radius), loglog_vortex(c + off, gamma, radius)])


def patch_background(center, half_width=0.4, edge=0.08, amplitude=1.0, length=TWO_PI):
    """Smoothed square patch ``amplitude`` on ``|x - center|_inf < half_width``."""
    c = np.asarray(center, dtype=float)

    def b(x):
        d = np.asarray(x, dtype=float) - c
        d = d - length * np.round(d / length)
        s1 = 0.5 * (1 - np.tanh((np.abs(d[..., 0]) - half_width) / edge))
        s2 = 0.5 * (1 - np.tanh((np.abs(d[..., 1]) - half_width) / edge))
        return amplitude * s1 * s2

    return b


def sign_background(center, width, length=TWO_PI):
    """``tanh``-smoothed ``sgn(x1 - c1) sgn(x2 - c2)`` made periodic via ``sin``."""
    c = np.asarray(center, dtype=float)
    k = TWO_PI / length

    def b(x):
        x = np.asarray(x, dtype=float)
        s1 = np.tanh(np.sin(k * (x[..., 0] - c[0])) / (k * width))
        s2 = np.tanh(np.sin(k * (x[..., 1] - c[1])) / (k * width))
        return s1 * s2

    return b


def breakdown_system(center=(math.pi, math.pi), radius=math.pi / 4, gamma=1.0, width=None, n=256,
                     with_background=True):
    """``gamma * M log M`` vortex (``M = log log``) plus the smoothed sign field.

    ``width`` defaults to three grid cells of an ``n`` grid.
    """
    prof = loglog_vortex(center, gamma, radius, shape="zlogz")
    bg = None
    if with_background:
        bg = sign_background(center, 3.0 * TWO_PI / n if width is None else width)
    return VortexSystem([prof], bg)


def breakdown_experiment(T=1.0, dt=None, n=256, monitor_every=10, theta_name="log*loglog",
                         with_background=True):
    """Evolve the breakdown candidate and return its :class:`EulerRun`.

    No bound is asserted: the sup and Yudovich series are the output.
    """
    system = breakdown_system(n=n, with_background=with_background)
    if dt is None:
        dt = 0.25 * TWO_PI / n
    return run_singular_vortex(system, T, dt, n=n, monitor_every=monitor_every,
                               p_grid=(2.0, 4.0, 8.0, 16.0, 32.0, 64.0), theta_name=theta_name)
