"""Stability experiments: Sobolev interpolation, light cones, log-Gronwall bounds."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import erfc

from .errors import DomainError, PreconditionError
from . import euler2d as E

VIOLATION_RTOL = 1e-12
FRONT_THRESHOLD = 1e-6
MIN_EPS_CELLS = 8.0


# ---------------------------------------------------------------------------
# interpolation inequality


def _hs_weights(n, length=E.TWO_PI):
    k1, k2, ksq, _, _ = E._wavenumbers(n, float(length))
    mult = np.full(k2.shape[1], 2.0)
    mult[0] = 1.0
    if n % 2 == 0:
        mult[-1] = 1.0
    return ksq, np.broadcast_to(mult, ksq.shape)


def homogeneous_norms(f_hat, exponents, n, length=E.TWO_PI):
    """Physical ``|f|_{H^s}`` for each ``s`` in ``exponents``.

    ``f_hat`` holds real-FFT modes with shape ``(..., n, n//2 + 1)``; the
    conjugate half of the spectrum is accounted for by weights and the
    result is scaled by Parseval so ``s = 0`` gives the L2 norm on the box.
    """
    ksq, mult = _hs_weights(n, length)
    power = np.abs(f_hat) ** 2 * mult * (length / n**2) ** 2
    out = []
    with np.errstate(divide="ignore"):
        logk = np.where(ksq > 0, 0.5 * np.log(ksq), -np.inf)
    for s in exponents:
        if s == 0:
            w = np.ones_like(ksq)
        else:
            w = np.where(ksq > 0, np.exp(2 * s * logk), 0.0)
        out.append(np.sqrt(np.sum(power * w, axis=(-2, -1))))
    return out


def _check_band(f_hat, n, s, k_max, length):
    mask = E._wavenumbers(n, float(length))[4]
    top = float(np.max(np.abs(f_hat))) if f_hat.size else 0.0
    if top > 0 and np.max(np.abs(f_hat[..., ~mask])) > 1e-12 * top:
        raise DomainError("field is not band-limited to the dealiased band")
    kmax = (n // 3) * E.TWO_PI / length * math.sqrt(2)
    if kmax > 1 and 2 ** (k_max + 1) * s * math.log10(kmax) > 280:
        raise DomainError(f"2^{k_max} s = {2**k_max * s:g} is too large for an n={n} band (overflow)")


@dataclass
class InterpolationRow:
    k: int
    lhs: np.ndarray
    rhs: np.ndarray
    slack: np.ndarray
    violations: int


def sobolev_interpolation_check(f, s, k_max=4, length=E.TWO_PI):
    """Check ``|f|_{H^s} <= |f|_{H^{2^k s}}^{2^-k} |f|_{L2}^{1 - 2^-k}`` for ``k = 1..k_max``.

    Parameters
    ----------
    f : ndarray
        Physical samples, shape ``(n, n)`` or a batch ``(B, n, n)``.
    s : float
        Base exponent, ``s > 0``.

    Returns
    -------
    list of InterpolationRow
        ``slack = rhs - lhs``; a violation is ``lhs > rhs (1 + 1e-12)``.
    """
    f = np.asarray(f, dtype=float)
    if not s > 0:
        raise DomainError("s must be positive")
    n = f.shape[-1]
    f_hat = np.fft.rfft2(f)
    scale = np.maximum(np.max(np.abs(f_hat), axis=(-2, -1)), 1e-300)
    if np.any(np.abs(f_hat[..., 0, 0]) > 1e-12 * scale * n):
        raise PreconditionError("field must be mean-free")
    _check_band(f_hat, n, s, k_max, length)
    exps = [0.0, s] + [2**k * s for k in range(1, k_max + 1)]
    norms = homogeneous_norms(f_hat, exps, n, length)
    l2, hs = norms[0], norms[1]
    rows = []
    for k in range(1, k_max + 1):
        a = 2.0**-k
        rhs = norms[k + 1] ** a * l2 ** (1 - a)
        viol = int(np.sum(hs > rhs * (1 + VIOLATION_RTOL)))
        rows.append(InterpolationRow(k, hs, rhs, rhs - hs, viol))
    return rows


def random_band_limited(n_fields, n, band=None, seed=0, decay=1.0):
    """Random mean-free real fields whose modes satisfy ``|k|_inf <= band``."""
    rng = np.random.default_rng(seed)
    band = n // 3 - 1 if band is None else band
    k1, k2, ksq = E._wavenumbers(n, E.TWO_PI)[:3]
    m1 = np.fft.fftfreq(n, d=1.0 / n)[:, None]
    m2 = np.fft.rfftfreq(n, d=1.0 / n)[None, :]
    keep = (np.abs(m1) <= band) & (m2 <= band) & (ksq > 0)
    amp = np.where(keep, (1.0 + ksq) ** (-0.5 * decay), 0.0)
    shape = (n_fields,) + ksq.shape
    spec = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * amp
    out = np.fft.irfft2(spec, s=(n, n))
    return out - out.mean(axis=(-2, -1), keepdims=True)


def interpolation_trials(n_trials=10_000, exponents=(0.25, 0.5, 1.0), k_max=4, n=32, seed=0,
                         batch=2500):
    """Run the interpolation check on random fields; returns rows
    ``(s, k, trials, violations, min_slack)``."""
    rows = []
    for i, s in enumerate(exponents):
        viol = np.zeros(k_max, dtype=int)
        min_slack = np.full(k_max, np.inf)
        done = 0
        b = 0
        while done < n_trials:
            m = min(batch, n_trials - done)
            f = random_band_limited(m, n, seed=seed + 1000 * i + b)
            for r in sobolev_interpolation_check(f, s, k_max):
                viol[r.k - 1] += r.violations
                min_slack[r.k - 1] = min(min_slack[r.k - 1], float(np.min(r.slack / r.rhs)))
            done += m
            b += 1
        for k in range(1, k_max + 1):
            rows.append((s, k, n_trials, int(viol[k - 1]), float(min_slack[k - 1])))
    return rows


# ---------------------------------------------------------------------------
# regularized families and light cones


@dataclass
class RegularizedFamily:
    """Smooth, circulation-preserving regularizations of a singular vortex.

    Near the centre the profile ``P`` is blended into a constant ``c_eps``
    with ``chi(r) = erfc((r - eps) / w) / 2``, ``w = eps / 4``; ``c_eps`` is
    chosen so the total circulation equals that of ``P``. Regularizations
    at different scales therefore differ only inside a ball of radius
    ``eps + 5 w`` (up to ~1e-12) and by a radial, circulation-free amount,
    which induces no velocity outside that ball. The Gaussian-type spectrum
    of the erfc edge keeps the dealiasing ripple near 1e-8 once ``w`` spans
    four cells.
    """

    profile: object
    background: object = None
    eps_list: tuple = ()
    n: int = 512
    length: float = E.TWO_PI
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h = self.length / self.n
        for e in self.eps_list:
            if e < MIN_EPS_CELLS * h * (1 - 1e-12):
                raise DomainError(f"eps={e:.4g} is below {MIN_EPS_CELLS} grid cells")
        self.grid = E.torus_grid(self.n, self.length)
        self._cache = {}

    @staticmethod
    def _blend(r, eps):
        return 0.5 * erfc((r - eps) / (0.25 * eps))

    def support_radius(self, eps):
        """Radius beyond which the regularization equals ``P`` to ~1e-12."""
        return 2.25 * eps

    def _base(self, r):
        with np.errstate(invalid="ignore"):
            return np.where(r > 0, self.profile.radial(np.maximum(r, 1e-300)), 0.0)

    def _constant(self, eps):
        # circulation is matched on the grid itself, so every member has the
        # same discrete mean and mean removal adds no offset between them
        if eps not in self._cache:
            r = self.grid.distance(self.grid.points(), self.profile.center)
            chi = self._blend(r, eps)
            self._cache[eps] = float(np.sum(chi * self._base(r)) / np.sum(chi))
        return self._cache[eps]

    def radial(self, r, eps):
        r = np.asarray(r, dtype=float)
        chi = self._blend(r, eps)
        return chi * self._constant(eps) + (1 - chi) * self._base(r)

    def data(self, eps):
        """Mean-free grid vorticity at scale ``eps``."""
        r = self.grid.distance(self.grid.points(), self.profile.center)
        w = self.radial(r, eps)
        if self.background is not None:
            w = w + self.background(self.grid.points())
        return w - np.mean(w)

    def lp_distance(self, eps, p):
        """``|| omega_0^eps - omega_0 ||_{L^p}`` by radial quadrature."""
        top = self.support_radius(eps)
        c = self._constant(eps)

        def g(r):
            return abs(self._blend(r, eps) * (c - float(self.profile.radial(r)))) ** p * r

        val = integrate.quad(g, 0.0, top, limit=400, points=[eps])[0]
        return (E.TWO_PI * val) ** (1.0 / p)

    def convergence(self, p=4.0):
        """Rows ``(eps, ||omega^eps - omega||_p)`` ordered by decreasing eps."""
        return [(e, self.lp_distance(e, p)) for e in sorted(self.eps_list, reverse=True)]

    def exterior_gradient(self, eps, radius=1.0):
        """Max spectral ``|grad omega^eps|`` outside ``B_radius``."""
        st = E.SpectralState.from_vorticity(self.data(eps), length=self.length)
        k1, k2 = E._wavenumbers(self.n, self.length)[:2]
        s = (self.n, self.n)
        gx = np.fft.irfft2(1j * k1 * st.w_hat, s=s)
        gy = np.fft.irfft2(1j * k2 * st.w_hat, s=s)
        r = self.grid.distance(self.grid.points(), self.profile.center)
        out = r >= radius
        return float(np.max(np.hypot(gx, gy)[out]))


@dataclass
class LightConeRow:
    t: float
    cone_radius: float
    exterior_sup: float
    interior_inf: float
    interior_p: float
    bound_rhs: float
    front_radius: float
    c_star: float


@dataclass
class LightConeResult:
    rows: list
    delta: float
    speed_factor: float
    h: float
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def exterior_ratio_ok(self, factor=1e-3):
        return all(r.exterior_sup <= factor * r.interior_inf for r in self.rows)

    def front_speed(self):
        """Largest ``(front(t) - front(0)) / t`` over monitor times."""
        f0 = self.rows[0].front_radius
        speeds = [(r.front_radius - f0) / r.t for r in self.rows if r.t > 0]
        return max(speeds) if speeds else 0.0

    def front_speed_ok(self, cells=3.0):
        c_star = max(r.c_star for r in self.rows)
        return self.front_speed() <= 2.0 * c_star + cells * self.h


def light_cone_experiment(family, eps1, eps2, T, speeds=2.0, dt=None, monitor_every=5, p=4.0,
                          max_radius=math.pi / 2):
    """Evolve two regularizations and track their difference outside a growing ball.

    The ball is centred on the singular point with radius
    ``delta + speeds * C_* * t`` where ``delta`` bounds the region where the
    data differ and ``C_*`` is the running max of both velocity fields.
    """
    solver = E.EulerSolver(family.n, length=family.length)
    grid = solver.grid
    s1 = E.SpectralState.from_vorticity(family.data(eps1), length=family.length)
    s2 = E.SpectralState.from_vorticity(family.data(eps2), length=family.length)
    delta = max(family.support_radius(eps1), family.support_radius(eps2))
    if delta >= max_radius:
        raise DomainError("initial ball already exceeds the safe radius")
    r = grid.distance(grid.points(), family.profile.center)
    area = grid.cell_area
    # initial data agree with the profile outside delta, so the exterior
    # terms of the bound are the data discrepancies measured there
    base = family.data(eps1) - family.data(eps2)
    init_ext = float(np.max(np.abs(base[r >= delta])))
    if dt is None:
        dt = 0.8 * min(solver.cfl_dt(s1), solver.cfl_dt(s2))
    c_star = max(E.biot_savart(s1).max_speed(), E.biot_savart(s2).max_speed())
    grad_c = 0.0
    rows = []
    truncated = False

    def monitor(a, b, t):
        nonlocal grad_c
        diff = a.vorticity() - b.vorticity()
        R = delta + speeds * c_star * t
        inside = r < R
        k1, k2 = E._wavenumbers(solver.n, solver.length)[:2]
        s = (solver.n, solver.n)
        for st in (a, b):
            u1h, u2h = E._velocity_hat(st)
            g = max(float(np.max(np.abs(np.fft.irfft2(1j * kk * uh, s=s))[~inside]))
                    for kk in (k1, k2) for uh in (u1h, u2h)) if (~inside).any() else 0.0
            grad_c = max(grad_c, g)
        ext = float(np.max(np.abs(diff[~inside]))) if (~inside).any() else 0.0
        d_in = np.abs(diff[inside])
        e_inf = float(d_in.max()) if d_in.size else 0.0
        e_p = float(np.sum(d_in**p) * area) ** (1.0 / p)
        big = np.abs(diff) > FRONT_THRESHOLD
        front = float(r[big].max()) if big.any() else 0.0
        rows.append(LightConeRow(t, R, ext, e_inf, e_p, init_ext * math.exp(grad_c * t), front, c_star))

    monitor(s1, s2, 0.0)
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n_steps
    for k in range(1, n_steps + 1):
        s1 = solver.step(s1, h)
        s2 = solver.step(s2, h)
        c_star = max(c_star, E.biot_savart(s1).max_speed(), E.biot_savart(s2).max_speed())
        if delta + speeds * c_star * s1.t > max_radius:
            warnings.warn(f"light cone leaves the safe radius at t={s1.t:.3g}; run truncated")
            truncated = True
            break
        if k % monitor_every == 0 or k == n_steps:
            monitor(s1, s2, s1.t)
    meta = {"n": family.n, "dt": h, "eps1": eps1, "eps2": eps2, "T": T, "p": p,
            "front_threshold": FRONT_THRESHOLD}
    return LightConeResult(rows, delta, speeds, grid.h, truncated, meta)


def smooth_background(amplitude=0.1, center=(math.pi, math.pi), quiet_radius=1.2):
    """Smooth periodic vorticity that vanishes to high order near ``center``."""
    c = np.asarray(center, dtype=float)

    def b(x):
        x = np.asarray(x, dtype=float)
        d = x - c
        d = d - E.TWO_PI * np.round(d / E.TWO_PI)
        rr = np.hypot(d[..., 0], d[..., 1])
        quiet = 1.0 - np.exp(-((rr / quiet_radius) ** 8))
        return amplitude * quiet * (np.cos(x[..., 0] + 0.4) * np.cos(2 * x[..., 1]) + 0.5 * np.sin(x[..., 0] - x[..., 1]))

    return b


def default_family(n=512, center=(math.pi, math.pi)):
    """Loglog vortex of radius pi/4 with a quiet-core background and eps = 16, 24 cells."""
    h = E.TWO_PI / n
    prof = E.loglog_vortex(center, 1.0, math.pi / 4)
    return RegularizedFamily(prof, smooth_background(center=center), (16 * h, 24 * h), n)


# ---------------------------------------------------------------------------
# log-Gronwall bound


@dataclass
class GronwallReport:
    K: float
    rows: list
    passed: bool
    trivial: bool
    fit_range: tuple


def gronwall_log_bound_check(times, series, K=None, fit_fraction=0.5, margin=0.1):
    """Check ``d(t) <= d(0)^{exp(-K t)}`` for an L2 difference series.

    With ``K`` omitted it is fitted as the smallest value that works on the
    first ``fit_fraction`` of the times, enlarged by ``margin``, and the
    bound is then verified on all times (the rest acts as held-out data).

    Returns
    -------
    GronwallReport
        ``rows`` are ``(t, d, bound, passed, held_out)``.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(series, dtype=float)
    if d.shape != t.shape or d.size == 0:
        raise DomainError("times and series must have the same nonempty shape")
    d0 = float(d[0])
    if not d0 < 1:
        raise PreconditionError("initial difference must be < 1 for the double-exponential form")
    n_fit = max(2, int(math.ceil(fit_fraction * len(t))))
    if d0 == 0.0:
        ok = bool(np.all(d == 0))
        rows = [(float(a), float(b), 0.0, b == 0, i >= n_fit) for i, (a, b) in enumerate(zip(t, d))]
        return GronwallReport(0.0 if K is None else float(K), rows, ok, True, (float(t[0]), float(t[n_fit - 1])))
    L0 = math.log(d0)
    if K is None:
        K = 0.0
        for a, b in zip(t[1:n_fit], d[1:n_fit]):
            if a <= 0:
                continue
            if b >= 1:
                K = math.inf
                break
            if b > d0:
                K = max(K, -math.log(math.log(b) / L0) / a)
        K *= 1 + margin
    rows = []
    for i, (a, b) in enumerate(zip(t, d)):
        bound = d0 ** math.exp(-K * a) if math.isfinite(K) else 1.0
        rows.append((float(a), float(b), float(bound), bool(b <= bound * (1 + VIOLATION_RTOL)), i >= n_fit))
    passed = all(r[3] for r in rows)
    return GronwallReport(float(K), rows, passed, False, (float(t[0]), float(t[n_fit - 1])))


def velocity_difference_series(state_a, state_b, solver, T, dt, every=5):
    """``(times, ||u_a - u_b||_{L2})`` from two runs on the same solver grid."""
    times, out = [0.0], []

    def diff(a, b):
        u = E.biot_savart(a)
        v = E.biot_savart(b)
        return math.sqrt(float(np.mean((u.u1 - v.u1) ** 2 + (u.u2 - v.u2) ** 2))) * solver.length

    out.append(diff(state_a, state_b))
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n_steps
    for k in range(1, n_steps + 1):
        state_a = solver.step(state_a, h)
        state_b = solver.step(state_b, h)
        if k % every == 0 or k == n_steps:
            times.append(state_a.t)
            out.append(diff(state_a, state_b))
    return np.array(times), np.array(out)
