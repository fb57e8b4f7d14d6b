"""Flow maps of planar velocity fields and Osgood two-point certificates.

Trajectories solve ``d/dt phi(x, t) = u(phi(x, t), t)`` with a batched
Dormand-Prince 5(4) integrator: all points share one step size and the
error norm is the max over points, so every trajectory meets the local
tolerance. Dense output is cubic Hermite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.integrate import cumulative_simpson

from . import modulus as mod
from .errors import DomainError, IntegrationError, PreconditionError
from .fields import VectorField2D

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


# ---------------------------------------------------------------------------
# velocity fields

def lipschitz_to_modulus(K, spec):
    """Constant ``C`` with ``K z <= C L(z)`` on ``(0, m_L]``."""
    if spec.kind == mod.LIPSCHITZ:
        return float(K)
    z = np.geomspace(max(spec.z_min, 1e-300) if spec.kind == mod.CUSTOM else 1e-300,
                     spec.m_L, 2000)
    return float(K) * float(np.max(z / mod.eval_L(spec, z)))


class VelocityField:
    """Base class: ``u(x, t)`` for points ``x`` of shape ``(..., 2)``."""

    autonomous = True
    name = "field"

    def __call__(self, x, t=0.0):
        raise NotImplementedError

    def modulus_constant(self, spec):
        """Bound ``C(t)`` on ``||u(t)||_L``: a float or ``[(t_start, C), ...]``."""
        return estimate_modulus_constant(self, spec)

    def describe(self):
        return {"field": self.name}


class ZeroField(VelocityField):
    name = "zero"

    def __call__(self, x, t=0.0):
        return np.zeros_like(np.asarray(x, dtype=float))

    def modulus_constant(self, spec):
        return 0.0


class Hyperbolic(VelocityField):
    """``u(x1, x2) = (x2, x1)``: stable line ``x1 = -x2``, unstable ``x1 = x2``."""

    name = "hyperbolic"
    lipschitz = 1.0

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 1], x[..., 0]], axis=-1)

    def modulus_constant(self, spec):
        return lipschitz_to_modulus(self.lipschitz, spec)

    def exact(self, x, t):
        """Closed-form flow ``exp(t A) x`` with ``A = [[0, 1], [1, 0]]``."""
        x = np.asarray(x, dtype=float)
        c, s = math.cosh(t), math.sinh(t)
        return np.stack([c * x[..., 0] + s * x[..., 1], s * x[..., 0] + c * x[..., 1]], axis=-1)


class RigidRotation(VelocityField):
    """``u = omega (x - c)^perp``."""

    name = "rotation"

    def __init__(self, omega=1.0, center=(0.0, 0.0)):
        self.omega = float(omega)
        self.center = np.asarray(center, dtype=float)

    def __call__(self, x, t=0.0):
        d = np.asarray(x, dtype=float) - self.center
        return self.omega * np.stack([-d[..., 1], d[..., 0]], axis=-1)

    def modulus_constant(self, spec):
        return lipschitz_to_modulus(abs(self.omega), spec)

    def exact(self, x, t):
        d = np.asarray(x, dtype=float) - self.center
        c, s = math.cos(self.omega * t), math.sin(self.omega * t)
        return self.center + np.stack([c * d[..., 0] - s * d[..., 1], s * d[..., 0] + c * d[..., 1]], axis=-1)

    def describe(self):
        return {"field": self.name, "omega": self.omega, "center": self.center.tolist()}


class BahouriChemin(VelocityField):
    """Cellular field ``u = grad^perp psi`` with ``Delta psi = sgn(x1) sgn(x2)``.

    ``psi`` is the double sine series truncated to odd wavenumbers
    ``m, n <= K`` on the torus ``[-pi, pi)^2``::

        psi = -(16 / pi^2) sum sin(m x1) sin(n x2) / (m n (m^2 + n^2))

    Both coordinate axes are invariant. The truncated field is smooth, so
    the log-Lipschitz behaviour only shows for ``1/K << |x| << 1``.
    """

    name = "bahouri-chemin"

    def __init__(self, K=64):
        if K < 1:
            raise DomainError("truncation K must be >= 1")
        self.K = int(K)
        m = np.arange(1, self.K + 1, 2, dtype=float)
        self.m = m
        self.coef = -16.0 / math.pi**2 / (m[:, None] * m[None, :] * (m[:, None] ** 2 + m[None, :] ** 2))

    def _modes(self, x):
        # e^{i m x} for odd m = 1, 3, ..., K by a cumulative product
        z1 = np.exp(1j * x)
        w = np.empty(x.shape + (self.m.size,), dtype=complex)
        w[..., 0] = z1
        w[..., 1:] = (z1 * z1)[..., None]
        w = np.cumprod(w, axis=-1)
        return w.imag, w.real

    def stream(self, x):
        x = np.asarray(x, dtype=float)
        s1, _ = self._modes(x[..., 0])
        s2, _ = self._modes(x[..., 1])
        return np.einsum("...i,...i->...", s1 @ self.coef, s2)

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        s1, c1 = self._modes(x[..., 0])
        s2, c2 = self._modes(x[..., 1])
        cm = self.coef * self.m[None, :]  # d/dx2 brings n
        mc = self.coef * self.m[:, None]  # d/dx1 brings m
        d2 = np.einsum("...i,...i->...", s1 @ cm, c2)
        d1 = np.einsum("...i,...i->...", c1 @ mc, s2)
        return np.stack([-d2, d1], axis=-1)

    def modulus_constant(self, spec, n_pairs=10_000, seed=0):
        """Sampled constant; pairs are drawn globally and near the origin,
        where the gradient is largest."""
        return max(estimate_modulus_constant(self, spec, n_pairs=n_pairs, seed=seed),
                   estimate_modulus_constant(self, spec, n_pairs=n_pairs, seed=seed + 1,
                                             box=(-0.05, 0.05)))

    def describe(self):
        return {"field": self.name, "K": self.K}


class RadialVortex(VelocityField):
    """Circular flow of a radial vorticity profile.

    ``u(x) = (x - c)^perp / |x - c|^2 * int_0^{|x - c|} omega(s) s ds``,
    with the radial integral tabulated on a log-spaced grid.
    """

    name = "radial-vortex"

    def __init__(self, profile, n_table=20000, s_min_rel=1e-14):
        self.profile = profile
        self.center = np.asarray(profile.center, dtype=float)
        r_end = profile.r_end
        sig = np.linspace(math.log(s_min_rel * r_end), math.log(r_end), n_table)
        s = np.exp(sig)
        w = profile.radial(s)
        # d(int w s ds) = w s^2 d sigma; the piece below s_min is w(s_min) s_min^2 / 2
        head = 0.5 * w[0] * s[0] ** 2
        I = head + cumulative_simpson(w * s * s, x=sig, initial=0.0)
        self._sig, self._I = sig, I
        self._W = I / (s * s)  # angular velocity, smooth in log r
        self.circulation = 2.0 * math.pi * float(I[-1])

    def angular_velocity(self, r):
        """``u_theta / r = r^{-2} int_0^r omega(s) s ds``."""
        r = np.asarray(r, dtype=float)
        lr = np.log(np.maximum(r, 1e-300))
        out = np.interp(lr, self._sig, self._W)
        far = r >= self.profile.r_end
        return np.where(far, self._I[-1] / np.maximum(r, 1e-300) ** 2, out)

    def enclosed(self, r):
        """``int_0^r omega(s) s ds``."""
        r = np.asarray(r, dtype=float)
        return self.angular_velocity(r) * r * r

    def __call__(self, x, t=0.0):
        d = np.asarray(x, dtype=float) - self.center
        r = np.hypot(d[..., 0], d[..., 1])
        w = self.angular_velocity(r)
        return np.stack([-w * d[..., 1], w * d[..., 0]], axis=-1)

    def describe(self):
        return {"field": self.name, "profile": self.profile.describe()}


class SampledVelocity(VelocityField):
    """Periodic velocity snapshots with cubic B-spline space interpolation
    and linear interpolation in time."""

    name = "sampled"

    def __init__(self, snapshots, times=None, div_tol=1e-8):
        snaps = list(snapshots) if not isinstance(snapshots, VectorField2D) else [snapshots]
        if not snaps:
            raise DomainError("need at least one snapshot")
        self.grid = snaps[0].grid
        for s in snaps:
            if not s.grid.periodic:
                raise DomainError("sampled velocities must live on a periodic grid")
            if s.grid != self.grid:
                raise DomainError("all snapshots must share one grid")
            div = s.spectral_divergence()
            if div > div_tol:
                raise DomainError(f"snapshot is not divergence-free (relative {div:.2e})")
        self.snapshots = snaps
        self.times = np.asarray([s.time for s in snaps] if times is None else times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("snapshot times must increase")
        self.autonomous = len(snaps) == 1
        self._coef = [
            (ndimage.spline_filter(s.u1, order=3, mode="grid-wrap"),
             ndimage.spline_filter(s.u2, order=3, mode="grid-wrap"))
            for s in snaps
        ]

    def _eval(self, k, x):
        idx = self.grid.to_index(x).reshape(2, -1)
        shape = np.asarray(x).shape
        out = [ndimage.map_coordinates(c, idx, order=3, mode="grid-wrap", prefilter=False)
               for c in self._coef[k]]
        return np.stack(out, axis=-1).reshape(shape)

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        if self.autonomous:
            return self._eval(0, x)
        t = float(np.clip(t, self.times[0], self.times[-1]))
        k = int(np.clip(np.searchsorted(self.times, t) - 1, 0, len(self.times) - 2))
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return (1 - w) * self._eval(k, x) + w * self._eval(k + 1, x)

    def modulus_constant(self, spec, n_pairs=10_000, seed=0):
        return [(float(tk), estimate_modulus_constant(self, spec, t=float(tk), n_pairs=n_pairs, seed=seed))
                for tk in self.times]


def estimate_modulus_constant(u, spec, t=0.0, n_pairs=10_000, seed=0, box=None, d_min=1e-6):
    """Sampled ``sup |u(x) - u(y)| / L(|x - y|)`` over random pairs.

    Pairs have log-uniform separations in ``[d_min, m_L / 2)`` and first
    points uniform in ``box = (lo, hi)`` (default ``[-pi, pi)^2``). This is
    an estimate from below of the true constant.
    """
    rng = np.random.default_rng(seed)
    lo, hi = box if box is not None else (-math.pi, math.pi)
    x = rng.uniform(lo, hi, size=(n_pairs, 2))
    d = np.exp(rng.uniform(math.log(d_min), math.log(0.5 * spec.m_L), n_pairs))
    if spec.kind == mod.CUSTOM:
        d = np.maximum(d, spec.z_min)
    ang = rng.uniform(0, 2 * math.pi, n_pairs)
    y = x + d[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    du = u(x, t) - u(y, t)
    return float(np.max(np.hypot(du[:, 0], du[:, 1]) / mod.eval_L(spec, d)))


# ---------------------------------------------------------------------------
# integrator

@dataclass
class Trajectory:
    """Accepted steps of a (batched) flow-map integration."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray | None
    n_steps: int
    n_rejected: int
    tol: float
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.positions[-1]

    def at(self, t):
        """Cubic Hermite dense output at time ``t``."""
        if self.velocities is None:
            raise DomainError("trajectory was integrated without recording")
        ts = self.times
        sign = 1.0 if ts[-1] >= ts[0] else -1.0
        key = sign * ts
        tt = sign * t
        if not key[0] - 1e-14 <= tt <= key[-1] + 1e-14:
            raise DomainError(f"t={t} outside the integrated interval")
        k = int(np.clip(np.searchsorted(key, tt) - 1, 0, len(ts) - 2))
        h = ts[k + 1] - ts[k]
        s = (t - ts[k]) / h
        y0, y1 = self.positions[k], self.positions[k + 1]
        f0, f1 = self.velocities[k], self.velocities[k + 1]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def integrate(u, x0, t0, t1, tol=1e-10, max_step=None, record=True, max_steps=1_000_000):
    """Integrate ``dx/dt = u(x, t)`` from ``t0`` to ``t1`` for a batch of points.

    Parameters
    ----------
    u : callable
        ``u(x, t)`` on arrays of shape ``(..., 2)``.
    x0 : array_like, shape (..., 2)
    tol : float
        Absolute and relative local error tolerance per step (max norm
        over all points and components).
    max_step : float, optional
        Cap on ``|dt|``; none by default.
    record : bool
        Keep every accepted step (needed for dense output).
    """
    y = np.array(x0, dtype=float)
    span = float(t1) - float(t0)
    if span == 0.0:
        f = np.asarray(u(y, t0), dtype=float) if record else None
        return Trajectory(np.array([t0]), y[None].copy(), None if f is None else f[None],
                          0, 0, tol)
    direction = math.copysign(1.0, span)
    t = float(t0)
    f = np.asarray(u(y, t), dtype=float)
    # initial step from the scale of y and f
    sc = tol + tol * np.abs(y)
    d0 = float(np.max(np.abs(y) / sc))
    d1 = float(np.max(np.abs(f) / sc))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, abs(span))
    if max_step is not None:
        h = min(h, max_step)
    ts, ys, fs = [t], [y.copy()], [f.copy()]
    n_acc = n_rej = 0
    k = [None] * 7
    while direction * (t1 - t) > 0:
        if n_acc + n_rej >= max_steps:
            raise IntegrationError("step budget exhausted", t, y)
        h = min(h, abs(t1 - t))
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t:.6g}", t, y)
        hs = direction * h
        k[0] = f
        for i in range(1, 7):
            yi = y + hs * sum(a * k[j] for j, a in enumerate(_A[i]) if a != 0.0)
            k[i] = np.asarray(u(yi, t + _C[i] * hs), dtype=float)
        y_new = y + hs * sum(b * k[j] for j, b in enumerate(_B5) if b != 0.0)
        err = hs * sum(e * k[j] for j, e in enumerate(_E) if e != 0.0)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.max(np.abs(err) / scale)) if err.size else 0.0
        if not math.isfinite(en):
            en = math.inf
        if en <= 1.0:
            t = t + hs if abs(t1 - (t + hs)) > 1e-15 * max(1.0, abs(t1)) else float(t1)
            y, f = y_new, k[6]
            n_acc += 1
            if record:
                ts.append(t)
                ys.append(y.copy())
                fs.append(f.copy())
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        else:
            n_rej += 1
            fac = 0.2 if not math.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
        h = h * fac
        if max_step is not None:
            h = min(h, max_step)
    if not record:
        ts, ys, fs = [float(t0), t], [np.array(x0, dtype=float), y], None
    return Trajectory(np.array(ts), np.stack(ys), None if fs is None else np.stack(fs),
                      n_acc, n_rej, tol)


def integrate_flow(u, x0, t_final, tol=1e-10, max_step=None, record=True):
    """Trajectory of ``phi(x0, t)`` for ``t`` between 0 and ``t_final``."""
    return integrate(u, x0, 0.0, t_final, tol=tol, max_step=max_step, record=record)


def flow_map(u, x0, t, tol=1e-10, max_step=None):
    """``phi(x0, t)`` without recording intermediate steps."""
    return integrate(u, x0, 0.0, t, tol=tol, max_step=max_step, record=False).final


def inverse_flow(u, x, t, tol=1e-10, max_step=None):
    """``phi^{-1}(x, t)``: integrate backwards from time ``t`` to time 0."""
    if t == 0:
        return np.array(x, dtype=float)
    return integrate(u, x, t, 0.0, tol=tol, max_step=max_step, record=False).final


# ---------------------------------------------------------------------------
# certificates

@dataclass
class Certificate:
    x: tuple
    y: tuple
    t: float
    sep0: float
    sep_t: float
    ratio: float
    lower: float
    upper: float
    mu: float
    lint: float
    m_diff: float
    slack: float
    passed: bool
    modulus: str
    field: dict

    def as_dict(self):
        return dict(self.__dict__)


def certify_pairs(u, spec, xs, ys, t, tol=1e-12, C=None, slack_tol=1e-9, max_step=None):
    """Check ``1/mu <= R(|phi(x)-phi(y)|) / R(|x-y|) <= mu`` for a batch of pairs.

    ``C`` is the bound on ``||u(s)||_L`` (float or piecewise constant);
    by default it is taken from ``u.modulus_constant(spec)``. ``slack`` is
    the distance of ``log(ratio)`` to the nearer end of ``[-log mu, log mu]``.

    Raises
    ------
    PreconditionError
        If some pair violates ``mu R(|x - y|) < 1`` or ``0 < |x-y| < m_L``.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    C = u.modulus_constant(spec) if C is None else C
    lint = mod.modulus_integral(C, t)
    g = mod.mu_factor(lint, t)
    sep0 = np.hypot(*(xs - ys).T)
    if np.any(~(sep0 > 0)) or np.any(sep0 >= spec.m_L):
        raise PreconditionError("pair separations must lie in (0, m_L)")
    R0 = np.asarray(mod.eval_R(spec, sep0))
    if np.any(g.mu * R0 >= 1.0):
        raise PreconditionError(
            f"smallness condition mu R(|x-y|) < 1 fails (max {float(np.max(g.mu * R0)):.4g})"
        )
    ends = flow_map(u, np.concatenate([xs, ys]), t, tol=tol, max_step=max_step)
    n = xs.shape[0]
    sep_t = np.hypot(*(ends[:n] - ends[n:]).T)
    if np.any(sep_t >= spec.m_L):
        raise PreconditionError("evolved separation left (0, m_L)")
    Mt = np.asarray(mod.eval_M(spec, sep_t))
    M0 = np.asarray(mod.eval_M(spec, sep0))
    ratio = np.exp(M0 - Mt)
    lr = M0 - Mt
    slack = np.minimum(lr + lint, lint - lr)
    out = []
    for i in range(n):
        out.append(Certificate(
            tuple(xs[i].tolist()), tuple(ys[i].tolist()), float(t), float(sep0[i]), float(sep_t[i]),
            float(ratio[i]), 1.0 / g.mu, g.mu, g.mu, lint, float(M0[i] - Mt[i]), float(slack[i]),
            bool(slack[i] >= -slack_tol), spec.name, u.describe(),
        ))
    return out


def pair_separation_certificate(u, spec, x, y, t, tol=1e-12, C=None, slack_tol=1e-9):
    """Single-pair version of :func:`certify_pairs`."""
    return certify_pairs(u, spec, [x], [y], t, tol=tol, C=C, slack_tol=slack_tol)[0]


def bahouri_chemin_velocity(K, x):
    return BahouriChemin(K)(x)


def bahouri_chemin_axis_table(K, t, positions, tol=1e-12):
    """Axis escape exponents of the truncated Bahouri-Chemin flow.

    Under the convention ``u = (-d2 psi, d1 psi)`` the ``x1`` axis is
    repelling and the ``x2`` axis attracting. Points ``(a, 0)`` are pushed
    out, and ``log|phi_t| / log|a|`` is compared with ``e^{-t}``. The fitted
    constants ``C`` in ``|phi_t(a)| = C |a|^{e^{-t}}`` are returned too.
    """
    a = np.asarray(positions, dtype=float)
    end = flow_map(BahouriChemin(K), np.stack([a, np.zeros_like(a)], axis=-1), t, tol=tol)
    pt = np.abs(end[:, 0])
    ratio = np.log(pt) / np.log(np.abs(a))
    C = pt / np.abs(a) ** math.exp(-t)
    return {"K": int(K), "t": float(t), "positions": a, "exponent_ratio": ratio,
            "normalized": ratio / math.exp(-t), "C1": float(C.min()), "C2": float(C.max())}


def radial_vortex_velocity(profile, x):
    return RadialVortex(profile)(x)


def jacobian_determinant(u, x, t, delta=1e-5, tol=1e-10):
    """Finite-difference ``det D phi_t(x)`` from four tracers around each point."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e = np.array([[delta, 0.0], [-delta, 0.0], [0.0, delta], [0.0, -delta]])
    pts = x[:, None, :] + e[None]
    end = flow_map(u, pts, t, tol=tol)
    c1 = (end[:, 0] - end[:, 1]) / (2 * delta)
    c2 = (end[:, 2] - end[:, 3]) / (2 * delta)
    return c1[:, 0] * c2[:, 1] - c1[:, 1] * c2[:, 0]
