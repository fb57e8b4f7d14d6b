import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osgood_lab import euler2d as E
from osgood_lab.errors import CFLError, CollisionError, DomainError, ExcludedZoneError, PreconditionError


def mesh(n):
    return E.torus_grid(n).mesh()


@pytest.mark.parametrize("m", [1, 2, 5])
def test_biot_savart_of_single_modes(m):
    X, Y = mesh(64)
    u = E.biot_savart(E.SpectralState.from_vorticity(np.cos(m * X)))
    np.testing.assert_allclose(u.u1, 0.0, atol=1e-13)
    np.testing.assert_allclose(u.u2, np.sin(m * X) / m, atol=1e-13)
    u = E.biot_savart(E.SpectralState.from_vorticity(np.cos(m * Y)))
    np.testing.assert_allclose(u.u1, -np.sin(m * Y) / m, atol=1e-13)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_velocity_is_divergence_free_and_curl_recovers_vorticity(seed):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(32, 32))
    st_ = E.SpectralState.from_vorticity(w - w.mean())
    u = E.biot_savart(st_)
    assert u.spectral_divergence() < 1e-10
    back = np.fft.irfft2(E.curl_hat(u.u1, u.u2), s=(32, 32))
    np.testing.assert_allclose(back, st_.vorticity(), atol=1e-10)


def test_nonzero_mean_is_rejected():
    X, _ = mesh(32)
    with pytest.raises(PreconditionError):
        E.biot_savart(E.SpectralState.from_vorticity(1.0 + np.cos(X)))


def test_shear_flow_is_steady():
    solver = E.EulerSolver(64)
    X, _ = mesh(64)
    st_ = E.SpectralState.from_vorticity(np.cos(X))
    end = solver.run(st_, 1.0, 0.5 * solver.cfl_dt(st_))
    np.testing.assert_allclose(end.vorticity(), st_.vorticity(), atol=1e-13)


def test_smooth_flow_conserves_energy_and_enstrophy():
    solver = E.EulerSolver(64)
    X, Y = mesh(64)
    w = np.cos(X) * np.cos(Y) + 0.3 * np.sin(2 * X + Y)
    st_ = E.SpectralState.from_vorticity(w - w.mean())
    end = solver.run(st_, 0.5, 0.5 * solver.cfl_dt(st_))
    assert E.energy(end) == pytest.approx(E.energy(st_), rel=1e-9)
    assert E.enstrophy(end) == pytest.approx(E.enstrophy(st_), rel=1e-9)


def test_cfl_violation_suggests_a_step():
    solver = E.EulerSolver(32)
    X, Y = mesh(32)
    st_ = E.SpectralState.from_vorticity(5 * np.cos(X) * np.cos(Y))
    with pytest.raises(CFLError) as info:
        solver.step(st_, 10.0)
    assert 0 < info.value.suggested_dt <= solver.cfl_dt(st_)


def test_spectral_point_values_interpolate_exactly():
    X, Y = mesh(32)
    f = np.cos(2 * X - Y) + 0.5 * np.sin(3 * Y)
    pts = np.array([[0.1, 0.2], [2.5, 4.0]])
    got = E.spectral_point_values(np.fft.rfft2(f), pts, 32)
    exact = np.cos(2 * pts[:, 0] - pts[:, 1]) + 0.5 * np.sin(3 * pts[:, 1])
    np.testing.assert_allclose(got, exact, atol=1e-12)


@pytest.mark.parametrize("name,p", [("const", 2.0), ("log", 4.0), ("const", 8.0)])
def test_theta_norm_on_ball_matches_mpmath(name, p):
    radius = 0.5
    floor = math.e**math.e
    th = (lambda s: 1) if name == "const" else mpmath.log

    def g(r):
        return th(max(mpmath.log(1 / r), floor)) ** p * r

    ref = (2 * mpmath.pi * mpmath.quad(g, [0, mpmath.exp(-floor), radius])) ** (1 / p)
    assert E.theta_norm_on_ball(name, p, radius) == pytest.approx(float(ref), rel=1e-8)


def test_remainder_source_excludes_the_centre_and_vanishes_for_uniform_flow():
    prof = E.loglog_vortex((math.pi, math.pi))
    uniform = lambda x: np.broadcast_to([0.3, -0.2], np.shape(x))
    x = np.array([[math.pi + 0.2, math.pi], [math.pi, math.pi - 0.4]])
    np.testing.assert_allclose(E.remainder_source(prof, prof.center, uniform, x, 0.01), 0.0, atol=1e-14)
    with pytest.raises(ExcludedZoneError):
        E.remainder_source(prof, prof.center, uniform, np.array([[math.pi + 0.01, math.pi]]), 0.01)


def test_vortex_system_validation():
    big = E.loglog_vortex((1.0, 1.0), radius=1.0)
    with pytest.raises(DomainError):
        E.VortexSystem([big])
    v = E.loglog_vortex((1.0, 1.0), radius=0.3)
    with pytest.raises(DomainError):
        E.VortexSystem([v, v])


def test_isolated_vortex_drift_is_small_and_shrinks_with_resolution():
    system = E.VortexSystem([E.loglog_vortex((math.pi, math.pi))])
    coarse = E.run_singular_vortex(system, 0.5, 0.04, n=64, monitor_every=5)
    fine = E.run_singular_vortex(system, 0.5, 0.04, n=128, monitor_every=5)
    assert fine.column("drift_l2").max() < 3e-3
    assert fine.column("drift_l2").max() < coarse.column("drift_l2").max()
    np.testing.assert_allclose(fine.center_path[-1, 0], [math.pi, math.pi], atol=1e-12)


def test_close_pair_collides():
    system = E.two_vortex_system(d=0.09, radius=0.06, gamma=1.0)
    with pytest.raises(CollisionError):
        E.run_singular_vortex(system, 0.1, 0.01, n=256)


def test_rotation_period_of_synthetic_pair():
    t = np.linspace(0, 3, 50)
    ang = 2 * math.pi * t / 7.0
    c = np.stack([np.cos(ang), np.sin(ang)], axis=-1) * 0.3
    path = np.stack([math.pi - c, math.pi + c], axis=1)
    assert E.rotation_period(t, path) == pytest.approx(7.0)


def test_reduced_ode_pair_rotates_rigidly():
    system = E.two_vortex_system()
    ts, path = E.reduced_vortex_ode(system, 5.0, n_out=50)
    sep = np.hypot(*(path[:, 1] - path[:, 0]).T)
    np.testing.assert_allclose(sep, math.pi / 4, rtol=1e-7)
    mid = path.mean(axis=1)
    np.testing.assert_allclose(mid, math.pi, atol=1e-8)


def test_perturbed_run_bound_rows_hold():
    system = E.VortexSystem([E.loglog_vortex((math.pi, math.pi))],
                            E.patch_background((math.pi + 0.6, math.pi + 0.2), 0.25, 0.06))
    run = E.run_singular_vortex(system, 0.2, 0.04, n=128, monitor_every=5)
    assert all(r[4] for r in run.bound_check())
