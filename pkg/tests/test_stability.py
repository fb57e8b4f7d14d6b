import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osgood_lab import euler2d as E
from osgood_lab import stability as S
from osgood_lab.errors import DomainError, PreconditionError


def mesh(n):
    return E.torus_grid(n).mesh()


@pytest.mark.parametrize("s", [0.25, 0.5, 1.0])
def test_single_mode_is_an_equality_case(s):
    X, Y = mesh(32)
    rows = S.sobolev_interpolation_check(np.cos(3 * X + 2 * Y), s, 4)
    for r in rows:
        # FFT roundoff in empty modes is amplified by |k|^(2^(k+1) s)
        assert float(r.rhs) == pytest.approx(float(r.lhs), rel=1e-8)
        assert r.violations == 0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([0.25, 0.5, 1.0]))
def test_random_fields_never_violate(seed, s):
    f = S.random_band_limited(20, 32, seed=seed)
    assert all(r.violations == 0 for r in S.sobolev_interpolation_check(f, s, 4))


def test_homogeneous_norm_of_single_mode():
    X, Y = mesh(16)
    f_hat = np.fft.rfft2(np.cos(2 * X))
    l2, h1 = S.homogeneous_norms(f_hat, [0.0, 1.0], 16)
    assert float(l2) == pytest.approx(math.sqrt(2) * math.pi)
    assert float(h1) == pytest.approx(2 * math.sqrt(2) * math.pi)


def test_interpolation_preconditions():
    X, _ = mesh(32)
    with pytest.raises(PreconditionError):
        S.sobolev_interpolation_check(1.0 + np.cos(X), 0.5)
    with pytest.raises(DomainError):
        S.sobolev_interpolation_check(np.cos(X), -1.0)


def test_trials_are_seeded():
    a = S.interpolation_trials(50, (0.5,), 2, 16, seed=3)
    b = S.interpolation_trials(50, (0.5,), 2, 16, seed=3)
    assert a == b


@pytest.fixture(scope="module")
def family():
    return S.default_family(n=128)


def test_family_data_is_mean_free_and_equal_far_away(family):
    h = family.grid.h
    d1, d2 = family.data(family.eps_list[0]), family.data(family.eps_list[1])
    assert abs(d1.mean()) < 1e-12
    r = family.grid.distance(family.grid.points(), family.profile.center)
    far = r > family.support_radius(max(family.eps_list)) + 2 * h
    np.testing.assert_allclose(d1[far], d2[far], atol=1e-12)


def test_family_converges_as_eps_shrinks(family):
    dist = [d for _, d in family.convergence()]
    assert all(a > b for a, b in zip(dist, dist[1:]))


def test_gronwall_trivial_and_precondition():
    t = np.linspace(0, 1, 5)
    assert S.gronwall_log_bound_check(t, np.zeros(5)).trivial
    with pytest.raises(PreconditionError):
        S.gronwall_log_bound_check(t, np.full(5, 2.0))


def test_gronwall_holds_for_double_exponential_series():
    t = np.linspace(0, 2, 21)
    d = 1e-3 ** np.exp(-0.3 * t)
    rep = S.gronwall_log_bound_check(t, d)
    assert rep.passed
    assert rep.K == pytest.approx(0.33, rel=1e-6)


def test_gronwall_detects_late_growth():
    t = np.linspace(0, 1, 41)
    d = (1e-3 + 0.5 * np.exp(-20 * t))[::-1]
    assert not S.gronwall_log_bound_check(t, d).passed


def test_smooth_velocity_difference_obeys_bound():
    solver = E.EulerSolver(32)
    X, Y = mesh(32)
    w = np.cos(X) * np.cos(Y) + 0.3 * np.sin(2 * X + Y)
    w -= w.mean()
    a = E.SpectralState.from_vorticity(w)
    b = E.SpectralState.from_vorticity(w + 1e-3 * np.cos(3 * X - Y))
    t, d = S.velocity_difference_series(a, b, solver, 4.0, 0.5 * solver.cfl_dt(a), every=2)
    assert S.gronwall_log_bound_check(t, d).passed
