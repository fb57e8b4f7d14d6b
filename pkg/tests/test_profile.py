import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osgood_lab.errors import DomainError
from osgood_lab.modulus import ModulusSpec
from osgood_lab.profile import SingularProfile, smooth_step, smooth_step_derivative

LOGLIP = ModulusSpec.log_lipschitz()


def fd(f, r, h=1e-7):
    return (f(r + h) - f(r - h)) / (2 * h)


@pytest.mark.parametrize("shape,param", [("identity", 1.0), ("power", 0.5), ("log", 1.0),
                                         ("sin", 0.3), ("square", 1.0), ("zlogz", 1.0)])
def test_shape_derivative(shape, param):
    prof = SingularProfile((0, 0), LOGLIP, shape=shape, shape_param=param)
    z = np.array([1.2, 2.0, 3.5])
    np.testing.assert_allclose(prof.dF(z), fd(prof.F, z), rtol=1e-6)


@pytest.mark.parametrize("r", [0.01, 0.1, 0.2, 0.25, 0.3])
def test_radial_derivative(r):
    prof = SingularProfile((0, 0), LOGLIP, scale=2.0, r_cut=0.15, r_end=0.35)
    assert prof.radial_derivative(r) == pytest.approx(fd(prof.radial, r), rel=1e-5, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.5, 1.5))
def test_smooth_step_bounds_and_derivative(u):
    v = float(smooth_step(u))
    assert 0.0 <= v <= 1.0
    if 0.01 < u < 0.99:
        assert smooth_step_derivative(u) == pytest.approx(fd(smooth_step, u, 1e-6), rel=1e-4, abs=1e-9)


def test_capped_M_is_C2_at_eps():
    prof = SingularProfile((0, 0), LOGLIP)
    eps = 0.01
    below = eps * (1 - 1e-9)
    assert prof.capped_M(below, eps) == pytest.approx(float(prof.M(eps)), rel=1e-7)
    d = lambda r: fd(lambda s: prof.capped_M(s, eps), r, 1e-9)
    assert d(eps * 0.999) == pytest.approx(d(eps * 1.001), rel=1e-2)
    assert np.isfinite(prof.capped_M(0.0, eps))


def test_mollified_agrees_outside_eps():
    prof = SingularProfile((0, 0), LOGLIP)
    r = np.array([0.02, 0.1, 0.2])
    np.testing.assert_allclose(prof.mollified(r, 0.01), prof.radial(r))


def test_profile_vanishes_beyond_support_and_is_radial():
    prof = SingularProfile((0.5, 0.5), LOGLIP)
    assert prof(np.array([0.5 + prof.r_end, 0.5])) == 0.0
    a = prof(np.array([0.5 + 0.05, 0.5]))
    b = prof(np.array([0.5, 0.5 - 0.05]))
    assert a == pytest.approx(b)


def test_invalid_profiles():
    with pytest.raises(DomainError):
        SingularProfile((0, 0), LOGLIP, shape="cubic")
    with pytest.raises(DomainError):
        SingularProfile((0, 0), LOGLIP, r_cut=0.3, r_end=0.2)
    with pytest.raises(DomainError):
        SingularProfile((0, 0), LOGLIP, shape="power", shape_param=2.0)


def test_default_support_stops_where_M_is_one():
    prof = SingularProfile((0, 0), LOGLIP)
    assert float(prof.M(prof.r_end)) == pytest.approx(1.0, rel=1e-9)
    assert prof.r_end == pytest.approx(math.exp(-math.e))
