import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osgood_lab import flow as F
from osgood_lab.errors import PreconditionError
from osgood_lab.modulus import ModulusSpec
from osgood_lab.profile import SingularProfile

LIP = ModulusSpec.lipschitz()
LOGLIP = ModulusSpec.log_lipschitz()

coords = st.floats(-1.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(coords, coords, st.floats(0.1, 2.0))
def test_hyperbolic_matches_closed_form(a, b, t):
    u = F.Hyperbolic()
    x = np.array([a, b])
    np.testing.assert_allclose(F.flow_map(u, x, t, tol=1e-12), u.exact(x, t), rtol=1e-9, atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(coords, coords, st.floats(0.1, 3.0))
def test_inverse_flow_roundtrip(a, b, t):
    u = F.RigidRotation(1.3, (0.2, -0.1))
    x = np.array([a, b])
    back = F.inverse_flow(u, F.flow_map(u, x, t, tol=1e-12), t, tol=1e-12)
    np.testing.assert_allclose(back, x, atol=1e-9)


def test_rigid_rotation_quarter_turn():
    np.testing.assert_allclose(F.flow_map(F.RigidRotation(1.0), [1.0, 0.0], math.pi / 2), [0.0, 1.0],
                               atol=1e-9)


@pytest.mark.parametrize("u", [F.Hyperbolic(), F.RigidRotation(0.7), F.BahouriChemin(16)])
def test_flows_preserve_area(u):
    x = np.array([[0.05, 0.02], [-0.1, 0.3], [0.2, -0.2]])
    np.testing.assert_allclose(F.jacobian_determinant(u, x, 0.5), 1.0, atol=1e-5)


def test_radial_vortex_preserves_radius():
    prof = SingularProfile((0, 0), LOGLIP)
    x0 = np.array([[0.01, 0.02], [0.05, 0.0], [1e-5, 0.0]])
    tr = F.integrate_flow(F.RadialVortex(prof), x0, 2.0, tol=1e-11)
    r = np.hypot(tr.positions[..., 0], tr.positions[..., 1])
    np.testing.assert_allclose(r, np.broadcast_to(np.hypot(*x0.T), r.shape), rtol=1e-8)


def test_stable_line_pairs_sit_on_the_lower_bracket():
    d = np.array([1.0, -1.0]) / math.sqrt(2)
    xs = np.outer([0.01, -0.05], d)
    ys = np.outer([0.03, 0.04], d)
    for c in F.certify_pairs(F.Hyperbolic(), LIP, xs, ys, 1.0):
        assert c.ratio == pytest.approx(math.exp(-1), rel=1e-9)
        assert c.passed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_random_pairs_satisfy_osgood_bracket(seed):
    rng = np.random.default_rng(seed)
    xs, ys = rng.uniform(-0.1, 0.1, (2, 8, 2))
    for c in F.certify_pairs(F.Hyperbolic(), LIP, xs, ys, 1.0):
        assert c.lower - 1e-9 <= c.ratio <= c.upper + 1e-9


def test_certify_rejects_large_separation():
    with pytest.raises(PreconditionError):
        F.certify_pairs(F.Hyperbolic(), LIP, [[0.0, 0.0]], [[0.6, 0.0]], 1.0)


def test_bahouri_chemin_separation_is_superlinear():
    # above the truncation scale 1/K the amplification |phi_t(a)| / a keeps
    # growing as a shrinks, which no Lipschitz flow can do
    K = 256
    a = np.geomspace(0.1, 2.0 / K, 6)
    end = F.flow_map(F.BahouriChemin(K), np.stack([a, 0 * a], axis=-1), 1.0, tol=1e-12)
    gain = end[:, 0] / a
    assert np.all(np.diff(gain) > 0)
    tab = F.bahouri_chemin_axis_table(K, 1.0, a)
    assert np.all(tab["exponent_ratio"] < 1.0)


def test_bahouri_chemin_is_odd_and_vanishes_on_axes():
    bc = F.BahouriChemin(32)
    x = np.array([0.2, 0.3])
    np.testing.assert_allclose(bc(-x), -bc(x), atol=1e-12)
    assert abs(bc(np.array([0.3, 0.0]))[1]) < 1e-12
