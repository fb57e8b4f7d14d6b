import math

import numpy as np
import pytest

from osgood_lab import transport as T
from osgood_lab.errors import DomainError
from osgood_lab.fields import Grid
from osgood_lab.flow import Hyperbolic, RigidRotation
from osgood_lab.modulus import ModulusSpec
from osgood_lab.profile import SingularProfile

LOGLIP = ModulusSpec.log_lipschitz()


def bump(x):
    return np.exp(-20 * ((x[..., 0] - 0.3) ** 2 + x[..., 1] ** 2))


@pytest.mark.parametrize("t", [0.3, 1.0])
def test_rigid_rotation_transport_is_exact(t):
    u = RigidRotation(1.0)
    grid = Grid.box((0.0, 0.0), 0.6, 48)
    theta = T.solve_transport(u, bump, t, grid, tol=1e-12)
    c, s = math.cos(t), math.sin(t)
    pts = grid.points()
    back = np.stack([c * pts[..., 0] + s * pts[..., 1], -s * pts[..., 0] + c * pts[..., 1]], axis=-1)
    np.testing.assert_allclose(theta.values, bump(back), atol=1e-9)


def test_transport_preserves_range():
    grid = Grid.box((0.0, 0.0), 0.5, 32)
    theta = T.solve_transport(Hyperbolic(), bump, 0.5, grid)
    assert theta.values.max() <= 1.0 + 1e-12
    assert theta.values.min() >= 0.0


@pytest.mark.parametrize("u", [RigidRotation(1.0), Hyperbolic()])
@pytest.mark.parametrize("shape,param", [("identity", 1.0), ("sin", 0.3)])
def test_remainder_bound_short_time(u, shape, param):
    prof = SingularProfile((0.3, 0.1), LOGLIP, shape=shape, shape_param=param)
    rec = T.local_structure_run(u, prof, lambda x: 0.3 * np.cos(x[..., 0] + 2 * x[..., 1]), 0.25, n=96)
    assert rec.passed
    assert rec.sup_b <= rec.bound


def test_remainder_vanishes_for_rotation_about_the_centre():
    prof = SingularProfile((0.0, 0.0), LOGLIP)
    rec = T.local_structure_run(RigidRotation(1.0), prof, None, 0.5, n=96)
    assert rec.sup_b < 1e-8


def test_seminorm_is_preserved_under_rotation():
    x = (0.3, 0.1)
    prof = SingularProfile(x, LOGLIP, r_cut=0.04, r_end=0.06)
    radii = np.geomspace(0.02, 0.02 / 8, 4)
    res = T.seminorm_transport_check(RigidRotation(1.0), LOGLIP, T.InitialData(prof), x, 1.0, 0.5, radii,
                                     n=384)
    assert res.passed
    assert np.all(res.bracket_low <= 1.0) and np.all(res.bracket_high >= 1.0)


def test_superlinear_shape_diverges_and_identity_does_not():
    sq = T.sharpness_experiment("lipschitz_superlinear", "square", 1.0)
    ident = T.sharpness_experiment("lipschitz_superlinear", "identity", 1.0)
    assert sq.slope == pytest.approx(2.0, abs=0.2)
    assert ident.sup_b.max() <= 1.05


def test_sharpness_rejects_radii_outside_core():
    with pytest.raises(DomainError):
        T.sharpness_experiment("lipschitz_superlinear", radii=(0.6,))
    with pytest.raises(DomainError):
        T.sharpness_experiment("bogus")
