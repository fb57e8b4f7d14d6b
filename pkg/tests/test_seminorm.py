import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osgood_lab import seminorm as sn
from osgood_lab.errors import DomainError
from osgood_lab.fields import Grid, ScalarField2D
from osgood_lab.modulus import ModulusSpec
from osgood_lab.profile import SingularProfile

LOGLIP = ModulusSpec.log_lipschitz()


@pytest.mark.parametrize("p", [2.0, 8.0, 64.0, 256.0])
def test_log_lp_norm_has_gamma_closed_form(p):
    # int_{B_1} log(1/r)^p = 2 pi Gamma(p+1) / 2^(p+1)
    exact = math.log(2 * math.pi) + math.lgamma(p + 1) - (p + 1) * math.log(2)
    assert sn.log_lp_integral(1, p) == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("p", [4.0, 32.0])
def test_loglog_lp_norm_matches_mpmath(p):
    f = lambda s: mpmath.log(s) ** p * mpmath.exp(-2 * s)
    ref = 2 * mpmath.pi * mpmath.quad(f, [1, p, mpmath.inf])
    assert sn.log_lp_integral(2, p) == pytest.approx(float(mpmath.log(ref)), rel=1e-9)


def test_growth_ratio_stabilizes_at_large_p():
    rows = sn.iterated_log_lp_growth(2, [64.0, 128.0, 256.0])
    assert np.all(sn.relative_changes(rows) < 0.15)
    assert all(0.1 <= r.ratio <= 10 for r in rows)


def test_reference_is_negative_for_depth_three_at_p_two():
    row = sn.iterated_log_lp_growth(3, [2.0])[0]
    assert row.reference == pytest.approx(math.log(math.log(2)))
    assert row.ratio < 0


def test_lp_norm_of_constant_on_torus():
    f = ScalarField2D(Grid.torus(32), np.full((32, 32), 3.0))
    area = (2 * math.pi) ** 2
    assert sn.lp_norm(f, 2.0) == pytest.approx(3.0 * area**0.5)
    assert sn.lp_norm(f, math.inf) == 3.0


@settings(max_examples=30, deadline=None)
@given(st.floats(1.0, 50.0), st.floats(1.0, 50.0))
def test_lp_norm_monotone_in_p_on_probability_space(p, q):
    # on a domain of unit area, ||f||_p increases with p
    g = Grid.box((0.0, 0.0), 0.5, 32)
    f = ScalarField2D(g, np.random.default_rng(1).normal(size=(32, 32)))
    lo, hi = sorted((p, q))
    assert sn.lp_norm(f, lo) <= sn.lp_norm(f, hi) * (1 + 1e-12)


def test_theta_aliases():
    assert sn.theta("const", 8.0) == 1.0
    assert sn.theta("log", 8.0) == pytest.approx(math.log(8))
    assert sn.theta("loglog", 8.0) == pytest.approx(math.log(math.log(8)))
    with pytest.raises(DomainError):
        sn.theta("nope", 2.0)


def test_yudovich_ratio_of_bounded_field_is_flat():
    f = ScalarField2D(Grid.torus(32), np.ones((32, 32)))
    rep = sn.yudovich_norm(f, "const", p_grid=[2.0, 4.0, 8.0])
    assert rep.trend == "bounded"
    assert rep.p_at_sup == 2.0


@pytest.mark.parametrize("gamma_amp", [0.5, 1.0, 2.0])
def test_local_seminorm_of_exact_profile(gamma_amp):
    prof = SingularProfile((0.0, 0.0), LOGLIP, gamma=gamma_amp, r_cut=0.04, r_end=0.06)
    grid = Grid.box((0.0, 0.0), 0.0204, 512)
    f = ScalarField2D.from_function(grid, prof)
    radii = np.geomspace(0.02, 0.02 / 16, 5)
    tab = sn.local_seminorm(f, LOGLIP, (0.0, 0.0), 1.0, radii, center_value=0.0)
    assert tab.limit == pytest.approx(gamma_amp, rel=1e-6)


def test_smooth_field_has_zero_seminorm_limit():
    grid = Grid.box((0.0, 0.0), 0.0204, 256)
    f = ScalarField2D.from_function(grid, lambda x: np.sin(x[..., 0] + x[..., 1]))
    radii = np.geomspace(0.02, 0.02 / 8, 4)
    tab = sn.local_seminorm(f, LOGLIP, (0.0, 0.0), 1.0, radii)
    assert tab.values[-1] < tab.values[0]
    assert abs(tab.limit) < 0.05
