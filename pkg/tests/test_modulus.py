import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from osgood_lab import modulus as mod
from osgood_lab.errors import DomainError

LIP = mod.ModulusSpec.lipschitz()
LOGLIP = mod.ModulusSpec.log_lipschitz()


def mp_M(L, z, m):
    """Independent Osgood integral by mpmath quadrature in s = log(1/r)."""
    f = lambda s: mpmath.exp(-s) / L(mpmath.exp(-s))
    return float(mpmath.quad(f, [-mpmath.log(m), -mpmath.log(z)]))


@pytest.mark.parametrize("z", [1e-8, 1e-4, 0.01, 0.2])
def test_log_lipschitz_M_matches_quadrature(z):
    L = lambda r: r * mpmath.log(1 / r)
    assert mod.eval_M(LOGLIP, z) == pytest.approx(mp_M(L, z, math.exp(-1)), rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_chain_M_matches_quadrature(n):
    spec = mod.ModulusSpec.iterated_log_chain(n)

    def L(r):
        out, v = r, mpmath.log(1 / r)
        for _ in range(n):
            out, v = out * v, mpmath.log(v)
        return out

    z = spec.m_L * 1e-3
    assert mod.eval_M(spec, z) == pytest.approx(mp_M(L, z, spec.m_L), rel=1e-8)


def test_lipschitz_closed_forms():
    z = np.array([1e-6, 0.1, 0.5])
    np.testing.assert_allclose(mod.eval_M(LIP, z), np.log(1 / z))
    np.testing.assert_allclose(mod.eval_R(LIP, z), z)


def test_R_is_one_at_top():
    assert mod.eval_R(LOGLIP, LOGLIP.m_L) == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(2e-3, 0.99))
def test_R_inverse_roundtrip(w):
    z = mod.eval_R_inv(LOGLIP, w)
    assert mod.eval_R(LOGLIP, z) == pytest.approx(w, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-10, 0.3), st.floats(1.01, 3.0))
def test_M_strictly_decreasing(z, factor):
    assert mod.eval_M(LOGLIP, z) > mod.eval_M(LOGLIP, min(z * factor, LOGLIP.m_L))


def test_derivatives_by_finite_difference():
    z, h = 0.01, 1e-7
    dM = (mod.eval_M(LOGLIP, z + h) - mod.eval_M(LOGLIP, z - h)) / (2 * h)
    assert mod.eval_dM(LOGLIP, z) == pytest.approx(dM, rel=1e-6)
    d2 = (mod.eval_dM(LOGLIP, z + h) - mod.eval_dM(LOGLIP, z - h)) / (2 * h)
    assert mod.eval_d2M(LOGLIP, z) == pytest.approx(d2, rel=1e-5)


def test_custom_table_reproduces_named_modulus(tmp_path):
    z = np.geomspace(1e-12, math.exp(-1), 400)
    path = tmp_path / "L.txt"
    np.savetxt(path, np.column_stack([z, z * np.log(1 / z)]))
    spec = mod.ModulusSpec.from_file(path)
    q = np.array([1e-9, 1e-5, 0.05])
    np.testing.assert_allclose(mod.eval_M(spec, q), mod.eval_M(LOGLIP, q), rtol=1e-5)


def test_domain_errors():
    with pytest.raises(DomainError):
        mod.eval_R_inv(LOGLIP, 1e-5)
    with pytest.raises(DomainError):
        mod.eval_M(LOGLIP, 0.9)
    with pytest.raises(DomainError):
        mod.ModulusSpec.iterated_log_chain(4)
    with pytest.raises(DomainError):
        mod.mu_factor(-1.0)


def test_mu_factor_and_integral():
    g = mod.mu_factor(mod.modulus_integral(2.0, 0.5))
    assert g.mu == pytest.approx(math.e)
    assert mod.modulus_integral([(0.0, 1.0), (1.0, 3.0)], 2.0) == pytest.approx(4.0)
