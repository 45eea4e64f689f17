import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from comroot import DensityParams, default_k, log_g


def test_value_at_root_is_eta_power():
    p = DensityParams(1, 1e-2)
    assert log_g(0.0, p) == pytest.approx(9.210340371976182, rel=1e-14)
    assert math.exp(log_g(0.0, p)) == pytest.approx(1e4, rel=1e-12)


def test_simple_values():
    assert log_g(1.0, DensityParams(3, 0.0)) == 0.0
    assert log_g(3.0, DensityParams(1, 4.0)) == pytest.approx(-math.log(25.0), rel=1e-15)


def test_exact_hit_is_infinite_only_without_eta():
    assert log_g(0.0, DensityParams(2, 0.0)) == math.inf
    assert math.isfinite(log_g(0.0, DensityParams(2, 1e-300)))
    # tiny but nonzero f must not underflow into an exact hit
    assert log_g(1e-200, DensityParams(1, 0.0)) == pytest.approx(2 * 200 * math.log(10))


def test_large_k_no_overflow():
    v = log_g(0.0, DensityParams(5, 1e-8))
    assert v == pytest.approx(-5 * math.log(1e-16))
    assert math.isfinite(log_g(0.0, DensityParams(50, 1e-8)))


def test_vectorised():
    vals = log_g(np.array([0.0, 1.0, 3.0]), DensityParams(1, 4.0))
    np.testing.assert_allclose(vals, [-math.log(16), -math.log(17), -math.log(25)], rtol=1e-15)


def test_params_validation():
    with pytest.raises(ValueError):
        DensityParams(0, 1.0)
    with pytest.raises(ValueError):
        DensityParams(1, -1.0)
    with pytest.raises(ValueError):
        DensityParams(1.5, 1.0)


@pytest.mark.parametrize("n,m,k", [(1, 1, 1), (5, 1, 5), (1, 2, 1), (2, 1, 2), (3, 1, 3), (1, 0.5, 2)])
def test_default_k(n, m, k):
    assert default_k(n, m) == k


def _centre_of_mass_1d(f, k, eta, a=-0.4, b=0.6):
    def g(x):
        return 1.0 / (f(x) ** 2 + eta**2) ** k
    den = quad(g, a, b, points=[0.0], limit=500, epsabs=0, epsrel=1e-11)[0]
    num = quad(lambda x: x * g(x), a, b, points=[0.0], limit=500, epsabs=1e-12, epsrel=1e-8)[0]
    return num / den, den


@pytest.mark.parametrize("f,m", [(abs, 1), (lambda x: x * x, 2)], ids=["simple", "double"])
def test_default_k_gives_divergent_density_oracle(f, m):
    # quadrature oracle: with k = default_k the denominator diverges and the
    # centre of mass tends to the root (at 0, off-centre in [-0.4, 0.6])
    k = default_k(1, m)
    etas = [1e-2, 1e-3, 1e-4]
    results = [_centre_of_mass_1d(f, k, eta) for eta in etas]
    dens = [d for _, d in results]
    offsets = [abs(c) for c, _ in results]
    assert dens[0] < dens[1] < dens[2]
    assert dens[2] > 100 * dens[0]
    assert offsets[0] > offsets[1] > offsets[2]
    assert offsets[2] < 1e-3


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.integers(1, 8), st.floats(1e-12, 1.0))
def test_monotone_in_abs_f(a, b, k, eta):
    p = DensityParams(k, eta)
    lo, hi = sorted([a, b])
    if hi - lo > 1e-6 * max(hi, eta):
        assert log_g(lo, p) > log_g(hi, p)
    assert log_g(0.0, p) >= log_g(a, p)


@given(st.floats(1e-100, 1e100), st.integers(1, 6), st.integers(1, 6))
def test_scale_relation_at_zero_eta(f, a, b):
    lhs = log_g(f, DensityParams(a + b, 0.0))
    rhs = log_g(f, DensityParams(a, 0.0)) + log_g(f, DensityParams(b, 0.0))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)
