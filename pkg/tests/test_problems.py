import numpy as np
import pytest
from scipy.optimize import brentq

from ptcfem.errors import UnknownProblem
from ptcfem.mesh import build_initial_mesh
from ptcfem.problems import (builtin, compute_L, compute_mu, list_problems,
                             stability_constants, sup_over_range)


def test_registry():
    assert list_problems() == ["ginzburg-landau", "manufactured-linear", "sine-gordon"]
    with pytest.raises(UnknownProblem):
        builtin("allen-cahn")
    with pytest.raises(KeyError):
        builtin("allen-cahn")


@pytest.mark.parametrize("name", ["sine-gordon", "ginzburg-landau", "manufactured-linear"])
def test_derivative_consistency(name):
    spec = builtin(name)
    x = np.random.default_rng(0).uniform(-2, 2, 100)
    h = 1e-5
    fd = (spec.f(x + h) - spec.f(x - h)) / (2 * h)
    assert np.abs(fd - spec.f_prime(x)).max() <= 1e-6


def test_sine_gordon_positive_zero():
    f = builtin("sine-gordon").f
    root = brentq(f, 0.0, 1.0, xtol=1e-12)
    assert root == pytest.approx(0.5109734293885691, abs=1e-6)
    assert abs(root - 0.51) < 0.01


def test_ginzburg_landau_zeros_and_oddness():
    spec = builtin("ginzburg-landau")
    np.testing.assert_array_equal(spec.f(np.array([0.0, 1.0, -1.0])), 0.0)
    x = np.linspace(-3, 3, 61)
    np.testing.assert_array_equal(spec.f(-x), -spec.f(x))


def test_manufactured_strong_residual_vanishes():
    eps = 0.03
    spec = builtin("manufactured-linear", eps)
    x = np.random.default_rng(1).uniform(0, 1, (50, 2))
    u = spec.exact_solution(x)
    lap = -2 * np.pi**2 * u
    np.testing.assert_allclose(-eps * lap, spec.reaction(u, x), atol=1e-12)


def test_initial_guesses():
    m = build_initial_mesh(builtin("sine-gordon").domain, 3)
    u0 = builtin("sine-gordon").initial_coefficients(m)
    assert np.all(u0[m.boundary] == 0) and np.all(u0[~m.boundary] == 0.5)
    gl = builtin("ginzburg-landau")
    m = build_initial_mesh(gl.domain, 3)
    assert np.all(gl.initial_coefficients(m)[~m.boundary] == 1.0)
    ml = builtin("manufactured-linear")
    assert not ml.initial_coefficients(m).any()


def test_with_epsilon():
    spec = builtin("manufactured-linear", 1.0).with_epsilon(0.01)
    assert spec.epsilon == 0.01
    x = np.array([[0.5, 0.5]])
    assert spec.source(x)[0] == pytest.approx(2 * np.pi**2 * 0.01 + 1)


def test_compute_mu_examples():
    spec = builtin("sine-gordon", 1.0)
    assert compute_mu(spec, 0.0, 1.0) == 0.5
    assert compute_mu(spec, 1.0, 1.0) is None
    cp = spec.domain.poincare_constant()
    assert compute_mu(spec, 0.0, cp) == pytest.approx(2 * np.pi**2 / (2 * np.pi**2 + 1))
    with pytest.raises(ValueError):
        compute_mu(spec, 0.0, 0.0)


def test_stability_constants():
    spec = builtin("sine-gordon", 0.5)
    sigma = sup_over_range(spec.f_prime, -1.0, 1.0)
    assert sigma == pytest.approx(-1.0 - np.cos(1.0), rel=1e-6)
    c = stability_constants(spec, sigma, 1.0)
    a = 0.5 * 2 * np.pi**2
    assert c.mu == pytest.approx((a - sigma) / (a + 1))
    assert c.L == compute_L(spec, 1.0) == 2.0


def test_gl_not_certified():
    spec = builtin("ginzburg-landau", 1e-5)
    c = stability_constants(spec, 1.0, 6.0)
    assert c.mu is None
