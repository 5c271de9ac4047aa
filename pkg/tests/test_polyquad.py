import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fracdpg.meshing import Mesh, uniform_mesh
from fracdpg.polyquad import (EndpointSingular, PiecewisePolynomial, basis_values,
                              fractional_monomial_integral, gauss_jacobi, gauss_legendre,
                              integrate_against_basis, l2_project, monomial_coefficients,
                              reference_basis_eval)


def test_reference_basis_values():
    assert reference_basis_eval(0, 0.3)[0] == pytest.approx(1.0)
    assert reference_basis_eval(1, 0.5)[0] == pytest.approx(0.0, abs=1e-15)
    rule = gauss_legendre(3)
    V, _ = basis_values(rule.nodes, 2)
    assert rule.weights @ V[:, 2] ** 2 == pytest.approx(1.0, rel=1e-14)


def test_basis_orthonormal_and_derivatives():
    rule = gauss_legendre(12)
    V, dV = basis_values(rule.nodes, 8)
    assert np.allclose((V * rule.weights[:, None]).T @ V, np.eye(9), atol=1e-13)
    # derivative check against finite differences
    t = np.linspace(0.1, 0.9, 7)
    eps = 1e-6
    Vp, _ = basis_values(t + eps, 8)
    Vm, _ = basis_values(t - eps, 8)
    _, dVt = basis_values(t, 8)
    assert np.allclose((Vp - Vm) / (2 * eps), dVt, rtol=1e-6, atol=1e-6)


def test_basis_matches_monomial_expansion():
    rng = np.random.default_rng(0)
    t = rng.random(20)
    V, _ = basis_values(t, 6)
    A = monomial_coefficients(6)
    mono = t[:, None] ** np.arange(7)
    assert np.allclose(V, mono @ A.T, atol=1e-11)


def test_gauss_legendre_examples():
    r = gauss_legendre(1)
    assert r.nodes[0] == pytest.approx(0.5) and r.weights[0] == pytest.approx(1.0)
    assert gauss_legendre(2).integrate(lambda t: t ** 3) == pytest.approx(0.25, rel=1e-14)
    assert gauss_legendre(5).integrate(np.exp) == pytest.approx(math.e - 1, rel=1e-12)
    with pytest.raises(ValueError):
        gauss_legendre(0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 15), st.integers(0, 2 ** 31))
def test_gauss_legendre_exactness(n, seed):
    c = np.random.default_rng(seed).normal(size=2 * n)
    exact = sum(ci / (i + 1) for i, ci in enumerate(c))
    val = gauss_legendre(n).integrate(lambda t: np.polyval(c[::-1], t))
    assert val == pytest.approx(exact, rel=1e-12, abs=1e-12 * np.abs(c).sum())


def test_gauss_jacobi_examples():
    r = gauss_jacobi(1, 0.0, 0.0)
    assert r.nodes[0] == pytest.approx(0.5) and r.weights[0] == pytest.approx(1.0)
    assert gauss_jacobi(2, -0.5, 0.0).integrate(lambda t: t) == pytest.approx(4 / 3, rel=1e-13)
    assert gauss_jacobi(1, -0.5, 0.0).integrate(lambda t: 1 + 0 * t) == pytest.approx(2.0, rel=1e-13)
    with pytest.raises(ValueError):
        gauss_jacobi(3, -1.0, 0.0)
    with pytest.raises(ValueError):
        gauss_jacobi(3, 0.0, -1.5)


@pytest.mark.parametrize("a,b", [(-0.4, 0.0), (0.0, -0.6), (0.3, 0.7), (-0.8, -0.2)])
def test_gauss_jacobi_exactness(a, b):
    from scipy.special import beta
    n = 6
    r = gauss_jacobi(n, a, b)
    assert np.all(r.weights > 0)
    for k in range(2 * n):
        # int_0^1 (1-t)^a t^(b+k) dt = B(b+k+1, a+1)
        assert r.integrate(lambda t: t ** k) == pytest.approx(beta(b + k + 1, a + 1), rel=1e-13)


def test_fractional_monomial_integral():
    assert fractional_monomial_integral(0.0, 1) == pytest.approx(0.5)
    assert fractional_monomial_integral(-0.5, 0) == pytest.approx(2.0)
    oracle = integrate.quad(lambda u: u ** 2.7, 0.25, 0.5, epsabs=0, epsrel=1e-13)[0]
    assert fractional_monomial_integral(0.7, 2, (0.25, 0.5)) == pytest.approx(oracle, rel=1e-12)
    with pytest.raises(ValueError):
        fractional_monomial_integral(-1.5, 0)


def test_projection_reproduces_polynomial():
    f = lambda x: x ** 2 - x ** 3
    P = l2_project(f, Mesh([0, 0.3, 0.45, 0.7, 1]), 3)
    x = np.linspace(0, 1, 101)
    assert np.max(np.abs(P(x) - f(x))) <= 1e-12


def test_projection_means():
    P = l2_project(lambda x: x, uniform_mesh(2), 0)
    assert np.allclose(P(np.array([0.1, 0.9])), [0.25, 0.75])


def test_singular_projection_matches_quadrature():
    f = EndpointSingular(powers=((1.0, -0.4),))
    mesh = uniform_mesh(4)
    M = integrate_against_basis(f, mesh, 1)
    for e in range(4):
        a, b = mesh.element(e)
        for k in range(2):
            g = lambda x: reference_basis_eval(k, (x - a) / (b - a))[0]
            if e == 0:
                oracle = integrate.quad(g, a, b, weight="alg", wvar=(-0.4, 0), epsabs=0, epsrel=1e-13)[0]
            else:
                oracle = integrate.quad(lambda x: x ** -0.4 * g(x), a, b, epsabs=0, epsrel=1e-13)[0]
            assert M[e, k] == pytest.approx(oracle, rel=1e-9, abs=1e-12)


def test_log_moments_first_element():
    h = 0.125
    M = integrate_against_basis(EndpointSingular(log_coef=1.0), uniform_mesh(8), 0)
    assert M[0, 0] == pytest.approx(h * (math.log(h) - 1), rel=1e-13)
    assert M.sum() == pytest.approx(-1.0, rel=1e-12)


def test_nonintegrable_rejected():
    with pytest.raises(ValueError):
        EndpointSingular(powers=((1.0, -1.0),))


def test_projection_idempotent_and_orthogonal():
    mesh = Mesh([0, 0.2, 0.35, 0.6, 1])
    f = lambda x: np.sin(5 * x) + np.exp(x)
    P = l2_project(f, mesh, 3)
    PP = l2_project(P, mesh, 3)
    assert np.allclose(PP.coeffs, P.coeffs, atol=1e-13)
    resid = integrate_against_basis(lambda x: f(x) - P(x), mesh, 3, n_points=40)
    assert np.max(np.abs(resid)) <= 1e-10 * np.sqrt(integrate.quad(lambda x: f(x) ** 2, 0, 1)[0])


def test_piecewise_polynomial_ops():
    mesh = uniform_mesh(3)
    rng = np.random.default_rng(1)
    P = PiecewisePolynomial(mesh, rng.normal(size=(3, 3)))
    Q = PiecewisePolynomial(mesh, rng.normal(size=(3, 2)))
    x = np.linspace(0.01, 0.99, 17)
    assert np.allclose((P + Q)(x), P(x) + Q(x))
    assert np.allclose((P * 2.5)(x), 2.5 * P(x))
    assert np.allclose(P.reflected()(1 - x), P(x))
    assert P.l2_norm() == pytest.approx(np.sqrt(np.sum(P.coeffs ** 2 / 3)))
    left, right = P.traces()
    assert np.allclose(left, P(mesh.left + 1e-15), atol=1e-10)
    with pytest.raises(ValueError):
        PiecewisePolynomial(mesh, np.zeros((2, 2)))
