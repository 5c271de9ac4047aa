import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate
from scipy.special import gamma

from fracdpg.meshing import Mesh
from fracdpg.polyquad import basis_values
from fracdpg.solver import factor_theta


def random_mesh(rng, n_elements: int, spread: float = 1.8) -> Mesh:
    """Random non-dyadic mesh whose neighbouring lengths differ by at most ``spread``."""
    h = np.empty(n_elements)
    h[0] = 1.0
    for i in range(1, n_elements):
        h[i] = h[i - 1] * spread ** rng.uniform(-1.0, 1.0)
    nodes = np.concatenate(([0.0], np.cumsum(h) / h.sum()))
    nodes[-1] = 1.0
    return Mesh(nodes)


def alg_quad(fun, lo, hi, wvar):
    """QUADPACK with the algebraic end-point weight (x - lo)^wvar[0] (hi - x)^wvar[1]."""
    return integrate.quad(fun, lo, hi, weight="alg", wvar=wvar, epsabs=0.0, epsrel=1e-13,
                          limit=200)[0]


def quad_seminorm(a, b, k, l, alpha):
    """Slobodeckij inner product of two basis functions on (a, b), by nested quadrature."""
    h = b - a
    # physical basis functions as numpy polynomials, fitted through Chebyshev points
    xs = a + h * 0.5 * (1 - np.cos(np.pi * (np.arange(12) + 0.5) / 12))
    V, _ = basis_values((xs - a) / h, max(k, l))
    psi = [Polynomial.fit(xs, V[:, d], d, domain=[a, b], window=[a, b]) for d in (k, l)]

    def quotient(x):
        # (psi(y) - psi(x)) / (y - x) as an exact polynomial in y
        return [Polynomial(np.polydiv((p - p(x)).coef[::-1], [1.0, -x])[0][::-1]) for p in psi]

    e = 1.0 - alpha

    def outer(x):
        qk, ql = quotient(x)
        f = qk * ql
        return alg_quad(f, a, x, (0.0, e)) + alg_quad(f, x, b, (e, 0.0))

    return integrate.quad(outer, a, b, epsabs=0.0, epsrel=1e-11, limit=200)[0]


def quad_moments(alpha, kmax):
    """I[i, j] = int int x^i y^j |x - y|^(1 - alpha) by nested adaptive quadrature."""
    e = 1.0 - alpha

    def row(x):
        # inner integral over y, split at the singular point y = x
        g = np.array([alg_quad(lambda y: y ** j, 0.0, x, (0.0, e)) + alg_quad(lambda y: y ** j, x, 1.0, (e, 0.0))
                      for j in range(kmax + 1)])
        return x ** np.arange(kmax + 1)[:, None] * g[None, :]

    val, _ = integrate.quad_vec(row, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=400)
    return val


def quad_left_monomial(beta, k, x):
    # weight (x - s)^(beta - 1) handled exactly by QUADPACK's algebraic weight
    val, _ = integrate.quad(lambda s: s ** k, 0.0, x, weight="alg", wvar=(0.0, beta - 1.0),
                            epsabs=0.0, epsrel=1e-13, limit=200)
    return val / gamma(beta)


def basis_fun(element, j):
    a, b = element
    return lambda s: basis_values(np.atleast_1d((s - a) / (b - a)), j)[0][0, j]


def basis_dfun(element, k):
    a, b = element
    return lambda x: basis_values(np.atleast_1d((x - a) / (b - a)), k)[1][0, k] / (b - a)


def quad_coupling(S, j, T, k, beta):
    """Nested adaptive quadrature of int_T (D^{-beta} phi_{S,j})(x) psi_{T,k}'(x) dx."""
    phi = basis_fun(S, j)
    dpsi = basis_dfun(T, k)
    s0, s1 = S

    def inner_to(lo, x):
        # int_lo^x (x - s)^(beta - 1) phi(s) ds with phi continued as a polynomial
        if x <= lo:
            return 0.0
        return integrate.quad(phi, lo, x, weight="alg", wvar=(0.0, beta - 1.0),
                              epsabs=0.0, epsrel=1e-13, limit=200)[0]

    def inner(x):
        if x <= s1:
            return inner_to(s0, x) / gamma(beta)
        if x - s1 >= s1 - s0:
            # smooth kernel: integrate directly, the split below would cancel
            return integrate.quad(lambda s: (x - s) ** (beta - 1.0) * phi(s), s0, s1,
                                  epsabs=0.0, epsrel=1e-13, limit=200)[0] / gamma(beta)
        return (inner_to(s0, x) - inner_to(s1, x)) / gamma(beta)

    val, _ = integrate.quad(lambda x: inner(x) * dpsi(x), T[0], T[1], epsabs=0.0,
                            epsrel=1e-12, limit=200)
    return val


def galerkin_defect(system, sol):
    """||B^T Theta^-1 r|| relative to ||B^T Theta^-1 f|| (absolute when f = 0)."""
    fac = factor_theta(system.theta_blocks)
    lhs = np.linalg.norm(system.B.rmatvec(sol.representer))
    rhs = np.linalg.norm(system.B.rmatvec(fac.apply_inverse(system.load)))
    return lhs / rhs if rhs > 0 else lhs
