"""Reference-element bases, piecewise polynomials, quadrature and L2 projection.

Every element T = (a, b) is mapped to [0, 1] by t = (x - a) / h. On [0, 1]
the basis is the orthonormal Legendre family P_k(t) = sqrt(2k+1) L_k(2t - 1),
so each mass block on T is ``h * I``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, sqrt
from typing import Callable

import numpy as np
from numpy.polynomial import legendre
from scipy import special

from .meshing import Mesh

__all__ = [
    "QuadratureRule", "gauss_legendre", "gauss_jacobi", "graded_gauss",
    "fractional_monomial_integral", "reference_basis_eval", "basis_values",
    "monomial_coefficients", "derivative_monomial_coefficients",
    "PiecewisePolynomial", "EndpointSingular", "integrate_against_basis",
    "l2_project", "MAX_DEGREE",
]

MAX_DEGREE = 8


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on ``interval`` for the weight (1-t)^a t^b (a = b = 0: unit)."""
    nodes: np.ndarray
    weights: np.ndarray
    interval: tuple[float, float] = (0.0, 1.0)
    jacobi: tuple[float, float] = (0.0, 0.0)

    def __len__(self):
        return self.nodes.size

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def mapped(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights on (a, b); only meaningful for unit-weight rules."""
        lo, hi = self.interval
        s = (b - a) / (hi - lo)
        return a + (self.nodes - lo) * s, self.weights * s


def _frozen(*arrays):
    for a in arrays:
        a.flags.writeable = False
    return arrays


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [0, 1], exact up to degree 2n - 1."""
    n = int(n)
    if n < 1:
        raise ValueError("Gauss rules need at least one point")
    x, w = legendre.leggauss(n)
    return QuadratureRule(*_frozen(0.5 * (x + 1.0), 0.5 * w))


@lru_cache(maxsize=None)
def gauss_jacobi(n: int, a: float, b: float) -> QuadratureRule:
    """n-point Gauss rule on [0, 1] for the weight (1 - t)^a t^b."""
    n = int(n)
    if n < 1:
        raise ValueError("Gauss rules need at least one point")
    if a <= -1.0 or b <= -1.0:
        raise ValueError(f"Jacobi exponents must exceed -1, got a={a}, b={b}")
    if a == 0.0 and b == 0.0:
        return gauss_legendre(n)
    # scipy's weight is (1 - x)^a (1 + x)^b on [-1, 1]
    # a + b = -1 triggers a masked 0/0 inside scipy's recurrence; the result is fine
    with np.errstate(divide="ignore", invalid="ignore"):
        x, w = special.roots_jacobi(n, a, b)
    t = 0.5 * (x + 1.0)
    w = w / 2.0 ** (a + b + 1.0)
    return QuadratureRule(*_frozen(t, w), jacobi=(float(a), float(b)))


@lru_cache(maxsize=None)
def graded_gauss(n: int = 20, levels: int = 40, ratio: float = 0.15) -> QuadratureRule:
    """Composite Gauss-Legendre rule on [0, 1] geometrically graded towards 0.

    Converges exponentially for integrands like x^mu * smooth or log(x) * smooth,
    which is what the first element of a singular problem sees.
    """
    edges = np.concatenate(([0.0], ratio ** np.arange(levels, -1, -1)))
    base = gauss_legendre(n)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = base.mapped(lo, hi)
        nodes.append(x)
        weights.append(w)
    return QuadratureRule(*_frozen(np.concatenate(nodes), np.concatenate(weights)))


def fractional_monomial_integral(mu: float, k: int, interval=(0.0, 1.0)) -> float:
    """Integral of u^(mu + k) over [c, d], 0 <= c <= d."""
    c, d = interval
    e = mu + k + 1.0
    if e <= 0.0:
        raise ValueError(f"u^{mu + k} is not integrable at 0")
    if c < 0.0 or d < c:
        raise ValueError("need 0 <= c <= d")
    return (d ** e - c ** e) / e


@lru_cache(maxsize=None)
def monomial_coefficients(degree: int) -> np.ndarray:
    """A[k, i]: coefficient of t^i in P_k(t), k, i <= degree."""
    if degree > MAX_DEGREE:
        raise ValueError(f"degrees above {MAX_DEGREE} are not supported")
    A = np.zeros((degree + 1, degree + 1))
    for k in range(degree + 1):
        for i in range(k + 1):
            A[k, i] = (-1) ** (k + i) * comb(k, i) * comb(k + i, i)
        A[k] *= sqrt(2 * k + 1)
    A.flags.writeable = False
    return A


@lru_cache(maxsize=None)
def derivative_monomial_coefficients(degree: int) -> np.ndarray:
    """D[k, l]: coefficient of t^l in P_k'(t); shape (degree+1, max(degree, 1))."""
    A = monomial_coefficients(degree)
    D = np.zeros((degree + 1, max(degree, 1)))
    for i in range(1, degree + 1):
        D[:, i - 1] = i * A[:, i]
    D.flags.writeable = False
    return D


def basis_values(t, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Values and t-derivatives of P_0..P_degree at points t; shapes (len(t), degree+1)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = 2.0 * t - 1.0
    L = legendre.legvander(x, degree)
    dL = np.zeros_like(L)
    # (1 - x^2) L_k' = k (L_{k-1} - x L_k) breaks down at x = +-1, so use the
    # recurrence L_k' = L_{k-2}' + (2k - 1) L_{k-1}
    for k in range(1, degree + 1):
        dL[:, k] = (2 * k - 1) * L[:, k - 1] + (dL[:, k - 2] if k >= 2 else 0.0)
    scale = np.sqrt(2 * np.arange(degree + 1) + 1.0)
    return L * scale, 2.0 * dL * scale


def reference_basis_eval(k: int, t: float) -> tuple[float, float]:
    if k < 0:
        raise ValueError("basis index must be nonnegative")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    v, d = basis_values([t], k)
    return float(v[0, k]), float(d[0, k])


class PiecewisePolynomial:
    """Elementwise polynomial of fixed degree, one coefficient row per element."""

    def __init__(self, mesh: Mesh, coeffs):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(mesh.n_elements, -1)
        if coeffs.shape[0] != mesh.n_elements or coeffs.shape[1] < 1:
            raise ValueError(
                f"coefficient array of shape {coeffs.shape} does not fit a mesh "
                f"with {mesh.n_elements} elements")
        coeffs.flags.writeable = False
        self.mesh = mesh
        self.coeffs = coeffs

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @classmethod
    def zeros(cls, mesh, degree):
        return cls(mesh, np.zeros((mesh.n_elements, degree + 1)))

    def _local(self, x, element=None):
        x = np.asarray(x, dtype=float)
        idx = self.mesh.locate(x) if element is None else np.broadcast_to(element, x.shape)
        a = self.mesh.left[idx]
        h = self.mesh.h[idx]
        return idx, np.clip((x - a) / h, 0.0, 1.0), h

    def __call__(self, x, element=None):
        """Evaluate at x; pass ``element`` to choose the side at a node."""
        x = np.asarray(x, dtype=float)
        idx, t, _ = self._local(x.ravel(), None if element is None else np.ravel(element))
        V, _ = basis_values(t, self.degree)
        return np.einsum("ij,ij->i", V, self.coeffs[idx]).reshape(x.shape)

    def derivative(self, x, element=None):
        x = np.asarray(x, dtype=float)
        idx, t, h = self._local(x.ravel(), None if element is None else np.ravel(element))
        _, dV = basis_values(t, self.degree)
        return (np.einsum("ij,ij->i", dV, self.coeffs[idx]) / h).reshape(x.shape)

    def traces(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-element values at the left and right element ends."""
        V, _ = basis_values([0.0, 1.0], self.degree)
        return self.coeffs @ V[0], self.coeffs @ V[1]

    def reflected(self) -> "PiecewisePolynomial":
        """v(1 - x) on the reflected mesh; uses P_k(1 - t) = (-1)^k P_k(t)."""
        sign = (-1.0) ** np.arange(self.degree + 1)
        return PiecewisePolynomial(self.mesh.reflected(), self.coeffs[::-1] * sign)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.mesh.h[:, None] * self.coeffs ** 2)))

    def __add__(self, other):
        if not isinstance(other, PiecewisePolynomial) or other.mesh != self.mesh:
            return NotImplemented
        d = max(self.degree, other.degree)
        return PiecewisePolynomial(self.mesh, _pad(self.coeffs, d) + _pad(other.coeffs, d))

    def __mul__(self, scalar):
        return PiecewisePolynomial(self.mesh, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"PiecewisePolynomial(N={self.mesh.n_elements}, degree={self.degree})"


def _pad(c, d):
    return np.pad(c, ((0, 0), (0, d + 1 - c.shape[1])))


@dataclass(frozen=True)
class EndpointSingular:
    """f(x) = smooth(x) + sum_i c_i x^mu_i + log_coef * log(x).

    The split tells the integrators which pieces need singular rules on the
    element touching x = 0.
    """
    smooth: Callable | None = None
    powers: tuple[tuple[float, float], ...] = ()
    log_coef: float = 0.0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for _, mu in self.powers:
            if mu <= -1.0:
                raise ValueError(f"x^{mu} is not integrable at 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x) if self.smooth is None else np.asarray(self.smooth(x), dtype=float) + 0.0 * x
        with np.errstate(divide="ignore"):
            for c, mu in self.powers:
                out = out + c * x ** mu
            if self.log_coef:
                out = out + self.log_coef * np.log(x)
        return out


def _smooth_points(degree: int) -> int:
    return 2 * degree + 6


def integrate_against_basis(f, mesh: Mesh, degree: int, n_points: int | None = None) -> np.ndarray:
    """M[T, k] = integral over T of f(x) P_k((x - a_T)/h_T) dx.

    ``f`` is a vectorized callable or an :class:`EndpointSingular`; for the
    latter, power and log terms get exact treatment on the element at x = 0
    and a high-order rule elsewhere.
    """
    nq = n_points or _smooth_points(degree)
    h = mesh.h
    a = mesh.left
    if isinstance(f, EndpointSingular):
        out = np.zeros((mesh.n_elements, degree + 1))
        if f.smooth is not None:
            out += _gauss_moments(f.smooth, a, h, degree, nq)
        for c, mu in f.powers:
            if mu == int(mu) and mu >= 0:
                out += _gauss_moments(lambda x, mu=mu: c * x ** mu, a, h, degree,
                                      max(nq, degree + int(mu) // 2 + 2))
                continue
            # first element (a = 0): weight t^mu, exact for polynomial P_k
            rule = gauss_jacobi(degree // 2 + 1, 0.0, mu)
            V, _ = basis_values(rule.nodes, degree)
            out[0] += c * h[0] ** (mu + 1.0) * (rule.weights @ V)
            out[1:] += _gauss_moments(lambda x, mu=mu: c * x ** mu, a[1:], h[1:], degree,
                                      max(nq, 24 + degree))
        if f.log_coef:
            out += f.log_coef * _log_moments(a, h, degree, max(nq, 24 + degree))
        return out
    return _gauss_moments(f, a, h, degree, nq)


def _gauss_moments(f, a, h, degree, nq):
    rule = gauss_legendre(nq)
    V, _ = basis_values(rule.nodes, degree)
    x = a[:, None] + h[:, None] * rule.nodes[None, :]
    fx = np.asarray(f(x), dtype=float) * np.ones_like(x)
    return (h[:, None] * fx * rule.weights) @ V


def _log_moments(a, h, degree, nq):
    out = _gauss_moments(np.log, a[1:], h[1:], degree, nq) if a.size > 1 else np.zeros((0, degree + 1))
    # on (0, h): log(h t) = log h + log t, and int_0^1 t^i log t dt = -1/(i+1)^2
    A = monomial_coefficients(degree)
    i = np.arange(degree + 1)
    first = h[0] * (np.log(h[0]) * A @ (1.0 / (i + 1.0)) - A @ (1.0 / (i + 1.0) ** 2))
    return np.vstack([first, out])


def l2_project(f, mesh: Mesh, degree: int, n_points: int | None = None) -> PiecewisePolynomial:
    """Elementwise L2-orthogonal projection onto polynomials of the given degree."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    M = integrate_against_basis(f, mesh, degree, n_points)
    return PiecewisePolynomial(mesh, M / mesh.h[:, None])
