"""Element Gram matrices of the broken test norm H^1(T) x H^{alpha/2}(T).

The Slobodeckij part is computed exactly. Writing v(x) - v(y) = (x - y) dv(x, y)
with a polynomial difference quotient dv, the integrand becomes
|x - y|^(1 - alpha) dv(x, y) dw(x, y), and the double integrals of monomials
against |x - y|^(1 - alpha) are beta functions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import beta as beta_fn

from .polyquad import MAX_DEGREE, basis_values, gauss_legendre, monomial_coefficients

__all__ = ["TestNormSpec", "slobodeckij_reference_moments", "reference_seminorm_gram",
           "element_vv_gram", "element_tt_gram"]


@dataclass(frozen=True)
class TestNormSpec:
    __test__ = False  # not a pytest test class
    alpha: float
    m: int
    n: int

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.m < 0 or self.n < 0:
            raise ValueError("test degrees must be nonnegative")


def _check_alpha(alpha):
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")


@lru_cache(maxsize=None)
def slobodeckij_reference_moments(alpha: float, max_degree: int) -> np.ndarray:
    """I[i, j] = int_0^1 int_0^1 x^i y^j |x - y|^(1 - alpha) dx dy."""
    _check_alpha(alpha)
    if max_degree < 0:
        raise ValueError("max_degree must be nonnegative")
    i = np.arange(max_degree + 1, dtype=float)
    b = beta_fn(i + 1.0, 2.0 - alpha)
    I = (b[None, :] + b[:, None]) / (i[:, None] + i[None, :] + 3.0 - alpha)
    I.flags.writeable = False
    return I


@lru_cache(maxsize=None)
def reference_seminorm_gram(alpha: float, degree: int) -> np.ndarray:
    """Slobodeckij seminorm Gram matrix of P_0..P_degree on (0, 1)."""
    if degree > MAX_DEGREE:
        raise ValueError(f"degrees above {MAX_DEGREE} are not supported")
    I = slobodeckij_reference_moments(alpha, max(2 * degree - 2, 0))
    # monomial Gram: (x^i - y^i)/(x - y) = sum_{a=0}^{i-1} x^a y^(i-1-a)
    M = np.zeros((degree + 1, degree + 1))
    for i in range(1, degree + 1):
        for j in range(1, degree + 1):
            acc = 0.0
            for a in range(i):
                for c in range(j):
                    acc += I[a + c, (i - 1 - a) + (j - 1 - c)]
            M[i, j] = acc
    A = monomial_coefficients(degree)
    G = A @ M @ A.T
    G = 0.5 * (G + G.T)
    G.flags.writeable = False
    return G


@lru_cache(maxsize=None)
def _reference_stiffness(degree: int) -> np.ndarray:
    rule = gauss_legendre(degree + 1)
    _, dV = basis_values(rule.nodes, degree)
    K = (dV * rule.weights[:, None]).T @ dV
    K = 0.5 * (K + K.T)
    K.flags.writeable = False
    return K


def _length(element):
    a, b = element
    h = b - a
    if not h > 0.0:
        raise ValueError(f"degenerate element ({a}, {b})")
    return h


def element_vv_gram(element, degree: int, alpha: float) -> np.ndarray:
    """L2 plus Slobodeckij Gram of the v-test basis on one element.

    The seminorm part scales like h^(1 - alpha) under the affine map.
    """
    h = _length(element)
    _check_alpha(alpha)
    return h * np.eye(degree + 1) + h ** (1.0 - alpha) * reference_seminorm_gram(alpha, degree)


def element_tt_gram(element, degree: int) -> np.ndarray:
    """H^1 Gram of the tau-test basis on one element."""
    h = _length(element)
    return h * np.eye(degree + 1) + _reference_stiffness(degree) / h
