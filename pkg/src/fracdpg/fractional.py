"""Riemann-Liouville fractional integrals of order beta = 2 - alpha.

Left-sided:  (D^{-beta} u)(x)   = 1/Gamma(beta) int_0^x (x - s)^(beta-1) u(s) ds
Right-sided: (D_1^{-beta} u)(x) = 1/Gamma(beta) int_x^1 (s - x)^(beta-1) u(s) ds

For assembly we need the coupling integrals

    F[T, k; S, j] = int_T (D^{-beta} phi_{S,j})(x) psi_{T,k}'(x) dx

between trial functions on S and test functions on T. They vanish for S
right of T. Pairs with S = T or S the left neighbour of T are handled with
closed-form fractional monomial integrals, because the kernel is singular
there. Separated pairs have a smooth kernel and use tensor Gauss rules whose
size depends on the separation; expanding into monomials there would cancel
catastrophically.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, log10, sqrt

import numpy as np
from scipy.special import gamma

from .meshing import Mesh
from .polyquad import (PiecewisePolynomial, basis_values, derivative_monomial_coefficients,
                       fractional_monomial_integral, gauss_legendre, monomial_coefficients)

__all__ = ["FractionalOrder", "rl_left_monomial", "rl_left_apply", "rl_right_apply",
           "frac_coupling_entry", "pair_block", "coupling_matrix", "separated_points"]


@dataclass(frozen=True)
class FractionalOrder:
    alpha: float

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")

    @property
    def beta(self) -> float:
        return 2.0 - self.alpha


def _check_beta(beta):
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")


@lru_cache(maxsize=None)
def _gamma_ratios(beta: float, kmax: int) -> np.ndarray:
    """g_i = Gamma(i + 1) / Gamma(i + 1 + beta), i.e. D^{-beta} s^i = g_i x^(i + beta)."""
    i = np.arange(kmax + 1, dtype=float)
    g = gamma(i + 1.0) / gamma(i + 1.0 + beta)
    g.flags.writeable = False
    return g


def rl_left_monomial(beta: float, k: int, x):
    """(D^{-beta} s^k)(x) = Gamma(k+1)/Gamma(k+1+beta) x^(k+beta)."""
    _check_beta(beta)
    if k < 0:
        raise ValueError("k must be nonnegative")
    x = np.asarray(x, dtype=float)
    return gamma(k + 1.0) / gamma(k + 1.0 + beta) * x ** (k + beta)


def separated_points(d: float, degree: int) -> int:
    """Gauss points per direction for a kernel whose singularity sits at
    normalized distance ``d`` (in half-element lengths) from the element."""
    R = 1.0 + d
    rho = 0.8 * (R + sqrt(R * R - 1.0))
    n = int(np.ceil(16.5 / (2.0 * log10(rho)))) + (degree + 1) // 2 + 2
    return min(max(n, 4), 48)


# --- pointwise application -------------------------------------------------

def _element_left_values(coeffs, beta, a, h, x):
    """D^{-beta} of one element's polynomial at points x >= a, closed form.

    Only accurate while (x - a) / h stays O(1).
    """
    deg = coeffs.size - 1
    A = monomial_coefficients(deg)
    g = _gamma_ratios(beta, deg)
    m = coeffs @ A                      # monomial coefficients in y = (s - a)/h
    y = (x - a) / h
    out = np.zeros_like(y)
    inside = y <= 1.0
    yi = y[inside]
    for i in range(deg + 1):
        out[inside] += m[i] * g[i] * yi ** (i + beta)
    yo = y[~inside]
    for i in range(deg + 1):
        acc = g[i] * yo ** (i + beta)
        for r in range(i + 1):
            acc -= comb(i, r) * g[r] * (yo - 1.0) ** (r + beta)
        out[~inside] += m[i] * acc
    return h ** beta * out


def _element_left_values_gauss(coeffs, beta, a, h, x):
    deg = coeffs.size - 1
    d = 2.0 * (x.min() - (a + h)) / h
    rule = gauss_legendre(separated_points(d, deg))
    V, _ = basis_values(rule.nodes, deg)
    s = a + h * rule.nodes
    phi = V @ coeffs
    K = (x[:, None] - s[None, :]) ** (beta - 1.0)
    return h * (K @ (rule.weights * phi)) / gamma(beta)


def rl_left_apply(sigma: PiecewisePolynomial, beta: float, x):
    """(D^{-beta} sigma)(x) for a piecewise polynomial sigma."""
    _check_beta(beta)
    x = np.asarray(x, dtype=float)
    xf = x.ravel()
    mesh = sigma.mesh
    out = np.zeros_like(xf)
    for e in range(mesh.n_elements):
        a, b = mesh.element(e)
        h = b - a
        c = sigma.coeffs[e]
        if not np.any(c):
            continue
        near = (xf > a) & (xf <= b + 2.0 * h)
        far = xf > b + 2.0 * h
        if near.any():
            out[near] += _element_left_values(c, beta, a, h, xf[near])
        if far.any():
            out[far] += _element_left_values_gauss(c, beta, a, h, xf[far])
    return out.reshape(x.shape)


def rl_right_apply(v: PiecewisePolynomial, beta: float, x):
    """(D_1^{-beta} v)(x), computed as the left-sided operator of v(1 - .) at 1 - x."""
    x = np.asarray(x, dtype=float)
    return rl_left_apply(v.reflected(), beta, 1.0 - x)


# --- coupling blocks ---------------------------------------------------------

@lru_cache(maxsize=None)
def _self_block(beta: float, p: int, n: int) -> np.ndarray:
    """Reference block for S = T = (0, 1); the physical block is h^beta times this."""
    A = monomial_coefficients(p)
    Dd = derivative_monomial_coefficients(n)
    g = _gamma_ratios(beta, p)
    E = np.array([[fractional_monomial_integral(beta, i + l) for l in range(Dd.shape[1])]
                  for i in range(p + 1)])
    out = Dd @ (E.T * g[None, :]) @ A.T   # [k, j] = sum_{i,l} D[k,l] E[i,l] g_i A[j,i]
    out.flags.writeable = False
    return out


def _adjacent_block(beta, p, n, rho):
    """Reference block for S = (0, 1), T = (1, 1 + rho), scaled by h_S^beta."""
    A = monomial_coefficients(p)
    Dd = derivative_monomial_coefficients(n)
    g = _gamma_ratios(beta, p)
    # smooth part: int_0^1 (1 + rho z)^(i + beta) P_k'(z) dz
    rule = gauss_legendre(n // 2 + p // 2 + 16)
    _, dV = basis_values(rule.nodes, n)
    z = rule.nodes
    smooth = np.array([(rule.weights * (1.0 + rho * z) ** (i + beta)) @ dV
                       for i in range(p + 1)])            # [i, k]
    # singular part: sum_r C(i,r) g_r rho^(r+beta) int_0^1 z^(r+beta) P_k'(z) dz
    E = np.array([[fractional_monomial_integral(beta, r + l) for l in range(Dd.shape[1])]
                  for r in range(p + 1)])
    sing_r = rho ** (np.arange(p + 1) + beta)[:, None] * (E @ Dd.T)   # [r, k]
    sing = np.array([sum(comb(i, r) * g[r] * sing_r[r] for r in range(i + 1))
                     for i in range(p + 1)])                # [i, k]
    W = g[:, None] * smooth - sing                          # [i, k]
    return (A @ W).T                                        # [k, j]


def _separated_blocks(beta, p, n, s0, hs, t0, ht, nq):
    rule = gauss_legendre(nq)
    V, _ = basis_values(rule.nodes, p)
    _, dV = basis_values(rule.nodes, n)
    wV = rule.weights[:, None] * V
    wdV = rule.weights[:, None] * dV
    s = s0[:, None] + hs[:, None] * rule.nodes[None, :]
    x = t0[:, None] + ht[:, None] * rule.nodes[None, :]
    K = (x[:, None, :] - s[:, :, None]) ** (beta - 1.0)    # [pair, a (s), b (x)]
    blocks = np.einsum("pab,aj,bk->pkj", K, wV, wdV, optimize=True)
    return blocks * (hs / gamma(beta))[:, None, None]


def pair_block(beta: float, p: int, n: int, S: tuple[float, float], T: tuple[float, float],
               adjacent_tol: float = 1e-14) -> np.ndarray:
    """(n+1) x (p+1) coupling block between trial element S and test element T."""
    _check_beta(beta)
    s0, s1 = S
    t0, t1 = T
    hs, ht = s1 - s0, t1 - t0
    if s0 >= t1 - adjacent_tol * ht:
        return np.zeros((n + 1, p + 1))
    if abs(s0 - t0) <= adjacent_tol * ht and abs(s1 - t1) <= adjacent_tol * ht:
        return hs ** beta * _self_block(beta, p, n)
    if abs(s1 - t0) <= adjacent_tol * ht:
        return hs ** beta * _adjacent_block(beta, p, n, ht / hs)
    if s1 < t0:
        d = 2.0 * (t0 - s1) / max(hs, ht)
        nq = separated_points(d, max(p, n))
        return _separated_blocks(beta, p, n, np.array([s0]), np.array([hs]),
                                 np.array([t0]), np.array([ht]), nq)[0]
    raise ValueError("elements overlap without coinciding")


def frac_coupling_entry(mesh: Mesh, S: int, j: int, T: int, k: int, beta: float,
                        p: int | None = None, n: int | None = None) -> float:
    """int_T (D^{-beta} phi_{S,j}) psi_{T,k}' dx for basis indices j (trial) and k (test)."""
    p = j if p is None else p
    n = k if n is None else n
    if S > T:
        return 0.0
    return float(pair_block(beta, p, n, mesh.element(S), mesh.element(T))[k, j])


def coupling_matrix(mesh: Mesh, beta: float, p: int, n: int, chunk: int = 20000) -> np.ndarray:
    """Dense matrix F with rows (T, k) for test degree n and columns (S, j) for trial degree p.

    Block (T, S) is zero for S right of T, so F is block lower triangular.
    """
    _check_beta(beta)
    N = mesh.n_elements
    h = mesh.h
    a = mesh.left
    F = np.zeros((N, n + 1, N, p + 1))
    self_ref = _self_block(beta, p, n)
    for e in range(N):
        F[e, :, e, :] = h[e] ** beta * self_ref
    for e in range(N - 1):
        F[e + 1, :, e, :] = h[e] ** beta * _adjacent_block(beta, p, n, h[e + 1] / h[e])
    if N > 2:
        iT, iS = np.tril_indices(N, k=-2)
        gap = a[iT] - (a[iS] + h[iS])
        d = 2.0 * gap / np.maximum(h[iS], h[iT])
        rep, inverse = _unique_round(d)
        nq_pair = np.array([separated_points(di, max(p, n)) for di in rep])[inverse]
        for q in np.unique(nq_pair):
            sel = np.flatnonzero(nq_pair == q)
            step = max(1, chunk * 64 // (q * q))
            for lo in range(0, sel.size, step):
                idx = sel[lo:lo + step]
                S_, T_ = iS[idx], iT[idx]
                F[T_, :, S_, :] = _separated_blocks(beta, p, n, a[S_], h[S_], a[T_], h[T_], q)
    return F.reshape(N * (n + 1), N * (p + 1))


def _unique_round(d):
    # separation classes are shared by many pairs; evaluate the point rule once per class
    key = np.floor(np.log2(np.maximum(d, 1e-300)) * 8.0)
    uniq, inverse = np.unique(key, return_inverse=True)
    rep = np.full(uniq.size, np.inf)
    np.minimum.at(rep, inverse, d)
    return rep, inverse
