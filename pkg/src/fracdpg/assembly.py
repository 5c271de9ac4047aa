"""Discrete DPG system: rectangular B, block-diagonal Theta and load vector.

Bilinear form (ultra-weak, first-order system sigma = Du,
-D D^{alpha-2} sigma + b Du + c u = f):

    b(sigma, u, sigma^, u^; tau, v) = (sigma, tau) + (D^{alpha-2} sigma, D_T v) + (b sigma, v)
                                    + (u, D_T tau) + (c u, v)
                                    - <u^, [tau]> - <sigma^, [v]>

with the jump at node x_i taken as [w]_i = w(x_i^-) - w(x_i^+), missing
traces at x = 0 and x = 1 counted as zero. With this sign the exact data
(u^ = u at interior nodes, sigma^ = D^{alpha-2} sigma at all nodes) satisfy
the discrete equations exactly.

Test rows are grouped per element: m+1 tau functions, then n+1 v functions.
Trial columns: sigma ((p+1)N), u ((q+1)N), sigma^ (N+1), u^ (N-1).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg, sparse

from .fractional import FractionalOrder, coupling_matrix
from .meshing import Mesh
from .polyquad import EndpointSingular, basis_values, gauss_legendre, integrate_against_basis
from .sobolev import element_tt_gram, element_vv_gram

__all__ = ["ProblemData", "TrialLayout", "TestLayout", "SystemMatrices", "SplitMatrix",
           "assemble_B", "assemble_B_split", "assemble_theta", "assemble_load", "assemble_system",
           "exact_trial_vector"]

log = logging.getLogger(__name__)


def _as_function(c):
    if callable(c):
        return c
    value = float(c)
    return lambda x: np.full(np.shape(x), value)


@dataclass(frozen=True)
class ProblemData:
    """Coefficients and right-hand side of the model problem.

    ``exact`` optionally carries the exact solution (see experiments.ExactBundle).
    ``b_prime`` is only used to check c - b'/2 >= 0; it is finite-differenced
    when not given.
    """
    order: FractionalOrder
    b: Callable | float = 0.0
    c: Callable | float = 0.0
    rhs: Callable | EndpointSingular = 0.0
    exact: object = None
    b_prime: Callable | None = None
    name: str = ""

    def __post_init__(self):
        x = np.linspace(0.0, 1.0, 1001)
        bfun, cfun = _as_function(self.b), _as_function(self.c)
        if self.b_prime is not None:
            db = np.asarray(self.b_prime(x), dtype=float) * np.ones_like(x)
        else:
            db = np.gradient(np.asarray(bfun(x), dtype=float) * np.ones_like(x), x)
        if np.min(cfun(x) - 0.5 * db) < -1e-8:
            raise ValueError("coefficients violate c - b'/2 >= 0")

    @property
    def alpha(self) -> float:
        return self.order.alpha

    @property
    def beta(self) -> float:
        return self.order.beta

    def b_fun(self, x):
        return _as_function(self.b)(x)

    def c_fun(self, x):
        return _as_function(self.c)(x)


@dataclass(frozen=True)
class TrialLayout:
    mesh: Mesh
    p: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("trial degrees must be nonnegative")

    @property
    def N(self) -> int:
        return self.mesh.n_elements

    @property
    def sigma(self) -> slice:
        return slice(0, (self.p + 1) * self.N)

    @property
    def u(self) -> slice:
        start = self.sigma.stop
        return slice(start, start + (self.q + 1) * self.N)

    @property
    def sigma_hat(self) -> slice:
        start = self.u.stop
        return slice(start, start + self.N + 1)

    @property
    def u_hat(self) -> slice:
        start = self.sigma_hat.stop
        return slice(start, start + self.N - 1)

    @property
    def dim(self) -> int:
        return (self.p + self.q + 4) * self.N


@dataclass(frozen=True)
class TestLayout:
    __test__ = False  # not a pytest test class
    mesh: Mesh
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValueError("test degrees must be nonnegative")

    @property
    def N(self) -> int:
        return self.mesh.n_elements

    @property
    def block(self) -> int:
        return self.m + self.n + 2

    @property
    def dim(self) -> int:
        return self.block * self.N

    def tau_rows(self, e: int) -> slice:
        start = e * self.block
        return slice(start, start + self.m + 1)

    def v_rows(self, e: int) -> slice:
        start = e * self.block + self.m + 1
        return slice(start, start + self.n + 1)

    def rows(self, e: int) -> slice:
        return slice(e * self.block, (e + 1) * self.block)

    def element_of_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.N), self.block)


class SplitMatrix:
    """B stored as a dense block of sigma columns plus a sparse remainder.

    Only the sigma columns couple distant elements (through the fractional
    integral); all other columns touch at most two elements.
    """

    def __init__(self, dense, dense_cols: slice, rest):
        self.dense = np.asarray(dense, dtype=float)
        self.dense_cols = dense_cols
        self.rest = sparse.csr_matrix(rest)
        self.shape = self.rest.shape

    @classmethod
    def from_dense(cls, B, dense_cols: slice | None = None):
        B = np.asarray(B, dtype=float)
        dense_cols = dense_cols or slice(0, B.shape[1])
        rest = B.copy()
        rest[:, dense_cols] = 0.0
        return cls(B[:, dense_cols], dense_cols, rest)

    def __matmul__(self, x):
        x = np.asarray(x, dtype=float)
        return self.rest @ x + self.dense @ x[self.dense_cols]

    def rmatvec(self, y):
        """B^T y."""
        out = self.rest.T @ y
        out[self.dense_cols] += self.dense.T @ y
        return out

    def toarray(self) -> np.ndarray:
        B = self.rest.toarray()
        B[:, self.dense_cols] += self.dense
        return B


@dataclass
class SystemMatrices:
    B: SplitMatrix
    theta_blocks: np.ndarray    # (N, block, block)
    load: np.ndarray
    trial: TrialLayout
    test: TestLayout

    @property
    def theta(self) -> np.ndarray:
        """Theta as a dense matrix (for tests and small problems)."""
        return linalg.block_diag(*self.theta_blocks)


def _quad_points(layout: TrialLayout, test: TestLayout) -> int:
    return 2 * max(layout.p, layout.q, test.m, test.n) + 6


def assemble_B(mesh: Mesh, layout: TrialLayout, m: int, n: int, data: ProblemData) -> np.ndarray:
    """Dense B; see :func:`assemble_B_split` for the storage used by the solver."""
    return assemble_B_split(mesh, layout, m, n, data).toarray()


def assemble_B_split(mesh: Mesh, layout: TrialLayout, m: int, n: int, data: ProblemData) -> SplitMatrix:
    if layout.mesh is not mesh and layout.mesh != mesh:
        raise ValueError("trial layout belongs to a different mesh")
    test = TestLayout(mesh, m, n)
    p, q, N = layout.p, layout.q, layout.N
    nsig = N * (p + 1)
    D = np.zeros((test.dim, nsig))
    rows, cols, vals = [], [], []

    def put(r: slice, c, block):
        block = np.asarray(block, dtype=float).reshape(r.stop - r.start, -1)
        rr, cc = np.meshgrid(np.arange(r.start, r.stop), np.atleast_1d(c), indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(block.ravel())

    rule = gauss_legendre(_quad_points(layout, test))
    t, w = rule.nodes, rule.weights
    V, dV = basis_values(t, max(p, q, m, n))
    h, a = mesh.h, mesh.left
    x = a[:, None] + h[:, None] * t[None, :]
    bx = np.asarray(data.b_fun(x), dtype=float) * np.ones_like(x)
    cx = np.asarray(data.c_fun(x), dtype=float) * np.ones_like(x)
    ends, _ = basis_values([0.0, 1.0], max(m, n))
    left_val, right_val = ends[0], ends[1]

    tau_sigma = (V[:, :m + 1] * w[:, None]).T @ V[:, :p + 1]      # int_0^1 P_k P_j
    tau_u = (dV[:, :m + 1] * w[:, None]).T @ V[:, :q + 1]         # int_0^1 P_k' P_j
    for e in range(N):
        tr, vr = test.tau_rows(e), test.v_rows(e)
        sc = slice(e * (p + 1), (e + 1) * (p + 1))
        uc = np.arange(layout.u.start + e * (q + 1), layout.u.start + (e + 1) * (q + 1))
        D[tr, sc] = h[e] * tau_sigma
        D[vr, sc] = (V[:, :n + 1] * (h[e] * w * bx[e])[:, None]).T @ V[:, :p + 1]
        put(tr, uc, tau_u)
        put(vr, uc, (V[:, :n + 1] * (h[e] * w * cx[e])[:, None]).T @ V[:, :q + 1])
        # -<sigma^, [v]> with [v]_e = -v(x_e^+), [v]_{e+1} = v(x_{e+1}^-)
        put(vr, layout.sigma_hat.start + e, left_val[:n + 1])
        put(vr, layout.sigma_hat.start + e + 1, -right_val[:n + 1])
        # -<u^, [tau]> on interior nodes only; u^ column i-1 belongs to node i
        if e >= 1:
            put(tr, layout.u_hat.start + e - 1, left_val[:m + 1])
        if e + 1 <= N - 1:
            put(tr, layout.u_hat.start + e, -right_val[:m + 1])

    # fractional coupling (D^{alpha-2} sigma, D_T v), dense lower block triangle
    F = coupling_matrix(mesh, data.beta, p, n)
    v_idx = (np.arange(N)[:, None] * test.block + m + 1 + np.arange(n + 1)[None, :]).ravel()
    D[v_idx] += F
    del F
    rest = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(test.dim, layout.dim))
    return SplitMatrix(D, layout.sigma, rest)


def assemble_theta(mesh: Mesh, m: int, n: int, alpha: float) -> np.ndarray:
    """Theta blocks, shape (N, m+n+2, m+n+2); block e = diag(H^1 Gram, H^{alpha/2} Gram)."""
    N = mesh.n_elements
    size = m + n + 2
    blocks = np.zeros((N, size, size))
    for e in range(N):
        el = mesh.element(e)
        blocks[e, :m + 1, :m + 1] = element_tt_gram(el, m)
        blocks[e, m + 1:, m + 1:] = element_vv_gram(el, n, alpha)
    return blocks


def assemble_load(mesh: Mesh, m: int, n: int, data: ProblemData, n_points: int | None = None) -> np.ndarray:
    test = TestLayout(mesh, m, n)
    rhs = data.rhs if callable(data.rhs) else _as_function(data.rhs)
    M = integrate_against_basis(rhs, mesh, n, n_points or 2 * max(m, n) + 6)
    f = np.zeros(test.dim)
    f.reshape(mesh.n_elements, test.block)[:, m + 1:] = M
    return f


def assemble_system(mesh: Mesh, p: int, q: int, m: int, n: int, data: ProblemData) -> SystemMatrices:
    layout = TrialLayout(mesh, p, q)
    test = TestLayout(mesh, m, n)
    if m < p + 1 or n < q + 1:
        log.warning("test degrees m=%d, n=%d are low for trial degrees p=%d, q=%d; "
                    "the discrete problem may not be well posed", m, n, p, q)
    return SystemMatrices(
        B=assemble_B_split(mesh, layout, m, n, data),
        theta_blocks=assemble_theta(mesh, m, n, data.alpha),
        load=assemble_load(mesh, m, n, data),
        trial=layout,
        test=test,
    )


def exact_trial_vector(layout: TrialLayout, sigma, u, frac_trace) -> np.ndarray:
    """Trial vector built from L2 projections of sigma, u and exact nodal traces.

    Arguments are callables or :class:`EndpointSingular` instances.
    """
    from .polyquad import l2_project

    mesh = layout.mesh
    x = np.zeros(layout.dim)
    x[layout.sigma] = l2_project(sigma, mesh, layout.p, 24).coeffs.ravel()
    x[layout.u] = l2_project(u, mesh, layout.q, 24).coeffs.ravel()
    x[layout.sigma_hat] = frac_trace(mesh.nodes)
    x[layout.u_hat] = u(mesh.nodes[1:-1])
    return x
