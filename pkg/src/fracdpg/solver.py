"""Normal equations B^T Theta^{-1} B x = B^T Theta^{-1} f and the energy-norm estimator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse

from .assembly import SplitMatrix, SystemMatrices, TestLayout, TrialLayout
from .polyquad import PiecewisePolynomial

__all__ = ["ThetaFactor", "InfSupError", "DpgSolution", "factor_theta",
           "solve_normal_equations", "estimate", "solve"]

# smallest admissible pivot of the Jacobi-scaled normal matrix, relative to 1
_PIVOT_TOL = 1e-13


class InfSupError(np.linalg.LinAlgError):
    """Raised when B^T Theta^{-1} B is singular: the test space is too small."""


class ThetaFactor:
    """Cholesky factors of the diagonal blocks of Theta."""

    def __init__(self, blocks):
        blocks = np.asarray(blocks, dtype=float)
        L = np.empty_like(blocks)
        for e, G in enumerate(blocks):
            try:
                L[e] = np.linalg.cholesky(G)
            except np.linalg.LinAlgError:
                raise np.linalg.LinAlgError(
                    f"Theta block of element {e} is not positive definite") from None
        self.L = L
        self.block = blocks.shape[1]

    def _split(self, y):
        y = np.asarray(y, dtype=float)
        return y.reshape((self.L.shape[0], self.block) + y.shape[1:])

    def solve_lower(self, y):
        """L^{-1} y, blockwise."""
        Y = self._split(y)
        out = np.empty_like(Y)
        for e, L in enumerate(self.L):
            out[e] = linalg.solve_triangular(L, Y[e], lower=True)
        return out.reshape(np.shape(y))

    def lower_inverse(self) -> sparse.csr_matrix:
        """Block-diagonal L^{-1} as a sparse matrix."""
        if getattr(self, "_Linv", None) is None:
            inv = np.linalg.inv(self.L)
            self._Linv = sparse.block_diag(list(inv), format="csr")
        return self._Linv

    def apply_inverse(self, y):
        """Theta^{-1} y, blockwise."""
        Y = self._split(y)
        out = np.empty_like(Y)
        for e, L in enumerate(self.L):
            out[e] = linalg.cho_solve((L, True), Y[e])
        return out.reshape(np.shape(y))


def factor_theta(theta_blocks) -> ThetaFactor:
    return ThetaFactor(theta_blocks)


@dataclass
class DpgSolution:
    x: np.ndarray
    residual: np.ndarray          # f - B x
    representer: np.ndarray       # Theta^{-1} (f - B x)
    est_local: np.ndarray         # est(T) per element
    trial: TrialLayout
    test: TestLayout

    @property
    def est(self) -> float:
        return float(np.sqrt(np.sum(self.est_local ** 2)))

    @property
    def est_squared_global(self) -> float:
        """r^T Theta^{-1} r as a single dot product."""
        return float(self.residual @ self.representer)

    @property
    def sigma_h(self) -> PiecewisePolynomial:
        return PiecewisePolynomial(self.trial.mesh, self.x[self.trial.sigma])

    @property
    def u_h(self) -> PiecewisePolynomial:
        return PiecewisePolynomial(self.trial.mesh, self.x[self.trial.u])

    @property
    def sigma_hat(self) -> np.ndarray:
        return self.x[self.trial.sigma_hat]

    @property
    def u_hat(self) -> np.ndarray:
        return self.x[self.trial.u_hat]


def solve_normal_equations(B, theta: ThetaFactor, f, trial: TrialLayout | None = None,
                           test: TestLayout | None = None) -> DpgSolution:
    """Solve B^T Theta^{-1} B x = B^T Theta^{-1} f.

    With Theta = L L^T and W = L^{-1} B, the normal matrix is S = W^T W. Its
    triangular factor S = R^T R is obtained by orthogonal reduction of W
    rather than by Cholesky of S itself: on strongly graded meshes W reaches
    condition numbers near 1e9, and squaring them would leave no accurate
    digits in the residual (and hence in the estimator).

    The reduction first eliminates the columns of u, sigma^ and u^ element by
    element (they form a staircase), then factors the dense sigma block.
    """
    if not isinstance(B, SplitMatrix):
        B = SplitMatrix.from_dense(B, trial.sigma if trial is not None else None)
    f = np.asarray(f, dtype=float)
    rows, cols = B.shape
    if f.shape != (rows,) or theta.L.shape[0] * theta.block != rows:
        raise ValueError("dimensions of B, Theta and f do not match")
    if rows < cols:
        raise InfSupError(
            f"discrete inf-sup failure: test space dimension {rows} is below "
            f"trial space dimension {cols}")
    dense = np.arange(cols)[B.dense_cols]
    Bd, Br = B.dense, B.rest
    anchor = None
    if trial is not None and Br.nnz:
        # sigma^ tends to a nonzero constant at a singular endpoint, and the
        # constant-mode test rows of tiny elements only see differences of
        # neighbouring sigma^ values, far below the resolution of the nodal
        # values themselves. Unknowns are therefore sigma^_0 and the offsets
        # sigma^_i - sigma^_0; the column of sigma^_0 becomes the sum of all
        # sigma^ columns and joins the dense block.
        anchor = trial.sigma_hat.start
        hat = np.arange(trial.sigma_hat.start, trial.sigma_hat.stop)
        anchor_col = np.asarray(Br[:, hat].sum(axis=1)).ravel()
        Bd = np.column_stack([Bd, anchor_col])
        Br = Br.tolil()
        Br[:, anchor] = 0.0
        Br = Br.tocsr()
        Br.eliminate_zeros()
        dense = np.append(dense, anchor)
    Linv = theta.lower_inverse()
    g = theta.solve_lower(f)
    Wd = np.asarray(Linv @ Bd)
    Wr = (Linv @ Br).tocsr()
    # Jacobi scaling, so that the pivot test is independent of element sizes
    scale = np.sqrt(np.asarray(Wr.multiply(Wr).sum(axis=0)).ravel())
    scale[dense] = np.sqrt(np.einsum("ij,ij->j", Wd, Wd))
    if np.any(scale == 0.0):
        raise InfSupError("discrete inf-sup failure: a trial function is invisible to all test functions")
    Wd /= scale[dense]
    Wr = Wr @ sparse.diags(1.0 / scale)
    if anchor is not None:
        y = _staircase_lstsq(Wd, Wr.tocsr(), g, trial, theta.block, dense)
    else:
        y = np.empty(cols)
        y[dense] = _dense_lstsq(Wd, g, [])
    z = y / scale
    # residual in the solver's own unknowns, where it is resolved accurately
    r = f - Br @ z - Bd @ z[dense]
    x = z
    if anchor is not None:
        x = z.copy()
        x[anchor + 1:trial.sigma_hat.stop] += z[anchor]
    rho = theta.apply_inverse(r)
    sol = DpgSolution(x=x, residual=r, representer=rho, est_local=np.zeros(theta.L.shape[0]),
                      trial=trial, test=test)
    sol.est_local = estimate(sol, theta.block)
    return sol


def _check_pivots(diagonals):
    piv = np.abs(np.concatenate(diagonals))
    if not np.all(np.isfinite(piv)) or piv.min() <= _PIVOT_TOL * piv.max():
        ratio = piv.min() / piv.max() if piv.max() > 0 else 0.0
        raise InfSupError(
            f"discrete inf-sup failure: normal matrix is numerically singular "
            f"(pivot ratio {ratio:.2e})")


def _dense_lstsq(A, g, local_pivots):
    """min ||g - A y|| via Householder QR of [A g]; A may be overwritten."""
    M, nd = A.shape
    if M < nd:
        raise InfSupError("discrete inf-sup failure: too few test functions for the flux unknowns")
    Ag = np.empty((M, nd + 1), order="F")
    Ag[:, :nd] = A
    Ag[:, nd] = g
    R = linalg.qr(Ag, mode="r", overwrite_a=True, check_finite=False)[0]
    _check_pivots(list(local_pivots) + [np.diag(R)[:nd]])
    return linalg.solve_triangular(R[:nd, :nd], R[:nd, nd], check_finite=False)


def _local_columns(trial: TrialLayout, exclude):
    """Columns of each node (sigma^, and u^ at interior nodes) and of each element's u,
    leaving out the columns in ``exclude``."""
    N, q = trial.N, trial.q
    nodes = [[c for c in [trial.sigma_hat.start + i] + ([trial.u_hat.start + i - 1] if 0 < i < N else [])
              if c not in exclude]
             for i in range(N + 1)]
    elems = [list(range(trial.u.start + e * (q + 1), trial.u.start + (e + 1) * (q + 1)))
             for e in range(N)]
    return nodes, elems


def _staircase_lstsq(Wd, Wr, g, trial: TrialLayout, block: int, dense: np.ndarray) -> np.ndarray:
    """Least-squares solve of [Wd Wr] y = g.

    Element e's rows only touch the local columns of node e, element e and
    node e+1. Sweeping left to right, a small QR per element finalizes the
    columns of node e and element e, carries the triangle for node e+1 to the
    next element, and sends the remaining rows (zero in all local columns)
    to the dense sigma problem.
    """
    N = trial.N
    nd = dense.size
    node_cols, elem_cols = _local_columns(trial, set(dense.tolist()))
    n_local = sum(map(len, node_cols)) + sum(map(len, elem_cols))
    rows = Wd.shape[0]
    red = np.empty((rows - n_local, nd))
    gred = np.empty(rows - n_local)
    steps = []
    pivots = []
    carry_l = np.zeros((0, 0))
    carry_d = np.zeros((0, nd))
    carry_g = np.zeros(0)
    pos = 0
    for e in range(N):
        last = e == N - 1
        fin = node_cols[e] + elem_cols[e] + (node_cols[e + 1] if last else [])
        car = [] if last else node_cols[e + 1]
        nf, nc = len(fin), len(car)
        rs = slice(e * block, (e + 1) * block)
        kc = carry_l.shape[0]
        A = np.zeros((kc + block, nf + nc))
        A[:kc, :carry_l.shape[1]] = carry_l
        A[kc:] = Wr[rs][:, fin + car].toarray()
        if A.shape[0] < nf + nc:
            raise InfSupError(f"discrete inf-sup failure: element {e} has too few test functions")
        Q, R = linalg.qr(A, check_finite=False)
        D = Q.T @ np.vstack([carry_d, Wd[rs]])
        G = Q.T @ np.concatenate([carry_g, g[rs]])
        pivots.append(np.diag(R)[:nf])
        steps.append((fin, car, R[:nf, :nf], R[:nf, nf:], D[:nf], G[:nf]))
        carry_l, carry_d, carry_g = R[nf:nf + nc, nf:], D[nf:nf + nc], G[nf:nf + nc]
        k = D.shape[0] - nf - nc
        red[pos:pos + k] = D[nf + nc:]
        gred[pos:pos + k] = G[nf + nc:]
        pos += k
    y = np.empty(Wd.shape[1] + n_local)
    y[dense] = yd = _dense_lstsq(red[:pos], gred[:pos], pivots)
    for fin, car, Rff, Rfc, Rfd, cf in reversed(steps):
        y[fin] = linalg.solve_triangular(Rff, cf - Rfc @ y[car] - Rfd @ yd, check_finite=False)
    return y


def estimate(solution: DpgSolution, block: int) -> np.ndarray:
    """est(T) = sqrt(sum over the test rows of T of r_j (Theta^{-1} r)_j)."""
    contrib = (solution.residual * solution.representer).reshape(-1, block).sum(axis=1)
    if contrib.min() < -1e-12 * max(1.0, contrib.max()):
        raise ArithmeticError("negative local estimator contribution beyond roundoff")
    return np.sqrt(np.maximum(contrib, 0.0))


def solve(system: SystemMatrices) -> DpgSolution:
    factor = factor_theta(system.theta_blocks)
    return solve_normal_equations(system.B, factor, system.load, system.trial, system.test)
