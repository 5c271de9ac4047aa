"""Benchmark problems, error quantities and uniform/adaptive convergence loops."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma

from .assembly import ProblemData, assemble_system
from .fractional import FractionalOrder
from .meshing import Mesh, doerfler_mark, refine, uniform_mesh
from .polyquad import EndpointSingular, basis_values, gauss_legendre, graded_gauss
from .solver import DpgSolution, solve

__all__ = ["ExactBundle", "ConvergenceRecord", "example1", "example2", "example3",
           "error_norms", "run_convergence", "fit_eoc", "SolverFailure"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExactBundle:
    u: Callable
    sigma: Callable
    frac_trace: Callable          # D^{alpha-2} sigma
    r: float = np.inf             # Sobolev regularity of u
    s: float = np.inf             # Sobolev regularity of sigma


@dataclass
class ConvergenceRecord:
    step: int
    N: int
    dofs: int
    est: float
    err_u: float | None = None
    err_sigma: float | None = None
    err_uhat: float | None = None
    err_sigmahat: float | None = None
    seconds: float = 0.0

    def as_dict(self):
        return asdict(self)


class SolverFailure(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause


def example1(alpha: float = 1.5) -> ProblemData:
    """u(x) = x^2 - x^3 with b = c = 1/2."""
    order = FractionalOrder(alpha)
    rhs = EndpointSingular(
        smooth=lambda x: -0.5 * x ** 3 - x ** 2 + x,
        powers=((-2.0 * gamma(2.0) / gamma(3.0 - alpha), 2.0 - alpha),
                (3.0 * gamma(3.0) / gamma(4.0 - alpha), 3.0 - alpha)),
        name="example1")
    exact = ExactBundle(
        u=lambda x: x ** 2 - x ** 3,
        sigma=lambda x: 2.0 * x - 3.0 * x ** 2,
        frac_trace=lambda x: (2.0 * gamma(2.0) / gamma(4.0 - alpha) * x ** (3.0 - alpha)
                              - 3.0 * gamma(3.0) / gamma(5.0 - alpha) * x ** (4.0 - alpha)),
    )
    return ProblemData(order, b=0.5, c=0.5, rhs=rhs, exact=exact, b_prime=lambda x: 0.0 * x,
                       name="example1")


def example2(lam: float = 0.6, alpha: float = 1.2) -> ProblemData:
    """u(x) = x^lam - x with b = c = 0, singular at x = 0."""
    if not 0.5 < lam < 1.5:
        raise ValueError(f"lambda must lie in (1/2, 3/2), got {lam}")
    order = FractionalOrder(alpha)
    rhs = EndpointSingular(
        powers=((-gamma(lam + 1.0) / gamma(lam + 1.0 - alpha), lam - alpha),
                (1.0 / gamma(2.0 - alpha), 1.0 - alpha)),
        name="example2")
    exact = ExactBundle(
        u=lambda x: x ** lam - x,
        sigma=EndpointSingular(smooth=lambda x: -1.0 + 0.0 * x, powers=((lam, lam - 1.0),)),
        frac_trace=lambda x: (gamma(lam + 1.0) / gamma(lam + 2.0 - alpha) * x ** (lam + 1.0 - alpha)
                              - x ** (2.0 - alpha) / gamma(3.0 - alpha)),
        r=lam + 0.5, s=lam - 0.5)
    return ProblemData(order, b=0.0, c=0.0, rhs=rhs, exact=exact, name="example2")


def example3(alpha: float = 1.6) -> ProblemData:
    """f(x) = log(x), b = c = 0; exact solution unknown."""
    order = FractionalOrder(alpha)
    return ProblemData(order, b=0.0, c=0.0, rhs=EndpointSingular(log_coef=1.0, name="log"),
                       name="example3")


def _element_integral(mesh: Mesh, integrand, nq: int = 24) -> np.ndarray:
    """Per-element integrals of integrand(x, element_index, t); graded rule on the element at 0."""
    h, a = mesh.h, mesh.left
    out = np.empty(mesh.n_elements)
    rule = gauss_legendre(nq)
    if mesh.n_elements > 1:
        e = np.arange(1, mesh.n_elements)
        x = a[e, None] + h[e, None] * rule.nodes
        out[1:] = h[1:] * (integrand(x, e[:, None], rule.nodes[None, :]) @ rule.weights)
    g = graded_gauss()
    x0 = a[0] + h[0] * g.nodes
    out[0] = h[0] * (integrand(x0, np.zeros(g.nodes.size, dtype=int), g.nodes) @ g.weights)
    return out


def _pp_local(coeffs, degree):
    def ev(idx, t):
        idx, t = np.broadcast_arrays(idx, t)
        V, _ = basis_values(t.ravel(), degree)
        return np.einsum("ij,ij->i", V, coeffs[idx.ravel()]).reshape(t.shape)
    return ev


def error_norms(solution: DpgSolution, exact: ExactBundle | None, mesh: Mesh | None = None,
                alpha: float | None = None, weighted_sigma: bool = True):
    """(err_u, err_sigma, err_uhat, err_sigmahat).

    err_sigma = || (N h)^(1 - alpha/2) (sigma - sigma_h) || with h the local
    element length; the weight is 1 on uniform meshes, so this is the plain L2
    error there.
    """
    if exact is None:
        raise ValueError("error quantities need an exact solution")
    mesh = mesh or solution.trial.mesh
    N = mesh.n_elements
    p, q = solution.trial.p, solution.trial.q
    uh = _pp_local(solution.u_h.coeffs, q)
    sh = _pp_local(solution.sigma_h.coeffs, p)
    eu = _element_integral(mesh, lambda x, e, t: (exact.u(x) - uh(e, t)) ** 2)
    es = _element_integral(mesh, lambda x, e, t: (exact.sigma(x) - sh(e, t)) ** 2)
    err_u = float(np.sqrt(eu.sum()))
    if weighted_sigma:
        if alpha is None:
            raise ValueError("alpha is required for the weighted sigma error")
        w = (N * mesh.h) ** (2.0 - alpha)
        err_sigma = float(np.sqrt(np.sum(w * es)))
    else:
        err_sigma = float(np.sqrt(es.sum()))
    err_uhat = float(np.linalg.norm(exact.u(mesh.nodes[1:-1]) - solution.u_hat) / np.sqrt(N))
    err_sigmahat = float(np.linalg.norm(exact.frac_trace(mesh.nodes) - solution.sigma_hat) / np.sqrt(N))
    return err_u, err_sigma, err_uhat, err_sigmahat


def run_convergence(problem: ProblemData, p: int, q: int, m: int, n: int, theta: float = 1.0,
                    n_steps: int = 8, N0: int = 2, dof_budget: int = 30000,
                    on_step: Callable | None = None, mesh: Mesh | None = None):
    """Solve, estimate, mark and refine, ``n_steps`` times or until the dof budget.

    ``on_step(record, mesh, solution)`` is called after every solve.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    mesh = mesh or uniform_mesh(N0)
    records = []
    for step in range(n_steps):
        dofs = (p + q + 4) * mesh.n_elements
        if dofs > dof_budget:
            log.info("dof budget %d reached before step %d", dof_budget, step)
            break
        t0 = time.perf_counter()
        try:
            system = assemble_system(mesh, p, q, m, n, problem)
            sol = solve(system)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SolverFailure(step, exc) from exc
        rec = ConvergenceRecord(step=step, N=mesh.n_elements, dofs=dofs, est=sol.est)
        if problem.exact is not None:
            rec.err_u, rec.err_sigma, rec.err_uhat, rec.err_sigmahat = error_norms(
                sol, problem.exact, mesh, problem.alpha)
        rec.seconds = time.perf_counter() - t0
        records.append(rec)
        if on_step is not None:
            on_step(rec, mesh, sol)
        if step == n_steps - 1:
            break
        if theta == 1.0:
            marked = range(mesh.n_elements)
        else:
            marked = doerfler_mark(sol.est_local ** 2, theta)
            if not marked:
                break
        mesh = refine(mesh, marked)
    return records


def fit_eoc(records, quantity="est", tail_count: int = 4, n_range: float | None = None) -> float:
    """Least-squares slope of -log(quantity) against log(N) over the last records.

    With ``n_range`` the fit uses every record with N >= N_last / n_range
    instead of the last ``tail_count`` records. Adaptive runs grow N by a few
    percent per step, so a fixed count of records spans too short a range of
    N for a stable slope.
    """
    get = quantity if callable(quantity) else (lambda r: getattr(r, quantity))
    records = list(records)
    if n_range is not None and records:
        tail = [r for r in records if r.N * n_range >= records[-1].N]
    else:
        tail = records[-tail_count:]
    if len(tail) < 2:
        raise ValueError("need at least two records to fit a rate")
    N = np.array([r.N for r in tail], dtype=float)
    y = np.array([get(r) for r in tail], dtype=float)
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError(f"quantity {quantity!r} must be positive to fit a rate")
    lx = np.log(N) - np.log(N).mean()
    ly = np.log(y) - np.log(y).mean()
    if not np.any(lx):
        raise ValueError("need at least two distinct N to fit a rate")
    return float(-(lx @ ly) / (lx @ lx)) + 0.0
