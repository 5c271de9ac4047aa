"""Convergence tables for the smooth solution u(x) = x^2 - x^3.

Prints every error quantity for a low and a higher polynomial degree under
uniform refinement. The lowest order pair converges like N^-1 and the
(1, 1, 3, 3) pair like N^-2. With p = 2 and q = 3 the exact solution lies in
the trial space and everything drops to roundoff.

    python demos/example1_tables.py
"""
from fracdpg import assemble_system, error_norms, example1, fit_eoc, run_convergence, solve, uniform_mesh

problem = example1()
quantities = ("est", "err_u", "err_sigma", "err_uhat", "err_sigmahat")

for degrees in [(0, 0, 2, 2), (1, 1, 3, 3)]:
    records = run_convergence(problem, *degrees, theta=1.0, n_steps=8)
    print(f"(p, q, m, n) = {degrees}")
    print("     N " + "".join(f"{q:>14s}" for q in quantities))
    for r in records:
        print(f"{r.N:6d} " + "".join(f"{getattr(r, q):14.4e}" for q in quantities))
    print("   EOC " + "".join(f"{fit_eoc(records, q):14.2f}" for q in quantities) + "\n")

mesh = uniform_mesh(3)
sol = solve(assemble_system(mesh, 2, 3, 4, 5, problem))
err_u, err_sigma, _, _ = error_norms(sol, problem.exact, mesh, problem.alpha)
print(f"p = 2, q = 3 on three elements: est {sol.est:.1e}, err_u {err_u:.1e}, err_sigma {err_sigma:.1e}")
