"""Logarithmic source f(x) = log(x) with no known exact solution.

Only the estimator is available. Uniform refinement reaches the reduced rate
alpha/2 - 1/2, and adaptive refinement restores p + 1.

    python demos/log_source.py
"""
from fracdpg import example3, fit_eoc, run_convergence

for alpha in (1.6, 1.8):
    records = run_convergence(example3(alpha), 0, 0, 2, 2, theta=1.0, n_steps=10)
    print(f"alpha = {alpha}: uniform EOC(est) = {fit_eoc(records):.3f}"
          f" (reference {alpha / 2 - 0.5:.1f})")

for p in (0, 1):
    records = run_convergence(example3(1.6), p, p, p + 2, p + 2, theta=0.4, n_steps=300,
                              dof_budget=4000)
    print(f"p = {p}: adaptive EOC(est) = {fit_eoc(records, n_range=4.0):.2f} at N = {records[-1].N}")
