"""Uniform against adaptive refinement for the singular solution u(x) = x^0.6 - x.

The solution has an x^0.6 corner at the origin. Uniform refinement is held
back by it, while Doerfler marking grades the mesh towards x = 0 and recovers
the rate p + 1 in the number of elements.

    python demos/uniform_vs_adaptive.py
"""
import numpy as np

from fracdpg import example2, fit_eoc, run_convergence

problem = example2(0.6, 1.2)

uniform = run_convergence(problem, 0, 0, 2, 2, theta=1.0, n_steps=9)
print("uniform, p = q = 0")
print("     N          est       err_u")
for r in uniform:
    print(f"{r.N:6d}  {r.est:11.4e} {r.err_u:11.4e}")
print(f"EOC(est) = {fit_eoc(uniform):.2f}\n")

meshes = []
adaptive = run_convergence(problem, 0, 0, 2, 2, theta=0.4, n_steps=200, dof_budget=3000,
                           on_step=lambda rec, mesh, sol: meshes.append(mesh))
print("adaptive, theta = 0.4, p = q = 0")
print("     N          est       h_min")
for r, mesh in list(zip(adaptive, meshes))[::4]:
    print(f"{r.N:6d}  {r.est:11.4e} {mesh.h.min():11.4e}")
print(f"EOC(est) over the last factor 4 in N = {fit_eoc(adaptive, n_range=4.0):.2f}")

# the final mesh is strongly graded towards the origin
h = meshes[-1].h
print(f"\nfinal mesh: {h.size} elements, h ranges over {np.log10(h.max() / h.min()):.0f} decades")
