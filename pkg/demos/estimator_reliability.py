"""Reliability and efficiency of the estimator on a problem with known solution.

The manufactured linear problem has exact solution sin(pi x) sin(pi y). On a
sequence of uniformly refined meshes the ratio estimator / energy error
should stay in a narrow band, independently of epsilon.
"""
from ptcfem.assembly import FemFunction, energy_error
from ptcfem.driver import solve_on_mesh
from ptcfem.estimator import total_report
from ptcfem.mesh import build_initial_mesh
from ptcfem.problems import builtin

for eps in (1.0, 1e-2, 1e-4):
    spec = builtin("manufactured-linear", eps)
    mesh = build_initial_mesh(spec.domain, 4)
    print(f"epsilon = {eps:.0e}")
    print("    dofs    estimator       error   ratio")
    for _ in range(6):
        u, d, k = solve_on_mesh(spec, mesh)
        est = total_report(u, d, k, spec).total_estimator
        u1 = FemFunction(mesh, u.coefficients + k * d.coefficients)
        err = energy_error(u1, spec.exact_solution, spec.exact_gradient, eps)
        print(f"{mesh.n_dofs:8d}  {est:11.4e}  {err:10.4e}  {est / err:6.3f}")
        mesh = mesh.uniform_refine()[0]
    print()
