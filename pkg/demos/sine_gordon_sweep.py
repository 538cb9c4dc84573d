"""Adaptive PTC-Galerkin runs for the sine-Gordon type problem across epsilon.

For every epsilon the driver alternates between PTC steps and mesh
refinement. We print the fitted decay rate of the total estimator with
respect to the number of degrees of freedom (optimal is -1/2) and the
plateau value at the center of the square.

Set DOF_MAX higher (the acceptance runs use 1e5) for cleaner rates.
"""
import numpy as np

from ptcfem import AdaptiveConfig, builtin, run
from ptcfem.errors import InsufficientData
from ptcfem.experiment import fit_slope

DOF_MAX = 20_000
config = AdaptiveConfig(dof_max=DOF_MAX, record_timing=False)

print(" epsilon   mesh dofs   steps  refinements   slope   u(1/2,1/2)")
for eps in (1.0, 1e-2, 1e-4, 1e-7):
    u, log = run(builtin("sine-gordon", eps), config)
    n_refine = sum(r.action == "REFINE" for r in log)
    try:
        slope = f"{fit_slope(log):+.3f}"
    except InsufficientData:
        slope = "   n/a"
    center = u(np.array([[0.5, 0.5]]))[0]
    print(f"{eps:8.0e}  {u.mesh.n_dofs:10d}  {len(log):6d}  {n_refine:11d}  {slope}  {center:.5f}")

# for small epsilon most elements end up near the boundary layer
m = u.mesh
width = 10 * np.sqrt(eps) * np.log(1 / eps)
near = (m.domain.distance_to_boundary(m.vertices)[m.elements] <= width).any(axis=1)
print(f"\neps={eps:.0e}: {100 * near.mean():.1f}% of elements touch the layer of width {width:.4f}")
