"""Pseudo transient continuation on a small dense system.

We solve ``F(u) = -A u - 0.1 u*u = 0`` for a random SPD ``A`` and watch the
adaptive step size grow: early steps are damped, late steps are Newton steps.
Then the measured one-step residual reduction is compared with its guaranteed
upper bound for a few pseudo times.
"""
import numpy as np
import scipy.linalg as sla

from ptcfem.ptc import DenseProblem, ptc_solve, reduction_factor, verify_reduction

rng = np.random.default_rng(0)
n = 8
Q = rng.standard_normal((n, n))
A = Q @ Q.T / n + np.eye(n)
problem = DenseProblem(lambda u: -A @ u - 0.1 * u * u, lambda u: -A - 0.2 * np.diag(u),
                       size=n)
u0 = rng.uniform(0, 3, n)

result = ptc_solve(problem, u0, k0=0.1)
print(f"converged={result.converged} after {len(result.states)} steps")
print(" n        k_n           |F(u_n)|")
for s in result.states:
    print(f"{s.n:2d}  {s.k:12.4e}  {np.linalg.norm(problem.apply_residual(s.u)):12.4e}")

# coercivity of -F'(u0) in the Euclidean metric, Lipschitz constant of F' is 0.2
mu = sla.eigvalsh(A + 0.2 * np.diag(u0))[0]
L = 0.2
F0 = np.linalg.norm(problem.apply_residual(u0))
print(f"\nmu = {mu:.4f}, L = {L}, |F(u0)| = {F0:.4f}")
print("     t    measured   bound")
for t in (0.1, 0.5, 1.0, 2.0, 5.0):
    ratio, gamma = verify_reduction(problem, u0, t, mu, L)
    print(f"{t:6.1f}  {ratio:9.5f}  {gamma:7.5f}")
assert reduction_factor(0.0, mu, L, F0) == 1.0
