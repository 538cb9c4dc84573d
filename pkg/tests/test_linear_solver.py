import numpy as np
import pytest
import scipy.sparse as sp

from ptcfem.assembly import assemble_ptc_system, FemFunction
from ptcfem.errors import (IndefiniteMatrix, MaxIterationsExceeded, SingularFactorization)
from ptcfem.linear_solver import LinearSolveContract, solve
from ptcfem.mesh import DomainSpec, build_initial_mesh
from ptcfem.problems import builtin

CG = LinearSolveContract(method="cg")


@pytest.mark.parametrize("contract", [None, CG])
def test_identity(contract):
    b = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(solve(sp.identity(3, format="csr"), b, contract), b)


@pytest.mark.parametrize("contract", [None, CG])
@pytest.mark.parametrize("sparse", [True, False])
def test_tridiagonal(contract, sparse):
    A = np.array([[2.0, 1, 0], [1, 2, 1], [0, 1, 2]])
    A = sp.csr_matrix(A) if sparse else A
    x = solve(A, np.array([1.0, 0, 0]), contract)
    np.testing.assert_allclose(x, [0.75, -0.5, 0.25], rtol=1e-13)


@pytest.mark.parametrize("sparse", [True, False])
def test_singular_direct(sparse):
    A = np.array([[1.0, 2.0], [0.0, 0.0]])
    with pytest.raises(SingularFactorization):
        solve(sp.csr_matrix(A) if sparse else A, np.ones(2))


def test_cg_indefinite():
    A = sp.diags([1.0, -1.0, 2.0]).tocsr()
    with pytest.raises(IndefiniteMatrix):
        solve(A, np.ones(3), CG)


def test_cg_max_iterations():
    n = 200
    A = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()
    with pytest.raises(MaxIterationsExceeded):
        solve(A, np.ones(n), LinearSolveContract(method="cg", max_iterations=5))


def test_zero_rhs():
    assert not solve(sp.identity(4, format="csr"), np.zeros(4)).any()


def test_report_records_residual():
    A = sp.csr_matrix(np.array([[4.0, 1], [1, 3]]))
    b = np.array([1.0, 2.0])
    x, report = solve(A, b, return_report=True)
    assert report.relative_residual <= 1e-12
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_bad_contract():
    with pytest.raises(ValueError):
        LinearSolveContract(method="gmres")


def test_direct_and_cg_agree_on_fem_system():
    m = build_initial_mesh(DomainSpec.square(0, 1), 8)
    for _ in range(4):
        m = m.uniform_refine()[0]
    spec = builtin("sine-gordon", 1e-2)
    u = FemFunction(m, spec.initial_coefficients(m))
    system = assemble_ptc_system(u, 1.0, spec)
    assert system.matrix.shape[0] > 1000
    x_direct = system.solve()
    x_cg = system.solve(CG)
    assert np.abs(x_direct - x_cg).max() <= 1e-9 * np.abs(x_direct).max()
