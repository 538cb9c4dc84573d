import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptcfem.assembly import FemFunction, FemProblem, energy_error
from ptcfem.driver import (CSV_HEADER, PTC, REFINE, AdaptiveConfig, IterationLog, IterationRow,
                           mark, refine_with_dofs, run, solve_on_mesh)
from ptcfem.errors import NonConvergence, SingularFactorization
from ptcfem.estimator import total_report
from ptcfem.mesh import DomainSpec, build_initial_mesh
from ptcfem.problems import ProblemSpec, builtin
from ptcfem.ptc import PtcState, ptc_step


class Stop(Exception):
    pass


def run_rows(problem, config, rows):
    """Run the driver for exactly ``rows`` iterations, collecting what the callback sees."""
    seen = []

    def cb(row, mesh, report):
        seen.append((row, report))
        if len(seen) == rows:
            raise Stop

    with pytest.raises(Stop):
        run(problem, config, callback=cb)
    return seen


# -- marking ----------------------------------------------------------------------

def test_mark_examples():
    eta = np.sqrt([4.0, 3.0, 2.0, 1.0])
    np.testing.assert_array_equal(mark(eta, 0.5), [0, 1])
    np.testing.assert_array_equal(mark(np.array([0, 1, 2, 0.0]), 1.0), [1, 2])
    np.testing.assert_array_equal(mark(np.ones(4), 0.5), [0, 1])
    np.testing.assert_array_equal(mark(np.zeros(5), 0.5), [0])
    with pytest.raises(ValueError):
        mark(np.array([-1.0]), 0.5)


@settings(max_examples=100)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=60), st.floats(0.05, 1.0))
def test_mark_minimal(eta, fraction):
    eta = np.array(eta)
    S = mark(eta, fraction)
    total = np.sum(eta**2)
    if total == 0:
        return
    assert np.sum(eta[S] ** 2) >= fraction * total * (1 - 1e-12)
    # dropping the smallest marked element loses the bulk property
    smallest = S[np.argmin(eta[S] ** 2)]
    rest = np.setdiff1d(S, [smallest])
    assert np.sum(eta[rest] ** 2) < fraction * total * (1 + 1e-12)


# -- log ----------------------------------------------------------------------------

def make_log(dofs, totals, action=REFINE):
    return IterationLog([IterationRow(i, int(d), 1.0, 0.1 * t, t, t, action, 0.0)
                         for i, (d, t) in enumerate(zip(dofs, totals))])


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    log = make_log([5, 5, 9, 30], rng.uniform(0, 1, 4))
    log.rows[1] = IterationRow(1, 5, 1 / 3, np.pi, np.e, 1e-300, PTC, 0.123456789)
    text = log.to_csv(tmp_path / "log.csv")
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    back = IterationLog.from_csv(tmp_path / "log.csv")
    assert back.rows == log.rows
    assert IterationLog.from_csv(text).rows == log.rows


def test_csv_bad_header():
    with pytest.raises(ValueError):
        IterationLog.from_csv("a,b\n1,2\n")


def test_levels():
    log = make_log([5, 5, 9, 9, 9, 30], range(6))
    assert [r.n for r in log.levels()] == [1, 4, 5]


# -- driver -------------------------------------------------------------------------

def check_log_invariants(log, theta):
    dof = log.column("dof")
    assert np.all(np.diff(dof) >= 0)
    for a, b in zip(log.rows, log.rows[1:]):
        if a.action == REFINE:
            assert b.dof > a.dof
    for r in log:
        assert (r.action == REFINE) == (r.R**2 <= theta * r.eta**2 * (1 + 1e-12)) or \
            abs(r.R**2 - theta * r.eta**2) <= 1e-12 * r.eta**2


def test_run_small_sine_gordon():
    cfg = AdaptiveConfig(dof_max=600)
    u, log = run(builtin("sine-gordon", 1e-2), cfg)
    check_log_invariants(log, cfg.theta)
    assert log[-1].dof <= 600 < u.mesh.n_dofs
    assert log.levels()[-1].total < log.levels()[0].total
    center = u(np.array([[0.5, 0.5]]))[0]
    assert 0.4 < center < 0.6


def test_linear_problem_newton_step_is_exact():
    # with a huge pseudo time step one PTC step solves the linear discrete problem
    spec = builtin("manufactured-linear", 0.1)
    m = build_initial_mesh(spec.domain, 4).uniform_refine()[0]
    fem = FemProblem(m, spec)
    u0 = np.zeros(m.n_dofs)
    _, u1 = ptc_step(fem, PtcState(0, u0, 1e8))
    r0 = np.linalg.norm(fem.apply_residual(u0))
    assert np.linalg.norm(fem.apply_residual(u1)) <= 1e-7 * r0
    direct = np.linalg.solve(-fem.jacobian(u0).toarray(), fem.apply_residual(u0))
    np.testing.assert_allclose(u1, direct, rtol=1e-6, atol=1e-10)


def test_linear_problem_driver_refines():
    spec = builtin("manufactured-linear", 0.1)
    u, log = run(spec, AdaptiveConfig(k0=1e8, dof_max=2000))
    assert all(r.action == REFINE for r in log)
    # the final interpolated iterate is a good approximation
    err = energy_error(u, spec.exact_solution, spec.exact_gradient, 0.1)
    assert err < 0.1


def test_theta_large_always_refines():
    rows = run_rows(builtin("sine-gordon", 1e-2), AdaptiveConfig(theta=1e12, dof_max=10**7), 10)
    assert all(r.action == REFINE for r, _ in rows)


def test_theta_small_is_pure_ptc():
    rows = run_rows(builtin("sine-gordon", 1e-2), AdaptiveConfig(theta=1e-300, dof_max=10**7), 10)
    assert all(r.action == PTC for r, _ in rows)
    assert len({r.dof for r, _ in rows}) == 1
    ks = [r.k for r, _ in rows]
    assert ks[0] == 1.0 and ks[-1] > ks[0]


def test_iteration_cap():
    with pytest.raises(NonConvergence) as info:
        run(builtin("sine-gordon", 1e-2), AdaptiveConfig(theta=1e-300, max_iterations=4))
    assert len(info.value.log) == 4


def test_solver_failure_carries_log():
    # with f' = 100 the single-DOF system G - k J vanishes at k = G / J > 0
    dom = DomainSpec.square(0, 1)
    m = build_initial_mesh(dom, 1)
    spec0 = ProblemSpec("s", lambda u: 100 * u, lambda u: 100 + 0 * u, 1.0, dom, initial_guess=0.3)
    fem = FemProblem(m, spec0)
    g, j = fem.gram().toarray()[0, 0], fem.jacobian(np.zeros(1)).toarray()[0, 0]
    k = g / j
    with pytest.raises(SingularFactorization) as info:
        run(spec0, AdaptiveConfig(k0=k, dof_max=10, resolution=1))
    assert isinstance(info.value.log, IterationLog)


def test_config_validation():
    with pytest.raises(ValueError):
        AdaptiveConfig(theta=0)
    with pytest.raises(ValueError):
        AdaptiveConfig(marking_fraction=1.5)
    with pytest.raises(ValueError):
        AdaptiveConfig(k0=1e9)


def test_refine_with_dofs_adds_dofs():
    m = build_initial_mesh(DomainSpec.square(0, 1), 2)
    u = FemFunction.zeros(m)
    # elements whose refinement edge is on the boundary create only Dirichlet vertices
    for e in range(m.n_elements):
        child, v = refine_with_dofs(m, u, [e])
        assert child.n_dofs > m.n_dofs
        assert v.mesh is child


def test_determinism():
    cfg = AdaptiveConfig(dof_max=500, record_timing=False)
    a = run(builtin("ginzburg-landau", 1e-3), cfg).log.to_csv()
    b = run(builtin("ginzburg-landau", 1e-3), cfg).log.to_csv()
    assert a == b


def test_solve_on_mesh_converges():
    spec = builtin("sine-gordon", 0.05)
    m = build_initial_mesh(spec.domain, 4)
    u, d, k = solve_on_mesh(spec, m)
    fem = FemProblem(m, spec)
    assert np.linalg.norm(fem.apply_residual(u.interior)) < 1e-12
    r = total_report(u, d, k, spec)
    assert r.R_omega < 1e-12
