import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from ptcfem.errors import DegenerateIncrement, NotApplicable, SingularFactorization
from ptcfem.ptc import (K_MAX, DenseProblem, PtcState, propose_step_size, ptc_solve,
                        ptc_step, reduction_factor, theoretical_step_size, verify_reduction)
from conftest import quadratic_problem


def linear_problem(A, b=None, gram=None):
    n = A.shape[0]
    b = np.zeros(n) if b is None else b
    return DenseProblem(lambda u: b - A @ u, lambda u: -A, gram=gram, size=n)


# -- ptc_step -----------------------------------------------------------------

def test_step_identity_model_halves_residual():
    b = np.array([1.0, -2.0, 3.0])
    prob = linear_problem(np.eye(3), b)
    delta, u1 = ptc_step(prob, PtcState(0, np.zeros(3), 1.0))
    np.testing.assert_allclose(delta, b / 2, rtol=1e-15)
    np.testing.assert_allclose(u1, b / 2, rtol=1e-15)
    np.testing.assert_allclose(prob.apply_residual(u1), b / 2, rtol=1e-15)


def test_step_two_by_two():
    prob = linear_problem(np.diag([1.0, 2.0]))
    delta, u1 = ptc_step(prob, PtcState(0, np.ones(2), 1.0))
    np.testing.assert_allclose(delta, [-0.5, -2.0 / 3.0], rtol=1e-14)
    np.testing.assert_allclose(u1, [0.5, 1.0 / 3.0], rtol=1e-14)


def test_newton_limit(quadratic):
    prob, A, u0 = quadratic
    newton = -np.linalg.solve(prob.jacobian(u0), prob.apply_residual(u0))
    errors = []
    for k in (1e2, 1e4, 1e6, 1e8):
        delta, _ = ptc_step(prob, PtcState(0, u0, k))
        errors.append(prob.norm(k * delta - newton))
    assert errors[-1] <= 1e-6
    assert all(a > b for a, b in zip(errors, errors[1:]))


def test_step_singular_system_raises():
    prob = DenseProblem(lambda u: np.ones(2), lambda u: np.eye(2), size=2)
    with pytest.raises(SingularFactorization):
        ptc_step(prob, PtcState(0, np.zeros(2), 1.0))  # I - 1*I = 0


def test_state_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        PtcState(0, np.zeros(1), 0.0)


# -- step size control --------------------------------------------------------

def test_propose_example():
    rec = propose_step_size(3.0, 1.5, 1.0, 1.0)
    assert rec.k_star == 2.0
    assert rec.mu_n == 2.0 and rec.L_n == 1.0


def test_propose_degenerate_denominator():
    rec = propose_step_size(3.0, 1.0, 1.0, 1.0)
    assert rec.degenerate and rec.k_star == K_MAX


def test_propose_zero_increment():
    with pytest.raises(DegenerateIncrement):
        propose_step_size(1.0, 1.0, 0.0, 1.0)


def test_propose_clamps():
    assert propose_step_size(1e12, 0.0, 1.0, 1.0).k_star == K_MAX
    assert propose_step_size(1.0 + 1e-12, 1e6, 1.0, 1.0).k_star == 1e-8


def test_mu_equals_rayleigh_quotient():
    rng = np.random.default_rng(3)
    Q = rng.standard_normal((6, 6))
    A = Q @ Q.T + np.eye(6)
    prob = linear_problem(A)
    u0 = rng.standard_normal(6)
    for k in (0.1, 1.0, 10.0):
        delta, u1 = ptc_step(prob, PtcState(0, u0, k))
        d2 = prob.inner_product(delta, delta)
        rec = propose_step_size(prob.pairing(u0, delta), prob.pairing(u1, delta), d2, k)
        rayleigh = delta @ A @ delta / (delta @ delta)
        assert rec.mu_n == pytest.approx(rayleigh, rel=1e-10)
        lam = np.linalg.eigvalsh(A)
        assert lam[0] - 1e-10 <= rec.mu_n <= lam[-1] + 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 10), st.floats(-10, 10), st.floats(1e-3, 10), st.floats(1e-3, 10))
def test_step_identity_property(excess, pnp1, d2, k):
    # identity k* = mu_n / (L_n |delta|) whenever the proposal is unclamped
    pn = d2 * (1.0 + excess)
    if abs(pnp1 - d2) < 1e-6 * d2:
        return
    rec = propose_step_size(pn, pnp1, d2, k, k_min=0.0, k_max=np.inf)
    assert rec.k_star == pytest.approx(rec.mu_n / (rec.L_n * np.sqrt(d2)), rel=1e-12)


# -- theory helpers -------------------------------------------------------------

def test_theoretical_step_size_examples():
    assert theoretical_step_size(1.0, 2.0, 1.0) == 1.0
    assert theoretical_step_size(0.5, 4.0, 1.0) == pytest.approx(2.0 / 15.0, rel=1e-15)
    with pytest.raises(NotApplicable):
        theoretical_step_size(1.0, 0.0, 1.0)


def test_reduction_factor_examples():
    assert reduction_factor(1.0, 1.0, 0.0, 5.0) == 0.5
    assert reduction_factor(0.0, 3.0, 7.0, 2.0) == 1.0
    assert reduction_factor(1.0, 1.0, 2.0, 1.0) == 0.75


def test_theoretical_step_minimizes_gamma():
    mu, L, r = 0.5, 4.0, 1.0
    t_star = theoretical_step_size(mu, L, r)
    ts = np.linspace(1e-3, 2.0, 4001)
    g = reduction_factor(ts, mu, L, r)
    assert reduction_factor(t_star, mu, L, r) <= g.min() + 1e-12


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-2, 10))
def test_gamma_decreasing_for_linear(t1, t2, mu):
    if t1 == t2:
        return
    lo, hi = sorted((t1, t2))
    assert reduction_factor(hi, mu, 0.0, 1.0) < reduction_factor(lo, mu, 0.0, 1.0)


def test_verify_reduction_linear_equality():
    lam = 2.5
    prob = linear_problem(lam * np.eye(4))
    u0 = np.arange(1.0, 5.0)
    for t in (0.1, 1.0, 10.0):
        ratio, gamma = verify_reduction(prob, u0, t, lam, 0.0)
        assert ratio == pytest.approx(gamma, abs=1e-10)
    assert verify_reduction(prob, u0, 0.0, lam, 0.0) == (1.0, 1.0)


def test_verify_reduction_linear_spd_bound():
    rng = np.random.default_rng(11)
    Q = rng.standard_normal((5, 5))
    A = Q @ Q.T + 0.5 * np.eye(5)
    prob = linear_problem(A)
    lam_min = np.linalg.eigvalsh(A)[0]
    for t in (0.1, 1.0, 10.0):
        ratio, gamma = verify_reduction(prob, rng.standard_normal(5), t, lam_min, 0.0)
        assert ratio <= gamma + 1e-12


def quadratic_constants(A, u0):
    # -F'(u0) = A + 0.2 diag(u0); F' is Lipschitz with constant 0.2 in the Euclidean metric
    return np.linalg.eigvalsh(A + 0.2 * np.diag(u0))[0], 0.2


def test_verify_reduction_quadratic():
    prob, A, u0 = quadratic_problem(seed=0)
    mu, L = quadratic_constants(A, u0)
    for t in (0.1, 1.0, 10.0):
        ratio, gamma = verify_reduction(prob, u0, t, mu, L)
        assert ratio <= gamma


# -- dense theory suite: X-metric bounds ------------------------------------------

def _x_gram(seed, n=5):
    rng = np.random.default_rng(seed + 100)
    Q = rng.standard_normal((n, n))
    return Q @ Q.T / n + np.eye(n)


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("t", [0.01, 1.0, 100.0])
def test_coercivity_and_inverse_bound(seed, t):
    G = _x_gram(seed)
    prob, A, u0 = quadratic_problem(seed=seed, gram=G)
    J = prob.jacobian(u0)
    # mu: largest constant with <-J v, v> >= mu |v|_X^2 (generalized eigenvalue)
    mu = sla.eigh(-0.5 * (J + J.T), G, eigvals_only=True)[0]
    assert mu > 0
    At = prob.system_matrix(t, u0)
    V = np.random.default_rng(seed).standard_normal((50, 5))
    lhs = np.einsum("pi,ij,pj->p", V, At, V)
    rhs = (1 + t * mu) * np.einsum("pi,ij,pj->p", V, G, V)
    assert np.all(lhs >= rhs * (1 - 1e-12))
    # |A^{-1}|_{X' -> X} = |G^{1/2} A^{-1} G^{1/2}|_2
    S = sla.sqrtm(G).real
    op = np.linalg.norm(S @ np.linalg.solve(At, S), 2)
    assert op <= 1 / (1 + t * mu) + 1e-10


@pytest.mark.parametrize("t", [0.01, 1.0, 100.0])
def test_increment_bound(t):
    G = _x_gram(0)
    prob, A, u0 = quadratic_problem(seed=0, gram=G)
    J = prob.jacobian(u0)
    mu = sla.eigh(-0.5 * (J + J.T), G, eigvals_only=True)[0]
    delta, ut = ptc_step(prob, PtcState(0, u0, t))
    fnorm = prob.dual_norm(prob.apply_residual(u0))
    assert prob.norm(ut - u0) <= t / (1 + t * mu) * fnorm * (1 + 1e-12)


def test_ptc_solve_converges(quadratic):
    prob, A, u0 = quadratic
    result = ptc_solve(prob, u0, k0=1.0)
    assert result.converged
    assert np.linalg.norm(prob.apply_residual(result.u)) < 1e-10
    assert all(1e-8 <= r.k_star <= 1e8 for r in result.records)
    assert [s.n for s in result.states] == list(range(len(result.states)))


def test_jacobian_linear_in_direction(quadratic):
    prob, A, u0 = quadratic
    rng = np.random.default_rng(5)
    w1, w2 = rng.standard_normal((2, 5))
    lhs = prob.apply_jacobian(u0, 2.0 * w1 - 3.0 * w2)
    rhs = 2.0 * prob.apply_jacobian(u0, w1) - 3.0 * prob.apply_jacobian(u0, w2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-14)
