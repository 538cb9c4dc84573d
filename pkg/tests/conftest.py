import numpy as np
import pytest

from ptcfem.ptc import DenseProblem


def quadratic_problem(seed=0, n=5, gram=None):
    """Dense ``F(u) = -A u - 0.1 u*u`` with a seeded SPD ``A``.

    Returns ``(problem, A, u0)``; ``-F'(u) = A + 0.2 diag(u)``.
    """
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    A = Q @ Q.T / n + np.eye(n)
    u0 = rng.uniform(0.0, 1.0, n)
    prob = DenseProblem(lambda u: -A @ u - 0.1 * u * u,
                        lambda u: -A - 0.2 * np.diag(u),
                        gram=gram, size=n)
    return prob, A, u0


@pytest.fixture
def quadratic():
    return quadratic_problem()
