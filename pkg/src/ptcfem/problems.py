"""Semilinear problems ``-eps * Lap(u) = f(u)`` with homogeneous Dirichlet data."""
from dataclasses import dataclass, replace
from typing import Callable, Optional, Union

import numpy as np

from .errors import UnknownProblem
from .mesh import DomainSpec


@dataclass(frozen=True)
class ProblemSpec:
    """A semilinear reaction-diffusion problem.

    ``f`` and ``f_prime`` act elementwise on arrays. An optional ``source``
    adds a space-dependent term ``g(x)`` to the reaction, which is how the
    manufactured linear problem ``f(u) = -u + g`` is expressed; ``f_prime``
    is unaffected by it.

    ``initial_guess`` is a constant (applied on interior vertices), a callable
    of the vertex coordinates, or the preset ``"zero"``.
    """

    name: str
    f: Callable
    f_prime: Callable
    epsilon: float
    domain: DomainSpec
    initial_guess: Union[float, Callable, str] = 0.0
    source: Optional[Callable] = None
    exact_solution: Optional[Callable] = None
    exact_gradient: Optional[Callable] = None
    description: str = ""

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def with_epsilon(self, epsilon):
        """Same problem at a different perturbation parameter.

        Built-ins are rebuilt from the registry since their data may depend
        on ``epsilon``.
        """
        if self.name in _REGISTRY:
            return _REGISTRY[self.name](epsilon)
        return replace(self, epsilon=float(epsilon))

    def reaction(self, u, x=None):
        """``f(u) + g(x)`` at matching arrays of values and points."""
        r = self.f(u)
        if self.source is not None:
            r = r + self.source(x)
        return r

    def initial_coefficients(self, mesh):
        guess = self.initial_guess
        if isinstance(guess, str):
            if guess != "zero":
                raise ValueError(f"unknown initial guess preset {guess!r}")
            values = np.zeros(mesh.n_vertices)
        elif callable(guess):
            values = np.asarray(guess(mesh.vertices), dtype=float).reshape(mesh.n_vertices)
        else:
            values = np.full(mesh.n_vertices, float(guess))
        values = values.copy()
        values[mesh.boundary] = 0.0
        return values


def _sine_gordon(epsilon):
    return ProblemSpec(
        name="sine-gordon",
        f=lambda u: -np.sin(u) - u + 1.0,
        f_prime=lambda u: -np.cos(u) - 1.0,
        epsilon=float(epsilon),
        domain=DomainSpec.square(0.0, 1.0),
        initial_guess=0.5,
        description="f(u) = -sin(u) - u + 1 on (0,1)^2, u0 = 1/2 inside",
    )


def _ginzburg_landau(epsilon):
    return ProblemSpec(
        name="ginzburg-landau",
        f=lambda u: u * (1.0 - u * u),
        f_prime=lambda u: 1.0 - 3.0 * u * u,
        epsilon=float(epsilon),
        domain=DomainSpec.square(-1.0, 1.0),
        initial_guess=1.0,
        description="f(u) = u(1 - u^2) on (-1,1)^2, u0 = 1 inside",
    )


def _manufactured_linear(epsilon):
    eps = float(epsilon)
    pi = np.pi

    def exact(x):
        return np.sin(pi * x[..., 0]) * np.sin(pi * x[..., 1])

    def gradient(x):
        sx, sy = np.sin(pi * x[..., 0]), np.sin(pi * x[..., 1])
        cx, cy = np.cos(pi * x[..., 0]), np.cos(pi * x[..., 1])
        return np.stack([pi * cx * sy, pi * sx * cy], axis=-1)

    return ProblemSpec(
        name="manufactured-linear",
        f=lambda u: -u,
        f_prime=lambda u: -np.ones_like(u),
        epsilon=eps,
        domain=DomainSpec.square(0.0, 1.0),
        initial_guess="zero",
        source=lambda x: (2.0 * pi * pi * eps + 1.0) * exact(x),
        exact_solution=exact,
        exact_gradient=gradient,
        description="f(u) = -u + g with exact solution sin(pi x) sin(pi y)",
    )


_REGISTRY = {
    "sine-gordon": _sine_gordon,
    "ginzburg-landau": _ginzburg_landau,
    "manufactured-linear": _manufactured_linear,
}


def list_problems():
    return sorted(_REGISTRY)


def builtin(name, epsilon=1.0):
    """Look up a built-in problem by name."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownProblem(f"unknown problem {name!r}; choose from {list_problems()}") from None
    return factory(epsilon)


# -- stability constants ----------------------------------------------------

@dataclass(frozen=True)
class StabilityConstants:
    sigma_f: float
    L_fprime: float
    C_P: float
    mu: Optional[float]
    L: float


def compute_mu(spec, sigma_f, C_P):
    """Coercivity constant of the negated Jacobian in the eps-energy inner product.

    Returns ``None`` when ``sigma_f >= eps / C_P**2``: coercivity cannot be
    certified from ``sigma_f`` (the iteration may still work, e.g. for
    Ginzburg-Landau).
    """
    if not C_P > 0:
        raise ValueError("Poincare constant must be positive")
    a = spec.epsilon / C_P**2
    if not sigma_f < a:
        return None
    return (a - sigma_f) / (a + 1.0)


def compute_L(spec, L_fprime, C=1.0):
    """Lipschitz constant ``C * L_f' / eps`` of the Jacobian (``C = 1`` convention)."""
    return C * L_fprime / spec.epsilon


def sup_over_range(fn, lower, upper, samples=4001):
    """Sampled supremum of a scalar function over ``[lower, upper]``."""
    return float(np.max(fn(np.linspace(lower, upper, samples))))


def stability_constants(spec, sigma_f, L_fprime, C_P=None):
    if C_P is None:
        C_P = spec.domain.poincare_constant()
    return StabilityConstants(
        sigma_f=float(sigma_f),
        L_fprime=float(L_fprime),
        C_P=float(C_P),
        mu=compute_mu(spec, sigma_f, C_P),
        L=compute_L(spec, L_fprime),
    )
