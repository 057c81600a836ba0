"""Problem data: energy density, parameters, benchmark data and the
stability constants of the relative entropy framework."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .space import BrokenField, integrate, quadrature_points

TESTS = ("test1", "test2", "test3")


class ConfigurationError(ValueError):
    """Invalid model or run configuration."""


@dataclass(frozen=True)
class EnergyDensity:
    """Energy density ``W`` with analytic derivatives.

    ``derivs[j]`` evaluates ``W^(j)``; orders beyond the list are
    unavailable unless ``polynomial`` is set, in which case they vanish.
    """

    name: str
    derivs: tuple[Callable[[np.ndarray], np.ndarray], ...]
    polynomial: bool = False

    @property
    def max_order(self) -> float:
        return math.inf if self.polynomial else len(self.derivs) - 1

    def __call__(self, u):
        return self.derivative(u, 0)

    def derivative(self, u, order: int):
        if order < len(self.derivs):
            return self.derivs[order](np.asarray(u, dtype=float))
        if self.polynomial:
            return np.zeros_like(np.asarray(u, dtype=float))
        raise ConfigurationError(
            f"energy density {self.name!r} provides derivatives up to order {len(self.derivs) - 1}, "
            f"order {order} requested"
        )

    def require(self, order: int) -> None:
        if order > self.max_order:
            raise ConfigurationError(
                f"energy density {self.name!r} lacks derivative order {order} (has {self.max_order})"
            )

    def prime(self, u, order: int = 0):
        """Derivatives of ``W'``: ``prime(u, j) = W^(j+1)(u)``."""
        return self.derivative(u, order + 1)

    @classmethod
    def from_polynomial(cls, name: str, coeffs: Sequence[float]) -> "EnergyDensity":
        P = Polynomial(coeffs)
        derivs = [P]
        for _ in range(P.degree()):
            derivs.append(derivs[-1].deriv())
        return cls(name, tuple(derivs), polynomial=True)


def double_well() -> EnergyDensity:
    """Quartic double well ``(u^2 - 1)^2``."""
    return EnergyDensity.from_polynomial("quartic", [1.0, 0.0, -2.0, 0.0, 1.0])


WELLS = {"quartic": double_well}


def make_well(name: str) -> EnergyDensity:
    try:
        return WELLS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown well {name!r}; available: {sorted(WELLS)}") from None


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    mu: float
    well: EnergyDensity = field(default_factory=double_well)
    bc_mode: str = "periodic"
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigurationError("capillarity gamma must be positive")
        if not self.mu >= 0:
            raise ConfigurationError("viscosity mu must be non-negative")


# benchmark data -----------------------------------------------------------

def steady_rate(gamma: float) -> float:
    return math.sqrt(2.0 / gamma)


def exact_steady(x, gamma: float):
    """Steady kink ``(tanh(kx), 0)`` with ``k = sqrt(2/gamma)``."""
    if not gamma > 0:
        raise ConfigurationError("gamma must be positive")
    x = np.asarray(x, dtype=float)
    return np.tanh(steady_rate(gamma) * x), np.zeros_like(x)


@dataclass(frozen=True)
class InitialData:
    u0: Callable
    du0: Callable
    v0: Callable
    exact: Callable | None = None  # (x, t) -> (u, u_x, v, v_x)
    stationary: bool = False


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def initial_data(test: str, gamma: float = 1e-2, variant: str = "c1") -> InitialData:
    """Initial strain and velocity of the three benchmark cases.

    ``variant`` selects the bump of the third case: ``"c1"`` uses
    ``cos(8 pi |x - 1/2|)``, ``"printed"`` uses ``cos(8 pi |x - 1/2|^2)``
    which jumps at the edge of the support.
    """
    if test == "test1":
        k = steady_rate(gamma)

        def u0(x):
            return np.tanh(k * np.asarray(x, dtype=float))

        def du0(x):
            return k / np.cosh(k * np.asarray(x, dtype=float)) ** 2

        def exact(x, t=0.0):
            return u0(x), du0(x), _zero(x), _zero(x)

        return InitialData(u0, du0, _zero, exact, stationary=True)
    if test == "test2":
        def u0(x):
            return np.sin(50 * np.pi * np.asarray(x, dtype=float)) / 100

        def du0(x):
            return 0.5 * np.pi * np.cos(50 * np.pi * np.asarray(x, dtype=float))

        return InitialData(u0, du0, _zero)
    if test == "test3":
        if variant == "c1":
            def u0(x):
                r = np.abs(np.asarray(x, dtype=float) - 0.5)
                return np.where(r <= 0.125, 0.25 * (np.cos(8 * np.pi * r) + 1), 0.0)

            def du0(x):
                d = np.asarray(x, dtype=float) - 0.5
                return np.where(np.abs(d) <= 0.125, -2 * np.pi * np.sin(8 * np.pi * d), 0.0)
        elif variant == "printed":
            def u0(x):
                d = np.asarray(x, dtype=float) - 0.5
                return np.where(np.abs(d) <= 0.125, 0.25 * (np.cos(8 * np.pi * d**2) + 1), 0.0)

            def du0(x):
                d = np.asarray(x, dtype=float) - 0.5
                return np.where(np.abs(d) <= 0.125, -4 * np.pi * d * np.sin(8 * np.pi * d**2), 0.0)
        else:
            raise ConfigurationError(f"unknown test3 variant {variant!r}")
        return InitialData(u0, du0, _zero)
    raise ConfigurationError(f"unknown test case {test!r}; expected one of {TESTS}")


def case_params(test: str) -> dict:
    """Default parameters and geometry of a benchmark case."""
    if test == "test1":
        return dict(gamma=1e-2, mu=1e-2, domain=(-1.0, 1.0), bc_mode="natural")
    if test in ("test2", "test3"):
        return dict(gamma=1e-3, mu=1e-1, domain=(0.0, 1.0), bc_mode="periodic")
    raise ConfigurationError(f"unknown test case {test!r}")


def energy_continuous(u, du, v, params: ModelParams, mesh, n_points: int = 12) -> float:
    """``int W(u) + gamma/2 |u'|^2 + 1/2 v^2`` for callables or broken fields."""
    x = quadrature_points(mesh, n_points)

    def values(f, deriv=False):
        if isinstance(f, BrokenField):
            return (f.derivative() if deriv else f).at_quadrature(n_points)
        return np.asarray(f(x), dtype=float)

    uq = values(u)
    duq = values(u, True) if du is None else values(du)
    vq = values(v)
    dens = params.well(uq) + 0.5 * params.gamma * duq**2 + 0.5 * vq**2
    return float(integrate(mesh, dens).sum())


# stability constants -------------------------------------------------------

@dataclass(frozen=True)
class StabilityConstants:
    M_bar: float
    W_bar: float  # C^3 norm on [-M_bar, M_bar]
    W_bbar: float  # C^2 norm
    C_P: float

    def __post_init__(self):
        if self.W_bar < self.W_bbar:
            raise ValueError("C^3 bound must dominate the C^2 bound")


def well_norm(well: EnergyDensity, bound: float, order: int, samples: int = 4001) -> float:
    s = np.linspace(-bound, bound, samples)
    return float(max(np.abs(well.derivative(s, j)).max() for j in range(order + 1)))


def stability_constants(max_abs_u: float, params: ModelParams, factor: float = 1.1) -> StabilityConstants:
    """Computable surrogate: ``M_bar = factor * max |u_h|`` and ``C_P = L/(2 pi)``."""
    M = factor * float(max_abs_u)
    a, b = params.domain
    return StabilityConstants(
        M_bar=M,
        W_bar=well_norm(params.well, M, 3),
        W_bbar=well_norm(params.well, M, 2),
        C_P=(b - a) / (2 * math.pi),
    )


def stability_constant_K(slope_sup: float, gamma: float, constants: StabilityConstants) -> float:
    """``max(2 C_P^2 W^2/gamma |u'|_inf^2 + 2 W^2/gamma, 3/2)`` with ``W`` the C^3 bound."""
    if not gamma > 0:
        raise ConfigurationError("gamma must be positive")
    w2 = constants.W_bar**2
    return max(2 * constants.C_P**2 * w2 / gamma * slope_sup**2 + 2 * w2 / gamma, 1.5)


def stability_constant_Ktilde(mu: float, constants: StabilityConstants) -> float:
    """``max(4/(3 mu) (W^2 + 1), 2)`` with ``W`` the C^2 bound; needs ``mu > 0``."""
    if not mu > 0:
        raise ConfigurationError("the modified entropy bound requires viscosity mu > 0")
    return max(4.0 / (3.0 * mu) * (constants.W_bbar**2 + 1.0), 2.0)
