"""Elliptic and velocity reconstructions and relative entropy functionals.

Reconstructions are piecewise polynomials obtained by exact
antidifferentiation of piecewise polynomial right-hand sides, so the
defining equations hold up to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import basis
from .mesh import Mesh1D
from .model import ModelParams
from .operators import discrete_reconstruction
from .space import BrokenField, integrate, moments, project_continuous, quadrature_points


class SolvabilityError(ValueError):
    """The right-hand side of a periodic or Neumann problem has nonzero mean."""


class SmoothField(BrokenField):
    """Globally C^1 piecewise polynomial."""

    def __post_init__(self):
        super().__post_init__()
        self.check_continuity()

    def continuity_defect(self) -> tuple[float, float]:
        dj = self.derivative().jumps() if self.degree > 0 else np.zeros(1)
        return float(np.abs(self.jumps()).max(initial=0.0)), float(np.abs(dj).max(initial=0.0))

    def check_continuity(self, tol: float = 1e-10):
        left, _ = self.traces()
        scale = max(1.0, float(np.abs(left).max()))
        dscale = max(1.0, float(np.abs(self.derivative().traces()[0]).max())) if self.degree > 0 else 1.0
        v, d = self.continuity_defect()
        if v > tol * scale or d > tol * dscale:
            raise ValueError(f"reconstruction is not C^1 (value jump {v:.2e}, slope jump {d:.2e})")


def antiderivative(g: BrokenField, start: float = 0.0) -> BrokenField:
    """Continuous ``x -> start + int_a^x g``, one degree higher."""
    mesh = g.mesh
    h = mesh.element_widths
    a = g.legendre()
    M = basis.antiderivative_matrix(g.degree)
    loc = 0.5 * h[:, None] * (a @ M.T)  # int from the element's left end
    totals = g.element_integrals()
    offsets = start + np.concatenate(([0.0], np.cumsum(totals)[:-1]))
    loc[:, 0] += offsets
    return BrokenField.from_legendre(mesh, loc)


def solve_second_order(g: BrokenField, target_mean: float, *, tol: float = 1e-9) -> SmoothField:
    """``R'' = g`` with periodic or zero-Neumann closure and prescribed mean."""
    mesh = g.mesh
    L = mesh.length
    total = g.integral()
    scale = max(1.0, float(np.sqrt(L) * g.l2_norm()))
    if abs(total) > tol * scale:
        raise SolvabilityError(f"right-hand side has mean {total:.3e} (scale {scale:.3e})")
    Q = antiderivative(g)
    slope0 = -Q.integral() / L if mesh.periodic else 0.0
    R = antiderivative(Q + slope0)
    R = R + (target_mean - R.mean())
    return SmoothField(mesh, R.coeffs)


def _composed_degree(p: int) -> int:
    return 3 * p


def well_prime_field(u_h: BrokenField, params: ModelParams, degree: int | None = None) -> BrokenField:
    """``W'(u_h)`` as a broken field; exact for the quartic well at degree 3p."""
    q = _composed_degree(u_h.degree) if degree is None else degree
    nq = max(basis.default_points(q), q + 2)
    vals = params.well.derivative(u_h.at_quadrature(nq), 1)
    return BrokenField(u_h.mesh, moments(vals, u_h.mesh, q))


def reconstruct_R2(u_h: BrokenField, tau_h: BrokenField, params: ModelParams) -> SmoothField:
    g = (well_prime_field(u_h, params) - tau_h) / params.gamma
    return solve_second_order(g, u_h.mean())


def reconstruct_R1(u_h: BrokenField, tau_h: BrokenField, params: ModelParams) -> SmoothField:
    p = u_h.degree
    pc = project_continuous(well_prime_field(u_h, params), u_h.mesh, p + 1)
    g = (pc - discrete_reconstruction(tau_h, "+")) / params.gamma
    return solve_second_order(g, u_h.mean())


def reconstruct_Rv(R1_new: BrokenField, R1_old: BrokenField, v_h: BrokenField, dt: float) -> SmoothField:
    """Velocity reconstruction from the backward quotient of ``R_1``.

    Its derivative is the quotient's derivative, which closes periodically
    (or with zero end slopes in natural mode); the mean matches ``v_h``.
    """
    q = (R1_new - R1_old) / dt
    return SmoothField(q.mesh, (q + (v_h.mean() - q.mean())).coeffs)


def ode_residual(R: BrokenField, g: BrokenField, samples_per_element: int | None = None) -> float:
    """``max |R'' - g|`` at sample points on every element."""
    n = samples_per_element or 10 * (R.degree + 1)
    xi = np.linspace(-1.0, 1.0, n)
    d = R.derivative(2) - g
    return float(np.abs(d.at_reference(xi)).max())


# -- relative entropies --------------------------------------------------------

Pair = tuple  # (u, v) as BrokenFields or callables returning (value, slope)


def merged_mesh(a: Mesh1D, b: Mesh1D) -> Mesh1D:
    nodes = np.union1d(a.nodes, b.nodes)
    keep = np.concatenate(([True], np.diff(nodes) > 1e-14 * (nodes[-1] - nodes[0])))
    return Mesh1D(nodes[keep], a.bc_mode)


def _sampler(f) -> Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]:
    if isinstance(f, BrokenField):
        d = f.derivative()
        return lambda x: (f(x), d(x))
    return f


@dataclass(frozen=True)
class EntropyPair:
    velocity: float  # 1/2 int (v_a - v_b)^2
    strain_gradient: float  # gamma/2 int (u_a' - u_b')^2
    dissipation: float  # mu/4 accumulated
    strain: float  # 1/2 int (u_a - u_b)^2

    @property
    def eta_R(self) -> float:
        return self.velocity + self.strain_gradient + self.dissipation

    @property
    def eta_M(self) -> float:
        return self.eta_R + self.strain


def entropy_constituents(ua, va, ub, vb, params: ModelParams, mesh: Mesh1D, dissipation: float = 0.0,
                         n_points: int = 12) -> EntropyPair:
    x = quadrature_points(mesh, n_points)
    (u1, du1), (u2, du2) = _sampler(ua)(x), _sampler(ub)(x)
    v1, v2 = _sampler(va)(x)[0], _sampler(vb)(x)[0]

    def I(q):
        return float(integrate(mesh, q).sum())

    return EntropyPair(
        velocity=0.5 * I((v1 - v2) ** 2),
        strain_gradient=0.5 * params.gamma * I((du1 - du2) ** 2),
        dissipation=0.25 * params.mu * dissipation,
        strain=0.5 * I((u1 - u2) ** 2),
    )


def relative_entropy_reduced(ua, va, ub, vb, params, mesh, dissipation: float = 0.0) -> EntropyPair:
    return entropy_constituents(ua, va, ub, vb, params, mesh, dissipation)


def relative_entropy_modified(ua, va, ub, vb, params, mesh, dissipation: float = 0.0) -> EntropyPair:
    return entropy_constituents(ua, va, ub, vb, params, mesh, dissipation)


def h1_distance_sq(fa, fb, mesh: Mesh1D, n_points: int = 12) -> float:
    """``|| f_a - f_b ||^2_{H^1}`` with broken derivatives."""
    x = quadrature_points(mesh, n_points)
    (a, da), (b, db) = _sampler(fa)(x), _sampler(fb)(x)
    return float(integrate(mesh, (a - b) ** 2 + (da - db) ** 2).sum())


__all__ = [
    "SmoothField",
    "SolvabilityError",
    "antiderivative",
    "solve_second_order",
    "well_prime_field",
    "reconstruct_R1",
    "reconstruct_R2",
    "reconstruct_Rv",
    "ode_residual",
    "merged_mesh",
    "EntropyPair",
    "relative_entropy_reduced",
    "relative_entropy_modified",
    "h1_distance_sq",
]
