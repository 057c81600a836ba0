"""Broken polynomial fields and the projections onto them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import basis
from .basis import QuadratureRule, gauss_rule  # noqa: F401  (re-exported)
from .mesh import Mesh1D

ScalarFunction = Callable[[np.ndarray], np.ndarray]

SIDES = ("left", "right", "interior")


@dataclass(frozen=True, eq=False)
class BrokenField:
    """Piecewise polynomial of degree ``p`` with coefficients ``(N, p + 1)``
    in the element-wise orthonormal Legendre basis."""

    mesh: Mesh1D
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c.reshape(self.mesh.n_elements, -1)
        if c.shape[0] != self.mesh.n_elements:
            raise ValueError("coefficient rows must match the number of elements")
        object.__setattr__(self, "coeffs", c)

    # -- construction -----------------------------------------------------------
    @classmethod
    def zeros(cls, mesh: Mesh1D, degree: int) -> "BrokenField":
        return cls(mesh, np.zeros((mesh.n_elements, degree + 1)))

    @classmethod
    def constant(cls, mesh: Mesh1D, value: float, degree: int = 0) -> "BrokenField":
        c = np.zeros((mesh.n_elements, degree + 1))
        c[:, 0] = value * np.sqrt(mesh.element_widths)
        return cls(mesh, c)

    @classmethod
    def from_legendre(cls, mesh: Mesh1D, a: np.ndarray) -> "BrokenField":
        """Build from reference-element Legendre coefficients."""
        s = basis.norm_factors(a.shape[1] - 1)
        return cls(mesh, a * np.sqrt(mesh.element_widths)[:, None] / s)

    # -- basic views ------------------------------------------------------------
    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    def legendre(self) -> np.ndarray:
        s = basis.norm_factors(self.degree)
        return self.coeffs * s / np.sqrt(self.mesh.element_widths)[:, None]

    def with_degree(self, degree: int) -> "BrokenField":
        c = np.zeros((self.mesh.n_elements, degree + 1))
        k = min(degree, self.degree) + 1
        c[:, :k] = self.coeffs[:, :k]
        return BrokenField(self.mesh, c)

    # -- arithmetic -------------------------------------------------------------
    def _aligned(self, other: "BrokenField"):
        if other.mesh != self.mesh:
            raise ValueError("fields live on different meshes")
        q = max(self.degree, other.degree)
        return self.with_degree(q).coeffs, other.with_degree(q).coeffs

    def __add__(self, other):
        if isinstance(other, BrokenField):
            a, b = self._aligned(other)
            return BrokenField(self.mesh, a + b)
        return self + BrokenField.constant(self.mesh, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, scalar):
        return BrokenField(self.mesh, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return BrokenField(self.mesh, self.coeffs / float(scalar))

    def __neg__(self):
        return self * -1.0

    # -- evaluation -------------------------------------------------------------
    def at_reference(self, xi: np.ndarray) -> np.ndarray:
        """Values at reference points ``xi`` on every element, shape (N, len(xi))."""
        v = np.polynomial.legendre.legvander(np.asarray(xi, float), self.degree)
        return self.legendre() @ v.T

    def at_quadrature(self, n_points: int) -> np.ndarray:
        return self.legendre() @ basis.vander_at(n_points, self.degree).T

    def __call__(self, x) -> np.ndarray:
        """Evaluate at points; nodes are assigned to the element on their right."""
        x = np.asarray(x, dtype=float)
        idx = self.mesh.locate(x)
        a, b = self.mesh.nodes[idx], self.mesh.nodes[idx + 1]
        xi = 2.0 * (x - a) / (b - a) - 1.0
        v = np.polynomial.legendre.legvander(xi, self.degree)
        return np.einsum("...k,...k->...", v, self.legendre()[idx])

    def eval(self, x: float, side: str = "interior") -> float:
        """Point value with an explicit one-sided limit at mesh nodes."""
        if side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")
        mesh = self.mesh
        a, b = mesh.domain
        if not a <= x <= b:
            raise ValueError("x lies outside the domain")
        at_node = np.isclose(mesh.nodes, x, rtol=0.0, atol=1e-14 * mesh.length)
        if not at_node.any():
            return float(self(np.atleast_1d(x))[0])
        if side == "interior":
            raise ValueError("evaluation at a mesh node needs side='left' or 'right'")
        n = int(np.flatnonzero(at_node)[0])
        left_end, right_end = self.traces()
        N = mesh.n_elements
        if side == "left":
            if n == 0:
                if not mesh.periodic:
                    raise ValueError("no left limit at the left boundary in natural mode")
                n = N
            return float(right_end[n - 1])
        if n == N:
            if not mesh.periodic:
                raise ValueError("no right limit at the right boundary in natural mode")
            n = 0
        return float(left_end[n])

    def traces(self) -> tuple[np.ndarray, np.ndarray]:
        """Values at the left and right end of each element."""
        lo, hi = basis.end_values(self.degree)
        a = self.legendre()
        return a @ lo, a @ hi

    def face_traces(self) -> tuple[np.ndarray, np.ndarray]:
        """One-sided values ``(v^-, v^+)`` on the mesh skeleton."""
        left_end, right_end = self.traces()
        return right_end[self.mesh.face_left], left_end[self.mesh.face_right]

    def jumps(self) -> np.ndarray:
        minus, plus = self.face_traces()
        return minus - plus

    def derivative(self, order: int = 1) -> "BrokenField":
        out = self
        for _ in range(order):
            q = out.degree
            if q == 0:
                return BrokenField.zeros(self.mesh, 0)
            da = out.legendre() @ basis.derivative_matrix(q).T
            da *= (2.0 / self.mesh.element_widths)[:, None]
            out = BrokenField.from_legendre(self.mesh, da[:, :q])
        return out

    # -- integrals --------------------------------------------------------------
    def element_integrals(self) -> np.ndarray:
        return self.coeffs[:, 0] * np.sqrt(self.mesh.element_widths)

    def integral(self) -> float:
        return float(self.element_integrals().sum())

    def mean(self) -> float:
        return self.integral() / self.mesh.length

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs**2)))

    def inner(self, other: "BrokenField") -> float:
        a, b = self._aligned(other)
        return float(np.sum(a * b))

    def max_abs(self, samples_per_element: int = 201) -> float:
        xi = np.linspace(-1.0, 1.0, samples_per_element)
        return float(np.abs(self.at_reference(xi)).max())


@dataclass(frozen=True, eq=False)
class ContinuousField(BrokenField):
    """Broken field whose skeleton jumps vanish up to roundoff."""

    def __post_init__(self):
        super().__post_init__()
        jumps = self.jumps()
        scale = max(1.0, float(np.abs(self.traces()[0]).max(initial=0.0)))
        if jumps.size and np.abs(jumps).max() > 1e-9 * scale:
            raise ValueError("field is not continuous across the skeleton")


# -- quadrature helpers ----------------------------------------------------------


def quadrature_points(mesh: Mesh1D, n_points: int) -> np.ndarray:
    """Physical Gauss points, shape (N, n_points)."""
    xi = gauss_rule(n_points).nodes
    a = mesh.nodes[:-1, None]
    h = mesh.element_widths[:, None]
    return a + 0.5 * h * (xi + 1.0)


def integrate(mesh: Mesh1D, values: np.ndarray) -> np.ndarray:
    """Element integrals of quadrature-point values shaped (N, n_points)."""
    w = gauss_rule(values.shape[1]).weights
    return 0.5 * mesh.element_widths * (values @ w)


def data_points(degree: int) -> int:
    return max(basis.default_points(degree), 12)


def moments(values: np.ndarray, mesh: Mesh1D, degree: int) -> np.ndarray:
    """``int_K f phi_k`` from quadrature-point values of ``f``."""
    nq = values.shape[1]
    w = gauss_rule(nq).weights
    v = basis.vander_at(nq, degree)
    s = basis.norm_factors(degree)
    return 0.5 * np.sqrt(mesh.element_widths)[:, None] * ((values * w) @ v) * s


def project_l2(f, mesh: Mesh1D, degree: int, n_points: int | None = None) -> BrokenField:
    """Element-wise L2 projection of a callable or a broken field onto degree ``degree``."""
    if isinstance(f, BrokenField):
        if f.mesh == mesh and f.degree <= degree:
            return f.with_degree(degree)
        nq = n_points or basis.default_points(max(degree, f.degree))
        values = f(quadrature_points(mesh, nq)) if f.mesh != mesh else f.at_quadrature(nq)
    else:
        nq = n_points or data_points(degree)
        values = np.asarray(f(quadrature_points(mesh, nq)), dtype=float)
        values = np.broadcast_to(values, (mesh.n_elements, nq))
    return BrokenField(mesh, moments(values, mesh, degree))


# -- continuous subspace ---------------------------------------------------------


def continuous_basis(mesh: Mesh1D, degree: int) -> sp.csr_matrix:
    """Columns are vertex hats and element bubbles written in the broken basis.

    Bubbles use ``P_k - P_{k-2}``, which vanish at both element ends.
    """
    if degree < 1:
        raise ValueError("the continuous space needs degree >= 1")
    N = mesh.n_elements
    nb = degree + 1
    sqrt_h = np.sqrt(mesh.element_widths)
    s = basis.norm_factors(degree)
    n_vertex = N if mesh.periodic else N + 1
    rows, cols, vals = [], [], []
    for e in range(N):
        conv = sqrt_h[e] / s
        left_v = e
        right_v = (e + 1) % N if mesh.periodic else e + 1
        # hat rising to the right end: (1 + xi)/2 ; falling: (1 - xi)/2
        for vert, sign in ((left_v, -1.0), (right_v, 1.0)):
            rows += [e * nb, e * nb + 1]
            cols += [vert, vert]
            vals += [0.5 * conv[0], sign * 0.5 * conv[1]]
        for k in range(2, degree + 1):
            col = n_vertex + e * (degree - 1) + (k - 2)
            rows += [e * nb + k, e * nb + k - 2]
            cols += [col, col]
            vals += [conv[k], -conv[k - 2]]
    n_cols = n_vertex + N * (degree - 1)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N * nb, n_cols))


def project_continuous(f, mesh: Mesh1D, degree: int, n_points: int | None = None) -> ContinuousField:
    """L2 projection onto continuous piecewise polynomials of degree ``degree``."""
    E = continuous_basis(mesh, degree)
    b = project_l2(f, mesh, degree, n_points).flat
    mass = (E.T @ E).tocsc()
    rhs = E.T @ b
    try:
        coef = splu(mass).solve(rhs)
    except RuntimeError as exc:  # pragma: no cover - cannot happen on a valid mesh
        raise np.linalg.LinAlgError("singular continuous mass system") from exc
    residual = np.linalg.norm(mass @ coef - rhs)
    if residual > 1e-12 * max(1.0, np.linalg.norm(rhs)):
        raise np.linalg.LinAlgError(f"continuous projection residual {residual:.2e}")
    return ContinuousField(mesh, (E @ coef).reshape(mesh.n_elements, degree + 1))


def ritz_project(u0: ScalarFunction, du0: ScalarFunction, mesh: Mesh1D, degree: int, sigma: float | None = None) -> BrokenField:
    """Ritz projection with respect to the interior-penalty form, mean-matched to ``u0``.

    ``u0`` is assumed continuous, so the data side of the penalty form only
    sees its derivative and the jumps of the test functions.
    """
    from .assembly import dg_matrices, check_coercivity

    mats = dg_matrices(mesh, degree, sigma)
    check_coercivity(mats)
    nq = data_points(degree)
    xq = quadrature_points(mesh, nq)
    du_q = np.asarray(du0(xq), dtype=float)
    # broken stiffness against the data: int u0' Phi'
    s = basis.norm_factors(degree)
    w = gauss_rule(nq).weights
    dv = basis.vander_at(nq, degree) @ basis.derivative_matrix(degree)
    h = mesh.element_widths
    rhs = ((du_q * w) @ dv) * s / np.sqrt(h)[:, None]
    rhs = rhs.ravel()
    du_face = np.asarray(du0(mesh.face_positions), dtype=float)
    rhs -= mats.jump.T @ du_face
    m = mats.mean_row
    target = float(integrate(mesh, np.asarray(u0(xq), dtype=float)).sum())
    K = sp.bmat([[mats.A, m[:, None]], [m[None, :], None]], format="csc")
    sol = splu(K).solve(np.append(rhs, target))
    return BrokenField(mesh, sol[:-1].reshape(mesh.n_elements, degree + 1))
