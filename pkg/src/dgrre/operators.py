"""Skeleton calculus, discrete gradients and reconstructions, the
interior-penalty form and the norms used throughout."""

from __future__ import annotations

from math import comb
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import basis
from .assembly import dg_matrices
from .mesh import Mesh1D
from .space import BrokenField, ContinuousField, integrate, quadrature_points


class FaceTracePair(NamedTuple):
    minus: np.ndarray
    plus: np.ndarray

    @property
    def jump(self) -> np.ndarray:
        return self.minus - self.plus

    @property
    def average(self) -> np.ndarray:
        return 0.5 * (self.minus + self.plus)


def traces(field: BrokenField) -> FaceTracePair:
    return FaceTracePair(*field.face_traces())


def _boundary_values(field: BrokenField) -> tuple[float, float]:
    left, right = field.traces()
    return float(left[0]), float(right[-1])


def elementwise_ibp_check(psi: BrokenField, phi: BrokenField) -> float:
    """Largest defect of the two elementwise integration identities.

    The first compares ``sum_K int psi' phi`` with
    ``sum_K (-int psi phi' + int_dK phi psi n)``, the second rewrites the
    boundary sum through jumps and averages on the skeleton.
    """
    mesh = psi.mesh
    q = psi.degree + phi.degree + 2
    nq = q // 2 + 1
    lhs = integrate(mesh, psi.derivative().at_quadrature(nq) * phi.at_quadrature(nq)).sum()
    vol = integrate(mesh, psi.at_quadrature(nq) * phi.derivative().at_quadrature(nq)).sum()
    pl, pr = psi.traces()
    fl, fr = phi.traces()
    boundary = float(np.sum(pr * fr - pl * fl))
    r1 = abs(lhs - (-vol + boundary))

    tp, tf = traces(psi), traces(phi)
    skeleton = float(np.sum(tp.jump * tf.average + tf.jump * tp.average))
    jump_prod = float(np.sum(tp.minus * tf.minus - tp.plus * tf.plus))
    if not mesh.periodic:
        # natural mode: the domain ends carry the outer boundary term
        skeleton += pr[-1] * fr[-1] - pl[0] * fl[0]
        jump_prod += pr[-1] * fr[-1] - pl[0] * fl[0]
    r2 = max(abs(boundary - skeleton), abs(skeleton - jump_prod))
    return float(max(r1, r2))


def _check_side(side: str) -> str:
    if side not in ("+", "-"):
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    return side


def discrete_gradient(psi, side: str, mesh: Mesh1D | None = None, degree: int | None = None) -> BrokenField:
    """``G^+`` or ``G^-`` of a broken field, or of a smooth function.

    A smooth ``psi`` is given as a pair ``(f, df)`` of callables together
    with ``mesh`` and ``degree``; it has no jumps, so the result is the L2
    projection of ``df``.
    """
    _check_side(side)
    if isinstance(psi, BrokenField):
        mats = dg_matrices(psi.mesh, psi.degree)
        G = mats.G_plus if side == "+" else mats.G_minus
        return BrokenField(psi.mesh, (G @ psi.flat).reshape(psi.coeffs.shape))
    f, df = psi
    if mesh is None or degree is None:
        raise ValueError("mesh and degree are required for a smooth argument")
    from .space import data_points, project_l2

    out = project_l2(df, mesh, degree, data_points(degree))
    if not mesh.periodic and side == "-":
        # lift of the zero exterior value at the two domain ends
        a, b = mesh.domain
        lo, hi = basis.end_values(degree)
        s = basis.norm_factors(degree)
        h = mesh.element_widths
        c = out.coeffs.copy()
        c[0] += float(f(np.array([a]))[0]) * lo * s / np.sqrt(h[0])
        c[-1] -= float(f(np.array([b]))[0]) * hi * s / np.sqrt(h[-1])
        out = BrokenField(mesh, c)
    return out


def ibp_duality_check(Psi: BrokenField, Phi: BrokenField) -> float:
    """``max_pm |int G^pm[Psi] Phi + int Psi G^mp[Phi]|``."""
    r = 0.0
    for s, t in (("+", "-"), ("-", "+")):
        r = max(r, abs(discrete_gradient(Psi, s).inner(Phi) + Psi.inner(discrete_gradient(Phi, t))))
    return r


def discrete_reconstruction(Psi: BrokenField, side: str) -> ContinuousField:
    """Continuous degree ``p+1`` field sharing the lower moments of ``Psi``.

    Node values are the one-sided traces ``Psi^-`` for ``D^+`` and
    ``Psi^+`` for ``D^-``. The derivative then projects onto ``G^pm``.
    """
    _check_side(side)
    mesh, p = Psi.mesh, Psi.degree
    N = mesh.n_elements
    left, right = Psi.traces()
    nodal = np.empty(N + 1)
    if side == "+":
        nodal[1:N] = right[:-1]
        nodal[0] = right[-1] if mesh.periodic else left[0]
        nodal[N] = right[-1]
    else:
        nodal[1:N] = left[1:]
        nodal[0] = left[0] if mesh.periodic else 0.0
        nodal[N] = left[0] if mesh.periodic else 0.0
    a = np.zeros((N, p + 2))
    a[:, :p] = Psi.legendre()[:, :p]
    lo, _ = basis.end_values(p - 1) if p > 0 else (np.zeros(0), None)
    r = nodal[1:] - a[:, :p].sum(axis=1)
    l = nodal[:-1] - a[:, :p] @ lo if p > 0 else nodal[:-1].copy()
    sgn = (-1.0) ** p
    a[:, p] = 0.5 * (r + sgn * l)
    a[:, p + 1] = 0.5 * (r - sgn * l)
    return ContinuousField.from_legendre(mesh, a)


def ip_form(u: BrokenField, z: BrokenField, sigma: float | None = None) -> float:
    """Symmetric interior-penalty form with coercive penalty sign."""
    from .assembly import default_sigma

    if u.mesh != z.mesh:
        raise ValueError("fields live on different meshes")
    mesh = u.mesh
    sigma = default_sigma(max(u.degree, z.degree)) if sigma is None else sigma
    nq = max(u.degree, z.degree) + 1
    vol = integrate(mesh, u.derivative().at_quadrature(nq) * z.derivative().at_quadrature(nq)).sum()
    tu, tz = traces(u), traces(z)
    du, dz = traces(u.derivative()), traces(z.derivative())
    faces = tu.jump * dz.average + tz.jump * du.average
    penalty = sigma / mesh.face_h * tu.jump * tz.jump
    return float(vol - faces.sum() + penalty.sum())


def dg_seminorm(u: BrokenField) -> float:
    """``(sum_K |u'|^2_K + sum_E [[u]]^2 / h_E)^(1/2)``."""
    mesh = u.mesh
    nq = u.degree + 1
    du = u.derivative().at_quadrature(nq)
    vol = integrate(mesh, du * du).sum()
    jump = u.jumps()
    return float(np.sqrt(vol + np.sum(jump**2 / mesh.face_h)))


def jump_norm_sq(field: BrokenField, weight: str = "none") -> float:
    """``sum_E w_E [[field]]^2`` with ``w = 1`` or ``1 / h_E``."""
    j = field.jumps()
    if weight == "inv_h":
        return float(np.sum(j**2 / field.mesh.face_h))
    if weight != "none":
        raise ValueError(f"unknown weight {weight!r}")
    return float(np.sum(j**2))


def bell_polynomials(n: int, xs: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Partial Bell polynomials ``B_{n,k}(x_1, ..., x_{n-k+1})`` for ``k = 0..n``."""
    shape = np.shape(xs[0]) if xs else ()
    table: dict[tuple[int, int], np.ndarray] = {(0, 0): np.ones(shape)}
    for m in range(1, n + 1):
        table[(m, 0)] = np.zeros(shape)
        for k in range(1, m + 1):
            acc = np.zeros(shape)
            for i in range(1, m - k + 2):
                prev = table.get((m - i, k - 1))
                if prev is not None:
                    acc = acc + comb(m - 1, i - 1) * xs[i - 1] * prev
            table[(m, k)] = acc
    return [table[(n, k)] for k in range(n + 1)]


def composed_derivative(
    u: BrokenField,
    outer: Callable[[np.ndarray, int], np.ndarray],
    order: int,
    n_points: int,
) -> np.ndarray:
    """``d^order/dx^order outer(u(x))`` at the Gauss points of every element.

    ``outer(values, j)`` must return the ``j``-th derivative of the outer
    function. Uses Faa di Bruno's formula with partial Bell polynomials.
    """
    vals = u.at_quadrature(n_points)
    if order == 0:
        return outer(vals, 0)
    xs = [u.derivative(m).at_quadrature(n_points) for m in range(1, order + 1)]
    bells = bell_polynomials(order, xs)
    out = np.zeros_like(vals)
    for k in range(1, order + 1):
        out += outer(vals, k) * bells[k]
    return out


def sobolev_seminorm_element(values: np.ndarray, mesh: Mesh1D) -> np.ndarray:
    """Per-element ``int_K g^2`` from Gauss-point samples of ``g = d^k f``."""
    return integrate(mesh, values**2)


def sobolev_seminorm_sq(f: Callable, mesh: Mesh1D, order: int, n_points: int = 12) -> np.ndarray:
    """``|f|^2_{H^order(K)}`` per element for a callable ``f(x, order)``."""
    x = quadrature_points(mesh, n_points)
    return integrate(mesh, np.asarray(f(x, order)) ** 2)


__all__ = [
    "FaceTracePair",
    "traces",
    "elementwise_ibp_check",
    "discrete_gradient",
    "ibp_duality_check",
    "discrete_reconstruction",
    "ip_form",
    "dg_seminorm",
    "jump_norm_sq",
    "bell_polynomials",
    "composed_derivative",
    "sobolev_seminorm_element",
    "sobolev_seminorm_sq",
]
