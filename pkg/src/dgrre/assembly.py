"""Sparse matrices of the dG operators on the orthonormal broken basis.

With an orthonormal basis the mass matrix is the identity, so a linear
operator on the broken space and its Galerkin matrix coincide.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import basis
from .mesh import Mesh1D


def default_sigma(degree: int) -> float:
    return 10.0 * (degree + 1) ** 2


class CoercivityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DGMatrices:
    mesh: Mesh1D
    degree: int
    sigma: float
    jump: sp.csr_matrix  # faces x dofs, [[v]] = v^- - v^+
    trace_minus: sp.csr_matrix  # faces x dofs, v^-
    trace_plus: sp.csr_matrix  # faces x dofs, v^+
    avg_slope: sp.csr_matrix  # faces x dofs, {v'}
    slope_jump: sp.csr_matrix  # faces x dofs, [[v']]
    derivative: sp.csr_matrix  # broken int v' phi_i
    stiffness: sp.csr_matrix  # broken int u' v'
    G_plus: sp.csr_matrix
    G_minus: sp.csr_matrix
    A: sp.csr_matrix
    mean_row: np.ndarray  # int phi_i

    @property
    def n_dof(self) -> int:
        return self.mesh.n_elements * (self.degree + 1)


def _element_traces(mesh: Mesh1D, degree: int):
    """Per-element rows mapping orthonormal coefficients to end values/slopes."""
    h = mesh.element_widths[:, None]
    s = basis.norm_factors(degree)
    lo, hi = basis.end_values(degree)
    dlo, dhi = basis.end_slopes(degree)
    scale = s / np.sqrt(h)
    return lo * scale, hi * scale, dlo * scale * 2.0 / h, dhi * scale * 2.0 / h


def _face_rows(mesh: Mesh1D, degree: int, elements: np.ndarray, rows: np.ndarray) -> sp.csr_matrix:
    nb = degree + 1
    nf = elements.size
    cols = elements[:, None] * nb + np.arange(nb)
    return sp.csr_matrix(
        (rows.ravel(), (np.repeat(np.arange(nf), nb), cols.ravel())),
        shape=(nf, mesh.n_elements * nb),
    )


@lru_cache(maxsize=32)
def dg_matrices(mesh: Mesh1D, degree: int, sigma: float | None = None) -> DGMatrices:
    sigma = default_sigma(degree) if sigma is None else float(sigma)
    if sigma <= 0:
        raise ValueError("penalty parameter must be positive")
    N, nb = mesh.n_elements, degree + 1
    h = mesh.element_widths
    lo, hi, dlo, dhi = _element_traces(mesh, degree)
    fl, fr = mesh.face_left, mesh.face_right

    t_minus = _face_rows(mesh, degree, fl, hi[fl])
    t_plus = _face_rows(mesh, degree, fr, lo[fr])
    d_minus = _face_rows(mesh, degree, fl, dhi[fl])
    d_plus = _face_rows(mesh, degree, fr, dlo[fr])
    jump = (t_minus - t_plus).tocsr()
    avg_slope = (0.5 * (d_minus + d_plus)).tocsr()
    slope_jump = (d_minus - d_plus).tocsr()

    # reference integrals; phi_k = s_k P_k / sqrt(h)
    nq = degree + 2
    w = basis.gauss_rule(nq).weights
    V = basis.vander_at(nq, degree)
    dV = V @ basis.derivative_matrix(degree)
    s = basis.norm_factors(degree)
    ref_deriv = s[:, None] * ((V.T * w) @ dV) * s[None, :]  # int P_j' P_i, rows i
    ref_stiff = s[:, None] * ((dV.T * w) @ dV) * s[None, :]
    derivative = sp.block_diag([ref_deriv / hk for hk in h], format="csr")
    stiffness = sp.block_diag([2.0 * ref_stiff / hk**2 for hk in h], format="csr")

    G_plus = (derivative - t_plus.T @ jump).tocsr()
    G_minus = (derivative - t_minus.T @ jump).tocsr()
    if not mesh.periodic:
        # exterior value zero for the minus lift, so that G^- = -(G^+)^T
        first = _face_rows(mesh, degree, np.array([0]), lo[:1])
        last = _face_rows(mesh, degree, np.array([N - 1]), hi[-1:])
        G_minus = (G_minus - last.T @ last + first.T @ first).tocsr()

    penalty = sp.diags(sigma / mesh.face_h)
    A = (stiffness - jump.T @ avg_slope - avg_slope.T @ jump + jump.T @ penalty @ jump).tocsr()

    mean_row = np.zeros(N * nb)
    mean_row[::nb] = np.sqrt(h)
    return DGMatrices(
        mesh, degree, sigma, jump, t_minus, t_plus, avg_slope, slope_jump,
        derivative, stiffness, G_plus, G_minus, A, mean_row,
    )


def dg_norm_matrix(mats: DGMatrices) -> sp.csr_matrix:
    """Matrix of the squared dG seminorm."""
    inv_h = sp.diags(1.0 / mats.mesh.face_h)
    return (mats.stiffness + mats.jump.T @ inv_h @ mats.jump).tocsr()


@lru_cache(maxsize=32)
def coercivity_constant(mats: DGMatrices) -> float:
    """Smallest ``A(u,u) / |u|_dG^2`` over functions with zero mean."""
    m = mats.mean_row[:, None]
    A = mats.A.toarray() + m @ m.T
    B = dg_norm_matrix(mats).toarray() + m @ m.T
    return float(scipy.linalg.eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])[0])


def check_coercivity(mats: DGMatrices, limit: int = 1200) -> float | None:
    """Raise when the penalty form is not coercive; skipped above ``limit`` dofs."""
    if mats.n_dof > limit:
        return None
    c = coercivity_constant(mats)
    if c <= 0:
        raise CoercivityError(
            f"interior-penalty form is not coercive for sigma={mats.sigma:g} (min ratio {c:.3e})"
        )
    return c
