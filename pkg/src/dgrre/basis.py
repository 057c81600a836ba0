"""Reference-element tables: Gauss rules and Legendre polynomial algebra.

Fields store coefficients in the element-wise orthonormal basis
``phi_k(x) = sqrt((2k+1)/h) P_k(xi)`` where ``xi`` maps the element onto
``[-1, 1]``.  The helpers here work with plain Legendre coefficients on the
reference element; ``scale`` converts between the two.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return self.nodes.size

    @property
    def exactness(self) -> int:
        return 2 * self.nodes.size - 1


@lru_cache(maxsize=None)
def gauss_rule(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule on [-1, 1], exact through degree ``2n - 1``."""
    if n_points < 1:
        raise ValueError("n_points must be positive")
    x, w = legendre.leggauss(n_points)
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(x, w)


def default_points(degree: int) -> int:
    # exact through 4p + 7, enough for W'(u_h) * test with a quartic well
    return 2 * degree + 4


@lru_cache(maxsize=None)
def norm_factors(degree: int) -> np.ndarray:
    s = np.sqrt(2.0 * np.arange(degree + 1) + 1.0)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=None)
def vander_at(n_points: int, degree: int) -> np.ndarray:
    """``P_k(xi_q)`` at the Gauss points, shape (n_points, degree + 1)."""
    v = legendre.legvander(gauss_rule(n_points).nodes, degree)
    v.setflags(write=False)
    return v


@lru_cache(maxsize=None)
def derivative_matrix(degree: int) -> np.ndarray:
    """``D`` with ``d/dxi sum a_k P_k = sum (D a)_j P_j`` (same length)."""
    d = np.zeros((degree + 1, degree + 1))
    for k in range(1, degree + 1):
        for j in range(k - 1, -1, -2):
            d[j, k] = 2 * j + 1
    d.setflags(write=False)
    return d


@lru_cache(maxsize=None)
def antiderivative_matrix(degree: int) -> np.ndarray:
    """Maps Legendre coefficients to those of ``int_{-1}^{xi}``, shape (degree+2, degree+1)."""
    m = np.zeros((degree + 2, degree + 1))
    m[0, 0] = 1.0
    m[1, 0] = 1.0
    for k in range(1, degree + 1):
        m[k + 1, k] += 1.0 / (2 * k + 1)
        m[k - 1, k] -= 1.0 / (2 * k + 1)
    m.setflags(write=False)
    return m


def end_values(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """``P_k(-1)`` and ``P_k(1)``."""
    k = np.arange(degree + 1)
    return (-1.0) ** k, np.ones(degree + 1)


def end_slopes(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """``P_k'(-1)`` and ``P_k'(1)``."""
    k = np.arange(degree + 1)
    right = k * (k + 1) / 2.0
    return (-1.0) ** (k + 1) * right, right
