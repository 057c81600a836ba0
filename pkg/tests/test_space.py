import numpy as np
import pytest
from hypothesis import given, strategies as st

from dgrre.mesh import build_mesh
from dgrre.space import (
    BrokenField,
    ContinuousField,
    continuous_basis,
    integrate,
    project_continuous,
    project_l2,
    quadrature_points,
    ritz_project,
)


def mesh8(bc="periodic"):
    return build_mesh((0.0, 1.0), 8, "random", bc, seed=7)


def test_constant_field_values_and_mean():
    m = mesh8()
    f = BrokenField.constant(m, 2.5, degree=2)
    np.testing.assert_allclose(f.at_quadrature(4), 2.5)
    assert f.mean() == pytest.approx(2.5)
    assert f.l2_norm() == pytest.approx(2.5)


@given(st.integers(0, 3), st.integers(0, 500))
def test_projection_reproduces_polynomials(p, seed):
    m = build_mesh((0.0, 1.0), 6, "random", seed=seed)
    c = np.random.default_rng(seed).standard_normal(p + 1)
    f = lambda x: np.polyval(c, x)
    u = project_l2(f, m, p)
    x = quadrature_points(m, 5)
    np.testing.assert_allclose(u.at_quadrature(5), f(x), atol=1e-11)


@given(st.integers(0, 3))
def test_projection_orthogonality(p):
    m = mesh8()
    u = project_l2(np.exp, m, p)
    x = quadrature_points(m, 12)
    r = np.exp(x) - u.at_quadrature(12)
    for k in range(p + 1):
        q = (x - m.nodes[:-1, None]) ** k
        assert np.abs(integrate(m, r * q)).max() < 1e-13


def test_derivative_and_traces():
    m = build_mesh((0.0, 1.0), 4)
    u = project_l2(lambda x: x**3, m, 3)
    du = u.derivative()
    x = quadrature_points(m, 4)
    np.testing.assert_allclose(du.at_quadrature(4), 3 * x**2, atol=1e-12)
    np.testing.assert_allclose(u.derivative(2).at_quadrature(4), 6 * x, atol=1e-10)
    left, right = u.traces()
    np.testing.assert_allclose(right, m.nodes[1:] ** 3, atol=1e-12)
    # x^3 is not periodic, so only the wrap face jumps
    j = u.jumps()
    np.testing.assert_allclose(j, [1.0, 0, 0, 0], atol=1e-12)


def test_point_evaluation_sides():
    m = build_mesh((0.0, 1.0), 4, bc_mode="natural")
    u = BrokenField.from_legendre(m, np.array([[0.0], [1.0], [2.0], [3.0]]))
    assert u.eval(0.25, "left") == 0.0 and u.eval(0.25, "right") == 1.0
    assert u.eval(0.1) == 0.0
    with pytest.raises(ValueError):
        u.eval(0.5)
    with pytest.raises(ValueError):
        u.eval(0.0, "left")


def test_continuous_basis_is_continuous():
    for bc in ("periodic", "natural"):
        m = mesh8(bc)
        E = continuous_basis(m, 3)
        c = np.random.default_rng(0).standard_normal(E.shape[1])
        ContinuousField(m, (E @ c).reshape(m.n_elements, 4))


def test_continuous_projection_of_continuous_polynomial():
    m = mesh8("natural")
    f = lambda x: 1 + x - 2 * x**2
    u = project_continuous(f, m, 2)
    np.testing.assert_allclose(u.at_quadrature(4), f(quadrature_points(m, 4)), atol=1e-12)


def test_ritz_projection_exact_for_periodic_polynomial_space():
    m = build_mesh((0.0, 1.0), 6, bc_mode="natural")
    f, df = (lambda x: x**2 - x), (lambda x: 2 * x - 1)
    u = ritz_project(f, df, m, 2)
    np.testing.assert_allclose(u.at_quadrature(4), f(quadrature_points(m, 4)), atol=1e-11)


def test_arithmetic_alignment_and_errors():
    m = mesh8()
    a = project_l2(np.sin, m, 1)
    b = project_l2(np.cos, m, 3)
    s = a + b
    assert s.degree == 3
    assert (s - b).with_degree(1).l2_norm() == pytest.approx(a.l2_norm())
    other = build_mesh((0.0, 1.0), 5)
    with pytest.raises(ValueError):
        a + project_l2(np.sin, other, 1)
