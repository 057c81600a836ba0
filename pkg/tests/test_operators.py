import numpy as np
import pytest
from hypothesis import given, strategies as st

from dgrre.checks import random_field, reconstruction_defects
from dgrre.mesh import build_mesh
from dgrre.operators import (
    bell_polynomials,
    composed_derivative,
    dg_seminorm,
    discrete_gradient,
    discrete_reconstruction,
    elementwise_ibp_check,
    ibp_duality_check,
    ip_form,
    jump_norm_sq,
    traces,
)
from dgrre.space import BrokenField, integrate, project_l2, quadrature_points

meshes = st.tuples(st.integers(3, 20), st.integers(0, 10_000), st.sampled_from(["periodic", "natural"]))


def indicator(mesh, k):
    """Value 1 on element ``k``, 0 elsewhere (degree 0)."""
    c = np.zeros((mesh.n_elements, 1))
    c[k, 0] = np.sqrt(mesh.element_widths[k])
    return BrokenField(mesh, c)


def test_jump_and_average_of_indicator():
    m = build_mesh((0.0, 1.0), 8, bc_mode="periodic")
    t = traces(indicator(m, 3))
    # faces at x_3 (entering element 3) and x_4 (leaving it)
    np.testing.assert_allclose(t.jump[[3, 4]], [-1.0, 1.0])
    np.testing.assert_allclose(t.average[[3, 4]], [0.5, 0.5])
    assert np.count_nonzero(t.jump) == 2


def test_gradients_of_indicator():
    m = build_mesh((0.0, 1.0), 8, bc_mode="periodic")
    h = 1 / 8
    chi = indicator(m, 3)
    gm = discrete_gradient(chi, "-")
    gp = discrete_gradient(chi, "+")
    # G^- lifts each face jump onto the element behind the face, G^+ onto the one ahead
    np.testing.assert_allclose(gm.at_quadrature(1)[:, 0], np.roll([0, 0, 0, 1 / h, -1 / h, 0, 0, 0], -1))
    np.testing.assert_allclose(gp.at_quadrature(1)[:, 0], [0, 0, 0, 1 / h, -1 / h, 0, 0, 0])
    assert dg_seminorm(chi) == pytest.approx(np.sqrt(2 / h))


def test_ip_form_of_hat():
    m = build_mesh((0.0, 1.0), 8, bc_mode="periodic")
    hat = project_l2(lambda x: np.maximum(0, 1 - np.abs(x - 0.5) * 8), m, 1)
    assert ip_form(hat, hat) == pytest.approx(16.0)


@given(meshes, st.integers(0, 3), st.integers(0, 3))
def test_elementwise_identities(mesh_args, p, q):
    N, seed, bc = mesh_args
    m = build_mesh((0.0, 1.3), N, "random", bc, seed=seed)
    rng = np.random.default_rng(seed)
    psi, phi = random_field(rng, m, p), random_field(rng, m, q)
    scale = psi.l2_norm() * phi.l2_norm() * N**2
    assert elementwise_ibp_check(psi, phi) <= 1e-11 * scale


@given(meshes, st.integers(0, 3))
def test_discrete_duality(mesh_args, p):
    N, seed, bc = mesh_args
    m = build_mesh((0.0, 1.0), N, "random", bc, seed=seed)
    rng = np.random.default_rng(seed)
    a, b = random_field(rng, m, p), random_field(rng, m, p)
    assert ibp_duality_check(a, b) <= 1e-11 * a.l2_norm() * b.l2_norm() * N**2


@given(meshes, st.integers(0, 3))
def test_reconstruction_contract(mesh_args, p):
    N, seed, bc = mesh_args
    m = build_mesh((0.0, 1.0), N, "random", bc, seed=seed)
    psi = random_field(np.random.default_rng(seed), m, p)
    for side in "+-":
        d = reconstruction_defects(psi, side)
        assert d["jump"] <= 1e-10 and d["trace"] <= 1e-12
        assert d["orthogonality"] <= 1e-11 and d["gradient"] <= 1e-11


def test_reconstruction_keeps_continuous_fields():
    m = build_mesh((0.0, 1.0), 10, "random", "periodic", seed=3)
    u = project_l2(lambda x: np.sin(2 * np.pi * x), m, 2)
    from dgrre.space import project_continuous

    c = project_continuous(lambda x: np.sin(2 * np.pi * x), m, 2)
    for side in "+-":
        D = discrete_reconstruction(c, side)
        np.testing.assert_allclose(D.with_degree(3).coeffs[:, :3], c.coeffs, atol=1e-12)
        np.testing.assert_allclose(D.coeffs[:, 3], 0.0, atol=1e-12)
    assert u.degree == 2


def test_smooth_gradient_is_projection():
    m = build_mesh((0.0, 1.0), 12, bc_mode="periodic")
    g = discrete_gradient((np.sin, np.cos), "+", m, 2)
    ref = project_l2(np.cos, m, 2)
    np.testing.assert_allclose(g.coeffs, ref.coeffs, atol=1e-13)
    with pytest.raises(ValueError):
        discrete_gradient((np.sin, np.cos), "+")
    with pytest.raises(ValueError):
        discrete_gradient(ref, "*")


def test_jump_norms():
    m = build_mesh((0.0, 1.0), 8, bc_mode="periodic")
    chi = indicator(m, 2)
    assert jump_norm_sq(chi) == pytest.approx(2.0)
    assert jump_norm_sq(chi, "inv_h") == pytest.approx(16.0)
    with pytest.raises(ValueError):
        jump_norm_sq(chi, "h")


def test_bell_polynomials_small_orders():
    x = [np.array(2.0), np.array(3.0), np.array(5.0)]
    b = bell_polynomials(3, x)
    # B_{3,1} = x3, B_{3,2} = 3 x1 x2, B_{3,3} = x1^3
    assert [float(v) for v in b] == [0.0, 5.0, 18.0, 8.0]


def test_composed_derivative_symbolic_oracle():
    # u = x on [0, 1], W' = 4u^3 - 4u: d^2/dx^2 W'(u) = 24x and int (24x)^2 = 192
    m = build_mesh((0.0, 1.0), 4, bc_mode="natural")
    u = project_l2(lambda x: x, m, 1)
    from dgrre.model import double_well

    W = double_well()
    vals = composed_derivative(u, lambda s, j: W.derivative(s, j + 1), 2, 6)
    np.testing.assert_allclose(vals, 24 * quadrature_points(m, 6), atol=1e-11)
    assert integrate(m, vals**2).sum() == pytest.approx(192.0)


@given(st.integers(1, 4))
def test_composed_derivative_against_sin_of_polynomial(order):
    m = build_mesh((0.0, 1.0), 5, bc_mode="natural")
    u = project_l2(lambda x: x**2, m, 2)
    outer = lambda s, j: [np.sin, np.cos, lambda y: -np.sin(y), lambda y: -np.cos(y)][j % 4](s)
    vals = composed_derivative(u, outer, order, 6)
    import sympy as sp

    X = sp.symbols("x")
    f = sp.lambdify(X, sp.diff(sp.sin(X**2), X, order), "numpy")
    np.testing.assert_allclose(vals, f(quadrature_points(m, 6)), atol=1e-10)
