import numpy as np
import pytest
from hypothesis import given, strategies as st

from dgrre.mesh import Mesh1D, build_mesh, face_iter


def test_uniform_widths_and_faces():
    m = build_mesh((0.0, 1.0), 4, bc_mode="periodic")
    np.testing.assert_allclose(m.element_widths, 0.25)
    assert m.n_faces == 4
    assert list(m.face_left) == [3, 0, 1, 2]
    assert list(m.face_right) == [0, 1, 2, 3]


def test_natural_mode_has_interior_faces_only():
    m = build_mesh((-1.0, 1.0), 5, bc_mode="natural")
    assert m.n_faces == 4
    np.testing.assert_allclose(m.face_positions, m.nodes[1:-1])


def test_widths_are_read_only():
    m = build_mesh((0.0, 1.0), 8)
    with pytest.raises(ValueError):
        m.element_widths[0] = 1.0


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        Mesh1D(np.array([0.0, 0.5, 0.4]))
    with pytest.raises(ValueError):
        build_mesh((0.0, 1.0), 1)
    with pytest.raises(ValueError):
        build_mesh((0.0, 1.0), 4, bc_mode="dirichlet")
    with pytest.raises(ValueError):
        build_mesh((0.0, 1.0), 4, "random", strength=0.6)


def test_hash_equality():
    a = build_mesh((0.0, 1.0), 8, "random", seed=3)
    b = build_mesh((0.0, 1.0), 8, "random", seed=3)
    c = build_mesh((0.0, 1.0), 8, "random", seed=4)
    assert a == b and hash(a) == hash(b)
    assert a != c


@given(st.integers(2, 60), st.integers(0, 10_000), st.sampled_from(["periodic", "natural"]))
def test_random_grading_partitions_domain(N, seed, bc):
    m = build_mesh((-0.5, 2.0), N, "random", bc, seed=seed)
    assert m.element_widths.sum() == pytest.approx(2.5)
    assert np.all(m.element_widths > 0)
    assert m.quasi_uniformity < 1.4 / 0.6 + 1e-12
    for f in face_iter(m):
        assert f.h == pytest.approx(0.5 * (f.h_minus + f.h_plus))


def test_locate_assigns_nodes_to_right_element():
    m = build_mesh((0.0, 1.0), 4)
    assert list(m.locate(np.array([0.0, 0.25, 0.3, 1.0]))) == [0, 1, 1, 3]
