import math

import numpy as np
import pytest

from sphere_surgery import errors
from sphere_surgery.lattice import DomainSpec
from sphere_surgery.lattice import cell_gradient
from sphere_surgery.lattice import unit_ball_volume


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


def test_domain_rejects_unknown_shapes():
    with pytest.raises(errors.UnknownDomain):
        DomainSpec(4, 'box')
    with pytest.raises(errors.UnknownDomain):
        DomainSpec(3, 'torus')


def test_box_lattice_layout(box3):
    lattice = box3.lattice(16)
    assert lattice.spacing == pytest.approx(1.0 / 16)
    assert lattice.shape == (17, 17, 17)
    assert lattice.cell_active.all()
    assert lattice.node_active.all()
    assert np.allclose(lattice.nodes[3, 5, 7], [3 / 16, 5 / 16, 7 / 16])
    assert lattice.active_volume == pytest.approx(1.0)


def test_ball_lattice_has_origin_at_a_cell_centre(ball3):
    lattice = ball3.lattice(16)
    assert lattice.spacing == pytest.approx(2.0 / 16)
    assert lattice.shape == (18, 18, 18)
    assert np.allclose(lattice.nearest_cell_center(np.zeros(3)), 0.0)
    assert not lattice.is_node(np.zeros(3))
    assert lattice.active_volume == pytest.approx(4.0 * math.pi / 3.0, rel=0.15)


def test_active_nodes_are_corners_of_active_cells(ball2):
    lattice = ball2.lattice(20)
    active = lattice.node_active
    cells = lattice.cell_active
    # every corner of an active cell is active
    assert active[:-1, :-1][cells].all()
    assert active[1:, 1:][cells].all()
    # and the far corners of the bounding box are not
    assert not active[0, 0]
    assert not active[-1, -1]


def test_boundary_distance_and_projection(box3, ball2):
    x = np.array([0.1, 0.5, 0.6])
    assert box3.boundary_distance(x) == pytest.approx(0.1)
    assert np.allclose(box3.project_to_boundary(x), [0.0, 0.5, 0.6])
    y = np.array([0.3, 0.4])
    assert ball2.boundary_distance(y) == pytest.approx(0.5)
    assert np.allclose(ball2.project_to_boundary(y), [0.6, 0.8])


def test_touching_faces(box2, ball2):
    assert box2.touching_faces([0.0, 0.5], 0.01) == [(0, 1.0)]
    assert box2.touching_faces([1.0, 0.995], 0.01) == [(0, -1.0), (1, -1.0)]
    assert ball2.touching_faces([1.0, 0.0], 0.01) == []


def test_cell_gradient_is_exact_for_linear_fields(box2):
    lattice = box2.lattice(8)
    a = np.array([[1.0, 2.0], [-3.0, 0.5]])
    values = lattice.nodes @ a
    grad = cell_gradient(values, lattice.spacing, 2)
    # grad[..., j, k] = d_j (x a)_k = a[j, k]
    assert np.allclose(grad, a)
