import math

import numpy as np
import pytest

from sphere_surgery import errors
from sphere_surgery.field import GridMap
from sphere_surgery.field import NodeField
from sphere_surgery.field import ball_region
from sphere_surgery.field import check_exponent
from sphere_surgery.field import gradient
from sphere_surgery.field import icosphere
from sphere_surgery.field import lp_norm
from sphere_surgery.field import mollify
from sphere_surgery.field import normalize_rows
from sphere_surgery.field import project_to_sphere
from sphere_surgery.field import restrict_to_sphere
from sphere_surgery.field import w1p_distance
from sphere_surgery.presets import make_map


def test_normalize_rows_falls_back_on_zero_rows():
    out = normalize_rows([[3.0, 4.0], [0.0, 0.0]])
    assert np.allclose(out, [[0.6, 0.8], [0.0, 1.0]])


def test_grid_map_rejects_non_unit_values(box2):
    lattice = box2.lattice(8)
    values = np.ones(lattice.shape + (2,))
    with pytest.raises(errors.NotUnitValued):
        GridMap(lattice, values)


def test_grid_map_rejects_wrong_shape(box2):
    lattice = box2.lattice(8)
    with pytest.raises(errors.LatticeMismatch):
        GridMap(lattice, np.zeros((3, 3, 2)))


def test_grid_map_values_are_read_only(box2):
    u = GridMap.constant(box2.lattice(8), [1.0, 0.0])
    with pytest.raises(ValueError):
        u.values[0, 0, 0] = 2.0


def test_lp_norm_of_unit_field(box3, ball2):
    u = make_map(box3, 8, 'constant')
    assert lp_norm(u, 2.0) == pytest.approx(1.0)
    v = make_map(ball2, 16, 'constant')
    volume = v.lattice.active_volume
    assert lp_norm(v, 1.5) == pytest.approx(volume ** (1.0 / 1.5))


def test_lp_norm_of_empty_region_is_zero(box2):
    u = make_map(box2, 8, 'constant')
    empty = np.zeros(u.lattice.cell_shape, dtype=bool)
    assert lp_norm(u, 2.0, empty) == 0.0


def test_exponent_below_one_is_refused():
    with pytest.raises(errors.InvalidExponent):
        check_exponent(0.5)
    with pytest.raises(errors.InvalidExponent):
        check_exponent(float('inf'))


def test_w1p_distance(box2):
    u = make_map(box2, 16, 'hedgehog')
    assert w1p_distance(u, u, 1.5) == 0.0
    assert np.allclose(gradient(make_map(box2, 16, 'constant')).data, 0.0)
    with pytest.raises(errors.LatticeMismatch):
        w1p_distance(u, make_map(box2, 8, 'hedgehog'), 1.5)


def test_ball_region_is_inside_the_ball(box2):
    lattice = box2.lattice(16)
    region = ball_region(lattice, [0.5, 0.5], 0.25)
    centers = lattice.cell_centers[region]
    assert len(centers) > 0
    assert np.all(np.linalg.norm(centers - 0.5, axis=1) < 0.25)


def test_icosphere_level_one():
    vertices, faces = icosphere(1)
    assert vertices.shape == (42, 3)
    assert faces.shape == (80, 3)
    assert np.allclose(np.linalg.norm(vertices, axis=1), 1.0)
    v = vertices[faces]
    normal = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    assert np.all(np.einsum('ij,ij->i', normal, v.sum(axis=1)) > 0)


def test_trace_of_a_constant_map(constant3):
    trace = restrict_to_sphere(constant3, [0.5, 0.5, 0.5], 0.3)
    assert trace.complete
    assert np.allclose(trace.values, [0.0, 0.0, 1.0])
    assert trace.energy == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(trace.mean_direction(), [0.0, 0.0, 1.0])
    assert trace.spread([0.0, 0.0, 1.0]) == pytest.approx(0.0, abs=1e-6)


def test_trace_leaving_the_domain(constant3):
    trace = restrict_to_sphere(constant3, [0.1, 0.5, 0.5], 0.3)
    assert not trace.complete
    assert not trace.used().all()
    with pytest.raises(errors.SphereLeavesDomain):
        restrict_to_sphere(constant3, [3.0, 3.0, 3.0], 0.5)


def test_trace_of_a_planar_vortex(box2):
    u = make_map(box2, 64, 'hedgehog')
    center = u.lattice.nearest_cell_center(box2.center)
    radius = 0.3
    trace = restrict_to_sphere(u, center, radius, p=2.0)
    assert np.allclose(trace.values, trace.directions, atol=1e-2)
    # |d/ds| = 1/R along the circle
    assert trace.energy == pytest.approx(math.sqrt(2.0 * math.pi / radius), rel=0.05)


def test_mollify_refuses_small_radius(box2):
    u = make_map(box2, 16, 'constant')
    with pytest.raises(errors.EpsilonBelowSpacing):
        mollify(u, 0.5 / 16)


def test_mollify_keeps_constants_and_the_outside(box2):
    u = make_map(box2, 16, 'hedgehog')
    region = np.zeros(u.lattice.shape, dtype=bool)
    region[2:6, 2:6] = True
    smooth = mollify(u, 3.0 / 16, region)
    assert np.array_equal(smooth.values[~region], u.values[~region])
    assert not np.allclose(smooth.values[region], u.values[region])
    c = make_map(box2, 16, 'constant')
    assert np.allclose(mollify(c, 3.0 / 16).values, c.values)


def test_project_to_sphere(box2):
    lattice = box2.lattice(8)
    values = np.broadcast_to([0.0, 2.0], lattice.shape + (2,))
    u = project_to_sphere(NodeField(lattice, values))
    assert np.allclose(u.values, [0.0, 1.0])
    with pytest.raises(errors.NearZeroVector):
        project_to_sphere(NodeField(lattice, 0.01 * values))


def test_gradient_is_second_order_at_cell_centres(box2):
    misfit = []
    for res in (16, 32):
        lattice = box2.lattice(res)
        x = lattice.nodes
        theta = 2.0 * x[..., 0] + x[..., 1]
        u = GridMap(lattice, np.stack([np.cos(theta), np.sin(theta)], axis=-1))
        c = lattice.cell_centers
        t = 2.0 * c[..., 0] + c[..., 1]
        tangent = np.stack([-np.sin(t), np.cos(t)], axis=-1)
        exact = np.stack([2.0 * tangent, tangent], axis=-2)
        misfit.append(np.abs(gradient(u).data - exact).max())
    assert misfit[1] < misfit[0] / 3.0


def test_mollify_preserves_mass_and_stays_in_the_hull(box2, rng):
    lattice = box2.lattice(32)
    values = np.zeros(lattice.shape + (2,))
    values[12:20, 12:20] = rng.normal(size=(8, 8, 2))
    smooth = mollify(NodeField(lattice, values), 3.0 / 32)
    assert np.allclose(smooth.values.sum(axis=(0, 1)), values.sum(axis=(0, 1)))
    for a in range(2):
        assert smooth.values[..., a].min() >= values[..., a].min() - 1e-12
        assert smooth.values[..., a].max() <= values[..., a].max() + 1e-12
