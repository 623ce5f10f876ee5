import math

import numpy as np
import pytest

from sphere_surgery import errors
from sphere_surgery.field import lp_norm
from sphere_surgery.jacobian import ChargeSet
from sphere_surgery.jacobian import d_field
from sphere_surgery.jacobian import detect_charges
from sphere_surgery.jacobian import jac_pairing
from sphere_surgery.jacobian import pairings
from sphere_surgery.jacobian import sphere_degree
from sphere_surgery.presets import make_map
from sphere_surgery.testfunction import Bump
from sphere_surgery.testfunction import LinearCombination


def test_d_field_of_a_constant_map_vanishes(constant3):
    assert np.allclose(d_field(constant3).data, 0.0)


def test_constant_map_pairs_to_zero(constant3):
    zeta = Bump([0.5, 0.5, 0.5], 0.3)
    assert jac_pairing(constant3, zeta) == pytest.approx(0.0, abs=1e-12)


def test_hedgehog_jacobian_is_a_point_mass(ball3):
    u = make_map(ball3, 32, 'hedgehog')
    zeta = Bump(np.zeros(3), 0.5)
    assert jac_pairing(u, zeta) == pytest.approx(4.0 * math.pi / 3.0, rel=0.1)


@pytest.mark.slow
def test_hedgehog_jacobian_converges_for_three_bumps(ball3):
    atom = 4.0 * math.pi / 3.0
    family = [Bump(np.zeros(3), radius) for radius in (0.4, 0.6, 0.8)]
    misfit = []
    for res in (32, 48, 64):
        u = make_map(ball3, res, 'hedgehog')
        misfit.append(max(abs(x - atom) / atom for x in pairings(u, family)))
    assert misfit[0] > misfit[1] > misfit[2]
    assert misfit[2] <= 0.03


def test_hedgehog_d_field_matches_its_closed_form(ball3):
    u = make_map(ball3, 32, 'hedgehog')
    x = u.lattice.cell_centers
    rho = np.linalg.norm(x, axis=-1)
    shell = (rho > 0.5) & (rho < 0.9) & u.lattice.cell_active
    exact = x[shell] / rho[shell, None] ** 3
    found = d_field(u).data[shell]
    error = np.linalg.norm(found - exact, axis=-1) / np.linalg.norm(exact, axis=-1)
    assert error.max() < 0.05


def test_pairing_is_linear_in_the_test_function(hedgehog_ball3):
    a = Bump(np.zeros(3), 0.5)
    b = Bump([0.2, 0.1, 0.0], 0.4)
    combo = LinearCombination([(2.0, a), (-0.5, b)])
    expected = 2.0 * jac_pairing(hedgehog_ball3, a) - 0.5 * jac_pairing(hedgehog_ball3, b)
    assert jac_pairing(hedgehog_ball3, combo) == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_pairing_difference_is_bounded_by_the_d_fields(ball3):
    u = make_map(ball3, 16, 'hedgehog')
    v = make_map(ball3, 16, 'smooth-random', seed=3)
    zeta = Bump([0.1, 0.0, 0.0], 0.6)
    gap = abs(jac_pairing(u, zeta) - jac_pairing(v, zeta))
    assert gap <= lp_norm(d_field(u) - d_field(v), 1.0) * zeta.lipschitz + 1e-12


def test_planar_vortex_jacobian(box2):
    u = make_map(box2, 64, 'hedgehog')
    center = u.lattice.nearest_cell_center(box2.center)
    assert jac_pairing(u, Bump(center, 0.3)) == pytest.approx(math.pi, rel=0.1)


def test_pairing_needs_compact_support(constant3):
    with pytest.raises(errors.SupportTouchesBoundary):
        jac_pairing(constant3, Bump([0.1, 0.5, 0.5], 0.3))


def test_threaded_pairings_match_serial(hedgehog_ball3):
    family = [Bump(np.zeros(3), r) for r in (0.3, 0.5, 0.7)]
    serial = pairings(hedgehog_ball3, family)
    threaded = pairings(hedgehog_ball3, family, workers=3)
    assert serial == threaded


@pytest.mark.parametrize('degree', [-2, -1, 0, 1, 2])
def test_hedgehog_degrees_are_exact(ball3, degree):
    u = make_map(ball3, 32, 'hedgehog', degree=degree)
    for radius in np.linspace(0.25, 0.75, 10):
        d, residual = sphere_degree(u, np.zeros(3), radius)
        assert d == degree
        assert residual < 0.2


def test_planar_degree(box2):
    u = make_map(box2, 32, 'hedgehog', degree=-1)
    center = u.lattice.nearest_cell_center(box2.center)
    assert sphere_degree(u, center, 0.25)[0] == -1


def test_degree_needs_the_whole_sphere(hedgehog_ball3):
    with pytest.raises(errors.SphereLeavesDomain):
        sphere_degree(hedgehog_ball3, np.zeros(3), 1.2)


def test_detect_dipole_charges(box3):
    u = make_map(box3, 32, 'dipole')
    charges = detect_charges(u)
    assert len(charges) == 2
    assert charges.total_degree == 0
    reach = charges.cell_scale * math.sqrt(3.0) / 2.0 + 1e-9
    plus = np.array([0.365625, 0.515625, 0.515625])
    minus = np.array([0.665625, 0.515625, 0.515625])
    for charge in charges:
        target = plus if charge.degree > 0 else minus
        assert abs(charge.degree) == 1
        assert np.linalg.norm(np.asarray(charge.location) - target) <= reach


def test_detect_vortex_pair(vortex_pair):
    charges = detect_charges(vortex_pair)
    degrees = sorted(c.degree for c in charges)
    assert degrees == [-1, 1]
    for charge in charges:
        x = np.asarray(charge.location)
        target = (0.4725, 0.5013) if charge.degree > 0 else (0.5275, 0.5013)
        assert np.linalg.norm(x - target) <= charges.cell_scale


def test_constant_map_has_no_charges(constant3):
    assert len(detect_charges(constant3)) == 0


def test_cell_scale_below_four_cells(constant3):
    with pytest.raises(errors.CellScaleTooSmall):
        detect_charges(constant3, cell_scale=2.0 / 16)


def test_charge_set_json(box3):
    data = [
        {"x": [0.2, 0.5, 0.5], "d": 2},
        {"x": [0.7, 0.5, 0.5], "d": -1},
        {"x": [0.4, 0.4, 0.4], "d": 0},
    ]
    charges = ChargeSet.from_json(box3, {"charges": data})
    assert len(charges) == 2
    assert charges.total_degree == 1
    assert charges.expanded_count() == 3
    positives, negatives = charges.expanded()
    assert len(positives) == 2 and len(negatives) == 1
    assert charges.to_json() == data[:2]
    assert len(charges.within([0.2, 0.5, 0.5], 0.1)) == 1


@pytest.mark.parametrize('minus', [(0.5275, 0.5013), (0.5575, 0.5013)])
def test_opposite_charges_in_nearby_cubes_stay_apart(box2, minus):
    # the plus charge sits in cube 15, the minus one in cube 16 or 17
    plus = (0.4725, 0.5013)
    u = make_map(box2, 128, 'dipole', plus=plus, minus=minus)
    charges = detect_charges(u)
    assert sorted(c.degree for c in charges) == [-1, 1]
    for charge in charges:
        target = plus if charge.degree > 0 else minus
        assert np.linalg.norm(np.asarray(charge.location) - target) <= u.spacing


def test_dipole_needs_distinct_charges(box3):
    with pytest.raises(errors.PreconditionError):
        make_map(box3, 16, 'dipole', plus=(0.3, 0.53, 0.53), minus=(0.3, 0.53, 0.53))


def test_dipole_far_field_points_north(box3):
    u = make_map(box3, 32, 'dipole')
    assert u.values[0, 0, 0][2] > 0.9
    assert u.values[-1, -1, -1][2] > 0.9


def test_degree_is_additive_over_the_dipole(box3):
    u = make_map(box3, 32, 'dipole')
    plus = sphere_degree(u, [0.365625, 0.515625, 0.515625], 0.1)[0]
    minus = sphere_degree(u, [0.665625, 0.515625, 0.515625], 0.1)[0]
    assert (plus, minus) == (1, -1)
    assert sphere_degree(u, [0.515625] * 3, 0.3)[0] == plus + minus
