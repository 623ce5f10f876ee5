import numpy as np
import pytest

from sphere_surgery import errors
from sphere_surgery.connection import MatchingSolution
from sphere_surgery.connection import l_of_map
from sphere_surgery.jacobian import detect_charges
from sphere_surgery.presets import make_map
from sphere_surgery.surgery import BAD
from sphere_surgery.surgery import calibrate_lambda
from sphere_surgery.surgery import replace_bad_ball
from sphere_surgery.surgery import replace_boundary_ball
from sphere_surgery.surgery import replace_good_ball
from sphere_surgery.surgery import select_radius


def test_select_radius_scans_the_annulus(box2):
    u = make_map(box2, 64, 'smooth-random')
    sel = select_radius(u, [0.5, 0.5], 0.1, p=1.5)
    assert 0.15 < sel.radius < 0.2
    assert sel.admissible == sel.candidates
    assert sel.fubini_holds
    assert sel.to_dict()["degree"] == 0


def test_select_radius_preconditions(box2):
    u = make_map(box2, 32, 'constant')
    with pytest.raises(errors.RadiusBelowConnection):
        select_radius(u, [0.5, 0.5], 0.1, MatchingSolution(length=1.0))
    with pytest.raises(errors.BallLeavesDomain):
        select_radius(u, [0.1, 0.5], 0.1)


def test_bad_ball_removes_a_vortex_pair(vortex_pair):
    connection = l_of_map(vortex_pair)
    assert len(connection.charges) == 2
    center = np.array([0.5, 0.5])
    w, report = replace_bad_ball(vortex_pair, center, 0.245, connection.matching,
        p=1.5, measure_l=True)
    assert report.kind == 'bad'
    assert report.homotopy["method"] == 'lift'
    assert report.slice.degree == 0
    assert 1.5 * 0.245 < report.slice.radius < 2.0 * 0.245
    assert report.checks["locality"]
    assert report.checks["l_monotone"]
    assert len(detect_charges(w).within(center, 0.245)) == 0
    assert report.l_after <= report.l_before
    assert report.to_dict()["constants"]["C_A"] > 0.0


def test_bad_ball_meets_its_volume_bound(vortex_pair):
    connection = l_of_map(vortex_pair)
    w, report = replace_bad_ball(vortex_pair, [0.5, 0.5], 0.245, connection.matching,
        p=1.5, lam=1.0)
    assert report.constants["volume_bound"] == pytest.approx((4.0 * np.pi) ** (1.0 / 1.5))
    assert report.checks["volume"]
    for name in ("C_lp", "C_grad", "C_A"):
        assert np.isfinite(report.constants[name])


def test_constant_map_is_not_a_bad_ball(box2):
    u = make_map(box2, 64, 'constant')
    with pytest.raises(errors.NotABadBall):
        replace_bad_ball(u, [0.5, 0.5], 0.2, p=1.5, lam=1.0)


def test_good_ball_smooths_without_new_charges(box3):
    u = make_map(box3, 24, 'bump')
    w, report = replace_good_ball(u, [0.5, 0.5, 0.5], 0.12, p=2.5, lam=1e6)
    assert report.kind == 'good'
    assert report.checks["locality"]
    assert report.constants["spread"] <= 1.0 / 3.0
    assert report.checks["chebyshev_poincare"]
    assert report.constants["C_P"] == pytest.approx((2.0 * report.slice.radius) ** 2.5)
    assert np.isfinite(report.constants["C_lp"])
    assert np.isfinite(report.constants["C_grad"])
    assert np.allclose(np.linalg.norm(w.values, axis=-1), 1.0)
    assert len(detect_charges(w)) == 0


def test_energetic_ball_is_not_good(box3):
    u = make_map(box3, 24, 'bump')
    with pytest.raises(errors.NotAGoodBall):
        replace_good_ball(u, [0.5, 0.5, 0.5], 0.12, p=2.5, lam=0.0)


def test_constant_good_ball_is_left_alone(box2):
    u = make_map(box2, 32, 'constant')
    w, report = replace_good_ball(u, [0.5, 0.5], 0.1, p=1.5, lam=1.0)
    assert w is u
    assert report.checks["locality"]


def test_good_ball_needs_a_small_trace(vortex_pair):
    with pytest.raises(errors.TraceNotInSmallDisk):
        replace_good_ball(vortex_pair, [0.5, 0.5013], 0.03, p=1.5, check=False)


def test_boundary_ball_on_a_constant_map(box2):
    u = make_map(box2, 64, 'constant')
    w, report = replace_boundary_ball(u, [0.0, 0.5], 0.05, p=1.5, lam=1.0, delta=0.2)
    assert w is u
    assert report.kind == 'boundary'
    assert report.outer_radius == pytest.approx(0.4)
    assert report.checks["locality"]


def test_boundary_ball_preconditions(box2, ball2):
    u = make_map(box2, 64, 'constant')
    with pytest.raises(errors.NotOnBoundary):
        replace_boundary_ball(u, [0.5, 0.5], 0.05)
    with pytest.raises(errors.RadiusTooLarge):
        replace_boundary_ball(u, [0.0, 0.5], 0.2, delta=0.2)
    v = make_map(ball2, 32, 'constant')
    with pytest.raises(errors.CurvedBoundaryUnsupported):
        replace_boundary_ball(v, [1.0, 0.0], 0.05)


def test_boundary_ball_pushes_a_vortex_out(box2):
    u = make_map(box2, 128, 'hedgehog', center=(0.03, 0.503))
    assert len(detect_charges(u)) == 1
    w, report = replace_boundary_ball(u, [0.0, 0.5], 0.05, p=1.5, delta=0.2,
        force=BAD, measure_l=True)
    assert report.homotopy["method"] == 'cone'
    assert report.checks["locality"]
    assert len(detect_charges(w)) == 0
    assert report.l_after == 0.0


def test_calibrated_lambda_is_positive():
    assert calibrate_lambda(2, 1.5, 64) > 0.0
