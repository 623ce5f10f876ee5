import numpy as np
import pytest

from sphere_surgery.lattice import DomainSpec
from sphere_surgery.testfunction import Bump
from sphere_surgery.testfunction import Cone
from sphere_surgery.testfunction import DistanceRamp
from sphere_surgery.testfunction import LinearCombination
from sphere_surgery.testfunction import Plateau
from sphere_surgery.testfunction import Tent
from sphere_surgery.testfunction import bump_slope
from sphere_surgery.testfunction import bump_slope_max


def lipschitz_estimate(zeta, points, rng):
    other = points + rng.normal(scale=0.05, size=points.shape)
    df = np.abs(zeta.value(points) - zeta.value(other))
    dx = np.linalg.norm(points - other, axis=1)
    return float(np.max(df / dx))


def check_gradient(zeta, points, step=1e-6):
    grad = zeta.gradient(points)
    for j in range(points.shape[1]):
        e = np.zeros(points.shape[1])
        e[j] = step
        fd = (zeta.value(points + e) - zeta.value(points - e)) / (2 * step)
        assert np.allclose(grad[:, j], fd, atol=1e-5)


@pytest.fixture
def points(rng):
    return rng.uniform(0.0, 1.0, size=(400, 3))


def test_bump_slope_max_bounds_the_slope():
    t = np.linspace(-0.999, 0.999, 20001)
    worst = np.abs(bump_slope(t)).max()
    assert worst <= bump_slope_max()
    assert worst >= 0.999 * bump_slope_max()


def test_bump(points, rng):
    zeta = Bump([0.5, 0.5, 0.5], 0.3, amplitude=2.0)
    assert zeta.value(np.array([[0.5, 0.5, 0.5]]))[0] == pytest.approx(2.0)
    assert zeta.value(np.array([[0.5, 0.5, 0.81]]))[0] == 0.0
    check_gradient(zeta, points)
    assert lipschitz_estimate(zeta, points, rng) <= zeta.lipschitz + 1e-9
    assert zeta.support_inside(DomainSpec(3, 'box'))
    assert Bump.unit_lipschitz([0.5] * 3, 0.3).lipschitz == pytest.approx(1.0)


def test_cone(points, rng):
    zeta = Cone([0.4, 0.5, 0.5], 0.2, amplitude=1.5, smoothing=0.02)
    assert zeta.value(np.array([zeta.center]))[0] == pytest.approx(zeta.peak)
    far = zeta.center + np.array([zeta.support_radius + 1e-6, 0.0, 0.0])
    assert zeta.value(np.array([far]))[0] == 0.0
    check_gradient(zeta, points)
    assert lipschitz_estimate(zeta, points, rng) <= zeta.lipschitz + 1e-9


def test_tent_takes_half_the_length_at_the_charges(points, rng):
    plus = np.array([0.3, 0.5, 0.5])
    minus = np.array([0.6, 0.5, 0.5])
    zeta = Tent(plus, minus, radius=0.5)
    values = zeta.value(np.array([plus, minus]))
    assert np.allclose(values, [0.15, -0.15])
    assert lipschitz_estimate(zeta, points, rng) <= 1.0 + 1e-9
    flipped = Tent(plus, minus, radius=0.5, sign=-1)
    assert np.allclose(flipped.value(points), -zeta.value(points))


def test_distance_ramp(rng):
    box = DomainSpec(3, 'box')
    zeta = DistanceRamp(box, margin=0.1)
    assert zeta.value(np.array([[0.5, 0.5, 0.5]]))[0] == pytest.approx(0.4)
    assert zeta.value(np.array([[0.05, 0.5, 0.5]]))[0] == 0.0
    assert zeta.support_inside(box)
    assert not DistanceRamp(box, margin=0.0).support_inside(box)
    smooth = DistanceRamp(box, margin=0.1, smoothing=0.02)
    inside = rng.uniform(0.05, 0.95, size=(400, 3))
    assert lipschitz_estimate(smooth, inside, rng) <= 1.0 + 1e-9
    check_gradient(smooth, inside)


def test_ball_distance_ramp(rng):
    ball = DomainSpec(2, 'ball')
    zeta = DistanceRamp(ball, margin=0.2, smoothing=0.05)
    points = rng.uniform(-0.7, 0.7, size=(400, 2))
    check_gradient(zeta, points)
    assert lipschitz_estimate(zeta, points, rng) <= 1.0 + 1e-9


def test_plateau(points, rng):
    zeta = Plateau([0.5, 0.5, 0.5], 0.1, 0.3)
    assert zeta.value(np.array([[0.55, 0.5, 0.5]]))[0] == pytest.approx(1.0)
    assert zeta.value(np.array([[0.85, 0.5, 0.5]]))[0] == 0.0
    assert zeta.lipschitz == pytest.approx(15.0 / (8.0 * 0.2))
    check_gradient(zeta, points)
    assert lipschitz_estimate(zeta, points, rng) <= zeta.lipschitz + 1e-9


def test_linear_combination(points):
    a = Bump([0.3, 0.5, 0.5], 0.2)
    b = Plateau([0.7, 0.5, 0.5], 0.05, 0.2)
    combo = LinearCombination([(2.0, a), (-1.0, b)])
    assert np.allclose(combo.value(points), 2.0 * a.value(points) - b.value(points))
    assert combo.lipschitz == pytest.approx(2.0 * a.lipschitz + b.lipschitz)
    assert np.allclose(a.scaled(3.0).gradient(points), 3.0 * a.gradient(points))
    assert combo.to_dict()["kind"] == 'combination'
