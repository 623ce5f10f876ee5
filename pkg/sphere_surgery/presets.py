import logging
import math

import numpy as np

from sphere_surgery import errors
from sphere_surgery.field import GridMap
from sphere_surgery.field import normalize_rows
from sphere_surgery.testfunction import bump_profile

logger = logging.getLogger(__name__)

MIN_RESOLUTION = 8


def _point(value, n, default):
    if value is None:
        return np.asarray(default, dtype=float)
    point = np.asarray(value, dtype=float).ravel()
    if point.size != n:
        raise errors.PreconditionError("Point has the wrong dimension",
            point=list(point), dimension=n)
    return point


def _unit(n, axis=-1):
    e = np.zeros(n)
    e[axis] = 1.0
    return e


def _check_singularity(lattice, point, name):
    if lattice.is_node(point):
        raise errors.SingularityOnNode("Singularity coincides with a lattice node",
            point=[float(x) for x in point], which=name)


def wrap_degree(omega, degree):
    """Compose unit vectors with the standard degree-d self map of the sphere.

    N=2 multiplies the angle by d; N=3 multiplies the azimuth by d.
    """
    degree = int(degree)
    if degree == 1:
        return normalize_rows(omega)
    if omega.shape[-1] == 2:
        theta = degree * np.arctan2(omega[..., 1], omega[..., 0])
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    polar = np.arccos(np.clip(omega[..., 2], -1.0, 1.0))
    azimuth = degree * np.arctan2(omega[..., 1], omega[..., 0])
    out = np.stack([
        np.sin(polar) * np.cos(azimuth),
        np.sin(polar) * np.sin(azimuth),
        np.cos(polar),
    ], axis=-1)
    return normalize_rows(out)


def _default_center(lattice):
    return lattice.nearest_cell_center(lattice.domain.center)


def constant(lattice, xi=None, **params):
    n = lattice.dimension
    xi = normalize_rows(_point(xi, n, _unit(n)))
    return np.broadcast_to(xi, lattice.nodes.shape).copy()


def hedgehog(lattice, degree=1, center=None, **params):
    n = lattice.dimension
    center = _point(center, n, _default_center(lattice))
    _check_singularity(lattice, center, 'center')
    rel = lattice.nodes - center
    if n == 2:
        theta = int(degree) * np.arctan2(rel[..., 1], rel[..., 0])
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    return wrap_degree(normalize_rows(rel), degree)


def dipole(lattice, plus=None, minus=None, degree=1, **params):
    """A charge of the given degree at plus and its opposite at minus.

    In three dimensions the map is the north pole away from the segment
    joining the charges and the south pole on it, tilting by the angle the
    segment subtends.
    """
    n = lattice.dimension
    middle = _default_center(lattice)
    offset = 0.3 * lattice.domain.inradius * _unit(n, 0)
    plus = _point(plus, n, middle - offset)
    minus = _point(minus, n, middle + offset)
    _check_singularity(lattice, plus, 'plus')
    _check_singularity(lattice, minus, 'minus')
    x = lattice.nodes
    a = x - plus
    b = x - minus
    if n == 2:
        theta = int(degree) * (np.arctan2(a[..., 1], a[..., 0]) -
                               np.arctan2(b[..., 1], b[..., 0]))
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    axis = minus - plus
    length = np.linalg.norm(axis)
    if length == 0:
        raise errors.PreconditionError("Dipole charges must be distinct",
            plus=list(plus), minus=list(minus))
    axis = axis / length
    side = np.cross(axis, _unit(n, int(np.argmin(np.abs(axis)))))
    side = side / np.linalg.norm(side)
    other = np.cross(axis, side)
    ra = np.linalg.norm(a, axis=-1)
    rb = np.linalg.norm(b, axis=-1)
    cos_t = np.clip(np.einsum('...i,...i->...', a, b) / (ra * rb), -1.0, 1.0)
    sin_t = np.sqrt(1.0 - cos_t ** 2)
    phi = np.arctan2(a @ other, a @ side)
    field = np.stack([sin_t * np.cos(phi), -sin_t * np.sin(phi), cos_t], axis=-1)
    return wrap_degree(field, degree)


def smooth_random(lattice, seed=0, amplitude=0.3, modes=3, **params):
    n = lattice.dimension
    rng = np.random.default_rng(int(seed))
    base = rng.normal(size=n)
    base /= np.linalg.norm(base)
    x = lattice.nodes
    perturbation = np.zeros(x.shape)
    for _ in range(modes):
        k = np.zeros(n)
        while not k.any():
            k = rng.integers(-1, 2, size=n).astype(float)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        direction = rng.normal(size=n)
        direction *= float(amplitude) / (modes * np.linalg.norm(direction))
        wave = np.sin(2.0 * math.pi * (x @ k) + phase)
        perturbation += wave[..., None] * direction
    return normalize_rows(base + perturbation)


def equator_wrap(lattice, turns=0.5, amplitude=0.3, **params):
    x = lattice.nodes
    alpha = 2.0 * math.pi * float(turns) * x[..., 0]
    if lattice.dimension == 2:
        return np.stack([np.cos(alpha), np.sin(alpha)], axis=-1)
    beta = float(amplitude) * np.sin(math.pi * x[..., 1])
    return np.stack([
        np.cos(alpha) * np.cos(beta),
        np.sin(alpha) * np.cos(beta),
        np.sin(beta),
    ], axis=-1)


def bump(lattice, xi=None, center=None, radius=None, amplitude=0.3, **params):
    n = lattice.dimension
    domain = lattice.domain
    xi = normalize_rows(_point(xi, n, _unit(n)))
    center = _point(center, n, domain.center)
    if radius is None:
        radius = 0.6 * domain.inradius
    tilt = _unit(n, 0) if abs(xi[0]) < 0.9 else _unit(n, 1)
    tilt = tilt - (tilt @ xi) * xi
    tilt /= np.linalg.norm(tilt)
    rho = np.linalg.norm(lattice.nodes - center, axis=-1)
    profile = float(amplitude) * bump_profile(rho / float(radius))
    return normalize_rows(xi + profile[..., None] * tilt)


PRESETS = {
    'constant': constant,
    'hedgehog': hedgehog,
    'dipole': dipole,
    'smooth-random': smooth_random,
    'equator-wrap': equator_wrap,
    'bump': bump,
}


def preset_names():
    return sorted(PRESETS)


def make_map(domain, resolution, preset, **params):
    """Sample a named preset on the lattice of the given resolution."""
    if int(resolution) < MIN_RESOLUTION:
        raise errors.InvalidResolution("Resolution below the preset minimum",
            resolution=resolution, minimum=MIN_RESOLUTION)
    try:
        builder = PRESETS[preset]
    except KeyError:
        raise errors.UnknownPreset("Unknown preset", preset=preset,
            known=", ".join(preset_names()))
    lattice = domain.lattice(resolution)
    params = dict((k, v) for (k, v) in params.items() if v is not None)
    logger.debug("Building %s preset at resolution %d", preset, lattice.resolution)
    values = builder(lattice, **params)
    return GridMap(lattice, values)
