import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from sphere_surgery import errors
from sphere_surgery.lattice import cell_average
from sphere_surgery.lattice import cell_gradient
from sphere_surgery.lattice import corner_offsets
from sphere_surgery.lattice import corner_slices

logger = logging.getLogger(__name__)

# minimum norm accepted before renormalising a mollified field
DELTA_PROJ = 0.1

UNIT_TOLERANCE = 1e-12

# trace samples whose interpolant is shorter than this are flagged
WEAK_TRACE = 0.1


def normalize_rows(values, fallback=None):
    values = np.asarray(values, dtype=float)
    norms = np.linalg.norm(values, axis=-1, keepdims=True)
    out = np.divide(values, norms, out=np.zeros_like(values), where=norms > 0)
    zero = norms[..., 0] == 0
    if np.any(zero):
        if fallback is None:
            fallback = np.zeros(values.shape[-1])
            fallback[-1] = 1.0
        out[zero] = fallback
    return out


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class NodeField:
    """An R^N valued field sampled at the lattice nodes."""

    lattice: object
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        expected = tuple(self.lattice.shape) + (self.lattice.dimension,)
        if values.shape != expected:
            raise errors.LatticeMismatch("Field values do not match the lattice",
                expected=expected, found=values.shape)
        object.__setattr__(self, 'values', values)

    @property
    def dimension(self):
        return self.lattice.dimension

    @property
    def spacing(self):
        return self.lattice.spacing

    @property
    def domain(self):
        return self.lattice.domain

    def at_cells(self):
        return CellField(self.lattice, cell_average(self.values, self.dimension))

    def norms(self):
        return np.linalg.norm(self.values, axis=-1)

    def __sub__(self, other):
        _check_lattices(self, other)
        return NodeField(self.lattice, self.values - other.values)


@dataclass(frozen=True, eq=False)
class GridMap(NodeField):
    """A unit vector field u: lattice nodes -> S^(N-1)."""

    def __post_init__(self):
        super().__post_init__()
        active = self.lattice.node_active
        deviation = np.abs(self.norms() - 1.0)
        deviation[~active] = 0.0
        worst = int(np.argmax(deviation))
        if deviation.flat[worst] > UNIT_TOLERANCE:
            index = np.unravel_index(worst, deviation.shape)
            raise errors.NotUnitValued("Map values are not unit vectors",
                node=tuple(int(i) for i in index),
                deviation=float(deviation.flat[worst]))

    @classmethod
    def constant(cls, lattice, xi):
        xi = normalize_rows(np.asarray(xi, dtype=float))
        values = np.broadcast_to(xi, tuple(lattice.shape) + (lattice.dimension,))
        return cls(lattice, values)

    def with_values(self, values):
        return GridMap(self.lattice, values)


@dataclass(frozen=True, eq=False)
class CellField:
    """Scalar, vector or matrix data attached to lattice cells."""

    lattice: object
    data: np.ndarray

    def magnitude(self):
        n = self.lattice.dimension
        if self.data.ndim == n:
            return np.abs(self.data)
        axes = tuple(range(n, self.data.ndim))
        return np.sqrt(np.sum(self.data ** 2, axis=axes))

    def __sub__(self, other):
        _check_lattices(self, other)
        return CellField(self.lattice, self.data - other.data)


@dataclass(frozen=True, eq=False)
class GradientField(CellField):
    """Per-cell matrices data[..., j, a] = d u_a / d x_j."""

    scheme: str = 'forward-cell'

    @property
    def matrices(self):
        return self.data


def _check_lattices(a, b):
    if not a.lattice.same_as(b.lattice):
        raise errors.LatticeMismatch("Fields live on different lattices",
            left=a.lattice.resolution, right=b.lattice.resolution)


def gradient(u):
    data = cell_gradient(u.values, u.spacing, u.dimension)
    return GradientField(u.lattice, data)


def check_exponent(p):
    if not (np.isfinite(p) and p >= 1.0):
        raise errors.InvalidExponent("Exponent must be finite and at least 1", p=p)


def lp_norm(f, p, region=None):
    """Midpoint-rule L^p norm over the active cells of region.

    Node fields are evaluated at cell midpoints by corner averaging. An empty
    region logs a warning and gives 0.
    """
    check_exponent(p)
    if isinstance(f, NodeField):
        f = f.at_cells()
    lattice = f.lattice
    mask = lattice.cell_active
    if region is not None:
        mask = mask & region
    if not mask.any():
        logger.warning("L^%g norm over an empty region, returning 0", p)
        return 0.0
    mag = f.magnitude()[mask]
    return float((np.sum(mag ** p) * lattice.cell_volume) ** (1.0 / p))


def w1p_distance(u, v, p):
    _check_lattices(u, v)
    return lp_norm(u - v, p) + lp_norm(gradient(u) - gradient(v), p)


def ball_region(lattice, center, radius):
    """Active cells whose centres lie within radius of center."""
    rel = lattice.cell_centers - np.asarray(center, dtype=float)
    inside = np.linalg.norm(rel, axis=-1) < radius
    return inside & lattice.cell_active


def cells_touching(lattice, node_mask):
    """Cells with at least one corner in node_mask."""
    cells = lattice.cell_shape
    touched = np.zeros(cells, dtype=bool)
    for offset in corner_offsets(lattice.dimension):
        touched |= node_mask[corner_slices(offset, cells)]
    return touched


_ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


@lru_cache(maxsize=None)
def _icosphere(level):
    t = (1.0 + math.sqrt(5.0)) / 2.0
    vertices = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    vertices = [tuple(np.array(v) / np.linalg.norm(v)) for v in vertices]
    faces = list(_ICOSAHEDRON_FACES)
    for _ in range(level):
        midpoints = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoints:
                m = np.add(vertices[i], vertices[j])
                vertices.append(tuple(m / np.linalg.norm(m)))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for (a, b, c) in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            refined.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
        faces = refined
    v = np.array(vertices)
    f = np.array(faces, dtype=int)
    # orient every face counter-clockwise seen from outside
    normal = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    flip = np.einsum('ij,ij->i', normal, v[f].sum(axis=1)) < 0
    f[flip] = f[flip][:, ::-1]
    v.setflags(write=False)
    f.setflags(write=False)
    return v, f


def icosphere(level):
    """Unit icosphere after level subdivisions, faces oriented outward."""
    v, f = _icosphere(int(level))
    return v.copy(), f.copy()


def sphere_level(radius, spacing):
    level = math.ceil(math.log2(max(1.05 * radius / spacing, 1.0)))
    return int(min(max(level, 2), 5))


def circle_samples(radius, spacing):
    return max(64, int(math.ceil(8.0 * math.pi * radius / spacing)))


def lattice_sampler(u):
    return RegularGridInterpolator(u.lattice.axes, u.values,
        method='linear', bounds_error=False, fill_value=None)


@dataclass(frozen=True, eq=False)
class SphericalTrace:
    """A map restricted to the sphere of given centre and radius.

    elements are triangles (N=3) or arc segments (N=2) of the sample mesh
    lying inside the closed domain; complete is False when part of the
    sphere leaves the domain.
    """

    domain: object
    center: np.ndarray
    radius: float
    directions: np.ndarray
    values: np.ndarray
    weak: np.ndarray
    elements: np.ndarray
    element_gradient: np.ndarray
    element_measure: np.ndarray
    inside: np.ndarray
    p: float
    energy: float
    complete: bool
    sampler: object = None

    @property
    def dimension(self):
        return self.directions.shape[-1]

    def sample(self, points):
        points = self.domain.clamp(points)
        return normalize_rows(self.sampler(points))

    def vertex_weights(self):
        weights = np.zeros(len(self.directions))
        share = self.element_measure / self.elements.shape[1]
        for k in range(self.elements.shape[1]):
            np.add.at(weights, self.elements[:, k], share)
        return weights

    def used(self):
        mask = np.zeros(len(self.directions), dtype=bool)
        mask[self.elements.ravel()] = True
        return mask

    def mean_direction(self):
        w = self.vertex_weights()
        mean = (self.values * w[:, None]).sum(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            mean = np.zeros(self.dimension)
            mean[-1] = 1.0
            return mean
        return mean / norm

    def spread(self, xi):
        used = self.used()
        dots = np.clip(self.values[used] @ np.asarray(xi), -1.0, 1.0)
        return float(np.arccos(dots.min())) if dots.size else 0.0

    def to_dict(self):
        return {
            "center": [float(c) for c in self.center],
            "radius": self.radius,
            "samples": int(len(self.directions)),
            "weak_samples": int(self.weak.sum()),
            "energy": self.energy,
            "complete": self.complete,
        }


def _tangential_gradient(points, values, elements):
    if elements.shape[1] == 2:
        a, b = elements[:, 0], elements[:, 1]
        ds = np.linalg.norm(points[b] - points[a], axis=1)
        grad = np.linalg.norm(values[b] - values[a], axis=1) / ds
        return grad, ds
    a, b, c = elements[:, 0], elements[:, 1], elements[:, 2]
    e = np.stack([points[b] - points[a], points[c] - points[a]], axis=-1)
    dv = np.stack([values[b] - values[a], values[c] - values[a]], axis=-1)
    g = np.einsum('fki,fkj->fij', e, e)
    det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] * g[:, 1, 0]
    inv = np.empty_like(g)
    inv[:, 0, 0] = g[:, 1, 1]
    inv[:, 1, 1] = g[:, 0, 0]
    inv[:, 0, 1] = -g[:, 0, 1]
    inv[:, 1, 0] = -g[:, 1, 0]
    inv /= det[:, None, None]
    squared = np.einsum('fai,fij,faj->f', dv, inv, dv)
    return np.sqrt(np.maximum(squared, 0.0)), np.sqrt(det) / 2.0


def restrict_to_sphere(u, center, radius, p=2.0, level=None, samples=None):
    """Interpolate u onto a sphere mesh and renormalise.

    N=3 uses an icosphere, N=2 uniform circle samples. The result carries the
    tangential gradient per mesh element and the surface L^p energy.
    """
    n = u.dimension
    h = u.spacing
    center = np.asarray(center, dtype=float)
    if n == 3:
        if level is None:
            level = sphere_level(radius, h)
        directions, elements = icosphere(level)
    else:
        if samples is None:
            samples = circle_samples(radius, h)
        angles = 2.0 * math.pi * np.arange(samples) / samples
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        k = np.arange(samples)
        elements = np.stack([k, (k + 1) % samples], axis=1)
    points = center + radius * directions
    inside = u.domain.contains(points)
    if not inside.any():
        raise errors.SphereLeavesDomain("Sphere does not meet the domain",
            center=list(center), radius=radius)
    elements = elements[inside[elements].all(axis=1)]
    sampler = lattice_sampler(u)
    raw = sampler(u.domain.clamp(points))
    weak = np.linalg.norm(raw, axis=1) < WEAK_TRACE
    if weak.any():
        logger.debug("%d trace samples pass near a zero of the interpolant",
            int(weak.sum()))
    values = normalize_rows(raw)
    grad, measure = _tangential_gradient(points, values, elements)
    energy = float(np.sum(grad ** p * measure) ** (1.0 / p))
    return SphericalTrace(u.domain, center, float(radius), directions, values,
        weak, elements, grad, measure, inside, float(p), energy,
        bool(inside.all()), sampler)


def mollifier_kernel(epsilon, spacing, n):
    m = int(math.floor(epsilon / spacing + 1e-9))
    offsets = np.indices((2 * m + 1,) * n) - m
    t = np.sqrt(np.sum(offsets.astype(float) ** 2, axis=0)) * spacing / epsilon
    kernel = np.zeros(t.shape)
    inside = t < 1.0
    kernel[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return kernel / kernel.sum(), m


def mollify(f, epsilon, region=None):
    """Convolve with a normalised bump of radius epsilon by direct summation.

    Only active nodes contribute, and the weights are renormalised by the
    active mass so that the mollifier stays inside the domain. Nodes outside
    region keep their values.
    """
    lattice = f.lattice
    h = lattice.spacing
    if epsilon < h * (1.0 - 1e-9):
        raise errors.EpsilonBelowSpacing("Mollifier radius below the lattice spacing",
            epsilon=epsilon, spacing=h)
    n = lattice.dimension
    kernel, m = mollifier_kernel(epsilon, h, n)
    active = lattice.node_active
    target = active if region is None else (region & active)
    out = np.array(f.values, copy=True)
    if not target.any():
        return NodeField(lattice, out)
    # work on the bounding box of the target grown by the kernel reach
    index = np.argwhere(target)
    lo = np.maximum(index.min(axis=0) - m, 0)
    hi = np.minimum(index.max(axis=0) + m + 1, lattice.shape)
    window = tuple(slice(a, b) for a, b in zip(lo, hi))
    weight = active[window].astype(float)
    mass = ndimage.correlate(weight, kernel, mode='constant', cval=0.0)
    local = target[window]
    block = out[window]
    for a in range(f.values.shape[-1]):
        smooth = ndimage.correlate(f.values[window][..., a] * weight, kernel,
            mode='constant', cval=0.0)
        component = block[..., a]
        component[local] = smooth[local] / mass[local]
    return NodeField(lattice, out)


def project_to_sphere(f, delta=DELTA_PROJ, region=None):
    """Normalise nodewise; nodes outside region are copied unchanged."""
    lattice = f.lattice
    norms = f.norms()
    target = lattice.node_active if region is None else (region & lattice.node_active)
    if target.any():
        checked = np.where(target, norms, np.inf)
        worst = int(np.argmin(checked))
        if checked.flat[worst] < delta:
            index = np.unravel_index(worst, norms.shape)
            raise errors.NearZeroVector("Field too short to project onto the sphere",
                node=tuple(int(i) for i in index),
                position=[float(x) for x in lattice.nodes[index]],
                norm=float(checked.flat[worst]), threshold=delta)
    if region is None:
        return GridMap(lattice, normalize_rows(f.values))
    out = np.array(f.values, copy=True)
    out[region] = normalize_rows(out[region])
    return GridMap(lattice, out)
