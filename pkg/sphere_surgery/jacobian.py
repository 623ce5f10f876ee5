import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from sphere_surgery import errors
from sphere_surgery.field import CellField
from sphere_surgery.field import gradient
from sphere_surgery.field import restrict_to_sphere
from sphere_surgery.lattice import cell_average

logger = logging.getLogger(__name__)

# largest distance from an integer accepted before rounding a degree
DEGREE_RESIDUAL = 0.2

MIN_CUBE_CELLS = 4


def wrap_angle(x):
    return np.remainder(x + math.pi, 2.0 * math.pi) - math.pi


def solid_angles(a, b, c):
    """Signed solid angle of the spherical triangles (a, b, c)."""
    num = np.einsum('...i,...i->...', a, np.cross(b, c))
    den = (1.0 + np.einsum('...i,...i->...', a, b) +
           np.einsum('...i,...i->...', b, c) +
           np.einsum('...i,...i->...', c, a))
    return 2.0 * np.arctan2(num, den)


@dataclass(frozen=True, eq=False)
class DField(CellField):
    """Per-cell vector D_j(u): the Jacobian determinant with the j-th
    derivative column replaced by u."""


def d_field(u):
    n = u.dimension
    grad = gradient(u).data
    uc = cell_average(u.values, n)
    columns = np.swapaxes(grad, -1, -2)
    d = np.empty(uc.shape)
    for j in range(n):
        m = columns.copy()
        m[..., :, j] = uc
        d[..., j] = np.linalg.det(m)
    return DField(u.lattice, d)


def jac_pairing(u, zeta, dfield=None):
    """Midpoint value of <Jac u, zeta> = -(1/N) sum_j int D_j d_j zeta."""
    lattice = u.lattice
    if not zeta.support_inside(lattice.domain):
        raise errors.SupportTouchesBoundary("Test function support reaches the boundary",
            zeta=zeta.ident)
    centers = lattice.cell_centers
    active = lattice.cell_active
    grad = zeta.gradient(centers)
    if not active.all():
        outside = ~active
        if np.any(zeta.value(centers[outside]) != 0) or np.any(grad[outside] != 0):
            raise errors.SupportTouchesBoundary(
                "Test function support meets inactive cells", zeta=zeta.ident)
    if dfield is None:
        dfield = d_field(u)
    elif not dfield.lattice.same_as(lattice):
        raise errors.LatticeMismatch("D-field from another lattice")
    integrand = np.einsum('...j,...j->...', dfield.data, grad)
    n = lattice.dimension
    return float(-integrand[active].sum() * lattice.cell_volume / n)


def pairings(u, family, workers=1, dfield=None):
    """Pair u with every test function of the family, in family order."""
    if dfield is None:
        dfield = d_field(u)
    if workers > 1 and len(family) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda z: jac_pairing(u, z, dfield), family))
    return [jac_pairing(u, z, dfield) for z in family]


def trace_degree(trace):
    """Degree of a complete sphere trace and its distance from an integer."""
    if not trace.complete:
        raise errors.SphereLeavesDomain("Degree needs the whole sphere inside the domain",
            center=[float(c) for c in trace.center], radius=trace.radius)
    values = trace.values
    if trace.dimension == 3:
        faces = trace.elements
        total = solid_angles(values[faces[:, 0]], values[faces[:, 1]],
            values[faces[:, 2]]).sum()
        raw = total / (4.0 * math.pi)
    else:
        angles = np.arctan2(values[:, 1], values[:, 0])
        edges = trace.elements
        raw = wrap_angle(angles[edges[:, 1]] - angles[edges[:, 0]]).sum() / (2.0 * math.pi)
    degree = int(round(raw))
    residual = abs(raw - degree)
    if residual > DEGREE_RESIDUAL:
        raise errors.NonIntegerDegree("Trace degree is not close to an integer",
            center=[float(c) for c in trace.center], radius=trace.radius,
            value=float(raw))
    return degree, float(residual)


def sphere_degree(u, center, radius, level=None):
    center = np.asarray(center, dtype=float)
    if u.domain.boundary_distance(center) < radius - 1e-12:
        raise errors.SphereLeavesDomain("Sphere leaves the domain",
            center=list(center), radius=radius)
    trace = restrict_to_sphere(u, center, radius, level=level)
    return trace_degree(trace)


@dataclass(frozen=True)
class Charge:
    location: tuple
    degree: int

    def to_json(self):
        return {"x": [float(c) for c in self.location], "d": int(self.degree)}


@dataclass(frozen=True, eq=False)
class ChargeSet:
    domain: object
    charges: tuple = ()
    cell_scale: float = 0.0

    @classmethod
    def from_points(cls, domain, points, cell_scale=0.0):
        charges = tuple(Charge(tuple(float(c) for c in x), int(d))
                        for (x, d) in points if int(d) != 0)
        return cls(domain, charges, cell_scale)

    @classmethod
    def from_json(cls, domain, data):
        if isinstance(data, dict):
            data = data.get("charges", [])
        return cls.from_points(domain, [(item["x"], item["d"]) for item in data])

    def __len__(self):
        return len(self.charges)

    def __iter__(self):
        return iter(self.charges)

    @property
    def total_degree(self):
        return sum(c.degree for c in self.charges)

    def expanded(self):
        positives = []
        negatives = []
        for charge in self.charges:
            target = positives if charge.degree > 0 else negatives
            target.extend([np.asarray(charge.location)] * abs(charge.degree))
        return positives, negatives

    def expanded_count(self):
        return sum(abs(c.degree) for c in self.charges)

    def within(self, center, radius):
        center = np.asarray(center, dtype=float)
        kept = tuple(c for c in self.charges
                     if np.linalg.norm(np.asarray(c.location) - center) < radius)
        return ChargeSet(self.domain, kept, self.cell_scale)

    def to_json(self):
        return [c.to_json() for c in self.charges]


def _cube_degrees_3d(values, m, counts):
    total = np.zeros(counts)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        u = np.moveaxis(values, (a, b, c), (0, 1, 2))
        u = u[:counts[a] * m + 1:m, :counts[b] * m + 1, :counts[c] * m + 1]
        v00 = u[:, :-1, :-1]
        v10 = u[:, 1:, :-1]
        v11 = u[:, 1:, 1:]
        v01 = u[:, :-1, 1:]
        flux = solid_angles(v00, v10, v11) + solid_angles(v00, v11, v01)
        patches = flux.reshape(counts[a] + 1, counts[b], m, counts[c], m).sum(axis=(2, 4))
        net = patches[1:] - patches[:-1]
        total += np.moveaxis(net, (0, 1, 2), (a, b, c))
    return total / (4.0 * math.pi)


def _cube_degrees_2d(values, m, counts):
    kx, ky = counts
    theta = np.arctan2(values[..., 1], values[..., 0])[:kx * m + 1, :ky * m + 1]
    along_x = wrap_angle(theta[1:, :] - theta[:-1, :])
    along_y = wrap_angle(theta[:, 1:] - theta[:, :-1])
    sx = along_x[:, ::m].reshape(kx, m, ky + 1).sum(axis=1)
    sy = along_y[::m, :].reshape(kx + 1, ky, m).sum(axis=2)
    total = sx[:, :-1] - sx[:, 1:] + sy[1:, :] - sy[:-1, :]
    return total / (2.0 * math.pi)


def _cell_degrees(values, m, counts):
    """Degrees of the single lattice cells covered by the detection cubes.

    The cube degree is the sum of the degrees of its cells.
    """
    cells = tuple(k * m for k in counts)
    if len(counts) == 3:
        return np.round(_cube_degrees_3d(values, 1, cells)).astype(int)
    return np.round(_cube_degrees_2d(values, 1, cells)).astype(int)


def detect_charges(u, cell_scale=None):
    """Locate point singularities from the boundary degrees of lattice cubes.

    Cubes have side m cells (cell_scale / h rounded, at least 4) and are
    aligned with the lattice. Only cubes made of active cells are used.
    Adjacent cubes of the same sign are merged into one charge, placed at the
    centroid of the same-sign single cells inside them.
    """
    lattice = u.lattice
    n = lattice.dimension
    h = lattice.spacing
    if cell_scale is None:
        cell_scale = MIN_CUBE_CELLS * h
    if cell_scale < MIN_CUBE_CELLS * h * (1.0 - 1e-9):
        raise errors.CellScaleTooSmall("Charge cubes must span at least four cells",
            cell_scale=cell_scale, spacing=h)
    m = max(MIN_CUBE_CELLS, int(round(cell_scale / h)))
    counts = tuple((s - 1) // m for s in lattice.shape)
    if n == 3:
        raw = _cube_degrees_3d(u.values, m, counts)
    else:
        raw = _cube_degrees_2d(u.values, m, counts)
    cells = lattice.cell_active[tuple(slice(0, k * m) for k in counts)]
    shape = []
    for k in counts:
        shape.extend([k, m])
    active = cells.reshape(shape).all(axis=tuple(range(1, 2 * n, 2)))
    rounded = np.round(raw)
    residual = np.where(active, np.abs(raw - rounded), 0.0)
    if np.any(residual > DEGREE_RESIDUAL):
        index = tuple(int(i) for i in np.argwhere(residual > DEGREE_RESIDUAL)[0])
        center = np.asarray(lattice.origin) + (np.asarray(index) + 0.5) * m * h
        raise errors.NonIntegerDegree("Cube boundary degree is not close to an integer",
            cube=index, center=[float(c) for c in center], value=float(raw[index]))
    degrees = np.where(active, rounded, 0).astype(int)
    origin = np.asarray(lattice.origin)
    structure = np.ones((3,) * n)
    fine = None
    charges = []
    # one charge per same-sign group; opposite signs never merge
    for sign in (1, -1):
        labels, count = ndimage.label(sign * degrees > 0, structure=structure)
        for component in range(1, count + 1):
            group = labels == component
            total = int(degrees[group].sum())
            if fine is None:
                fine = _cell_degrees(u.values, m, counts)
            mask = group
            for axis in range(n):
                mask = np.repeat(mask, m, axis=axis)
            weights = np.where(mask, np.maximum(sign * fine, 0), 0)
            index = np.argwhere(weights > 0)
            if len(index) == 0:
                index = np.argwhere(group)
                weights = np.abs(degrees)
                centers = origin + (index + 0.5) * m * h
            else:
                centers = origin + (index + 0.5) * h
            w = weights[tuple(index.T)].astype(float)
            location = (centers * w[:, None]).sum(axis=0) / w.sum()
            charges.append((location, total))
    logger.debug("Detected %d charges with cube side %d cells", len(charges), m)
    return ChargeSet.from_points(lattice.domain, charges, m * h)
