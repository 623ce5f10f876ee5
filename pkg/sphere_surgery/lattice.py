import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from sphere_surgery import errors

logger = logging.getLogger(__name__)

BOX = 'box'
BALL = 'ball'
SHAPES = (BOX, BALL)

# positions closer than this (in units of h) are treated as coincident
NODE_TOLERANCE = 1e-9


def unit_ball_volume(n):
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class DomainSpec:
    """The reference domain: the unit box [0,1]^N or the unit ball B^N."""

    dimension: int
    shape: str = BOX

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise errors.UnknownDomain("Only dimensions 2 and 3 are supported",
                dimension=self.dimension)
        if self.shape not in SHAPES:
            raise errors.UnknownDomain("Unknown domain shape",
                shape=self.shape, known=", ".join(SHAPES))

    @property
    def volume(self):
        if self.shape == BOX:
            return 1.0
        return unit_ball_volume(self.dimension)

    @property
    def inradius(self):
        return 0.5 if self.shape == BOX else 1.0

    @property
    def diameter(self):
        if self.shape == BOX:
            return math.sqrt(self.dimension)
        return 2.0

    @property
    def center(self):
        if self.shape == BOX:
            return np.full(self.dimension, 0.5)
        return np.zeros(self.dimension)

    def boundary_distance(self, points):
        x = np.asarray(points, dtype=float)
        if self.shape == BOX:
            d = np.minimum(x, 1.0 - x).min(axis=-1)
        else:
            d = 1.0 - np.linalg.norm(x, axis=-1)
        return np.maximum(d, 0.0)

    def contains(self, points, tol=1e-12):
        x = np.asarray(points, dtype=float)
        if self.shape == BOX:
            return np.all((x >= -tol) & (x <= 1.0 + tol), axis=-1)
        return np.linalg.norm(x, axis=-1) <= 1.0 + tol

    def clamp(self, points):
        x = np.asarray(points, dtype=float)
        if self.shape == BOX:
            return np.clip(x, 0.0, 1.0)
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
        return np.where(norm > 1.0, x / np.maximum(norm, 1e-300), x)

    def project_to_boundary(self, points):
        x = np.array(points, dtype=float)
        flat = x.reshape(-1, self.dimension)
        if self.shape == BOX:
            gaps = np.concatenate([flat, 1.0 - flat], axis=1)
            nearest = np.argmin(gaps, axis=1)
            rows = np.arange(flat.shape[0])
            axis = nearest % self.dimension
            flat[rows, axis] = np.where(nearest < self.dimension, 0.0, 1.0)
        else:
            norm = np.linalg.norm(flat, axis=1)
            zero = norm == 0.0
            flat[zero, 0] = 1.0
            norm[zero] = 1.0
            flat /= norm[:, None]
        return flat.reshape(x.shape)

    def touching_faces(self, point, tol):
        """Faces of the box within tol of point, as (axis, inward normal sign)."""
        if self.shape != BOX:
            return []
        faces = []
        for axis, value in enumerate(np.asarray(point, dtype=float)):
            if value <= tol:
                faces.append((axis, 1.0))
            elif value >= 1.0 - tol:
                faces.append((axis, -1.0))
        return faces

    def lattice(self, resolution):
        return Lattice.build(self, resolution)

    def to_dict(self):
        return {"dimension": self.dimension, "shape": self.shape}


def corner_offsets(n):
    return list(itertools.product((0, 1), repeat=n))


def corner_slices(offset, cells):
    return tuple(slice(o, o + c) for o, c in zip(offset, cells))


def cell_average(values, n):
    """Average node values over the 2^n corners of every cell."""
    cells = tuple(s - 1 for s in values.shape[:n])
    total = np.zeros(cells + values.shape[n:])
    for offset in corner_offsets(n):
        total += values[corner_slices(offset, cells)]
    return total / 2 ** n


def cell_gradient(values, h, n):
    """Forward-difference gradient on cells, grad[..., j, a] = d_j u_a.

    Each partial derivative is the mean of the 2^(n-1) cell edges parallel to
    x_j, which is the gradient of the multilinear interpolant at the cell
    centre.
    """
    cells = tuple(s - 1 for s in values.shape[:n])
    grad = np.zeros(cells + (n,) + values.shape[n:])
    for offset in corner_offsets(n):
        corner = values[corner_slices(offset, cells)]
        for j in range(n):
            if offset[j]:
                grad[..., j, :] += corner
            else:
                grad[..., j, :] -= corner
    grad /= 2 ** (n - 1) * h
    return grad


@dataclass(frozen=True, eq=False)
class Lattice:
    """Uniform node lattice over the closed domain.

    Box lattices have nodes at i*h with h = 1/res. Ball lattices are offset
    by half a cell so that the origin is a cell centre: nodes sit at
    -1 - h/2 + i*h for i = 0..res+1 with h = 2/res. A cell is active when its
    centre lies in the closed domain, and a node is active when it is a corner
    of an active cell.
    """

    domain: DomainSpec
    resolution: int
    origin: tuple
    spacing: float
    shape: tuple

    @classmethod
    def build(cls, domain, resolution):
        resolution = int(resolution)
        if resolution < 2:
            raise errors.InvalidResolution("Lattice resolution too small",
                resolution=resolution)
        n = domain.dimension
        if domain.shape == BOX:
            h = 1.0 / resolution
            origin = (0.0,) * n
            count = resolution + 1
        else:
            h = 2.0 / resolution
            origin = (-1.0 - h / 2.0,) * n
            count = resolution + 2
        return cls(domain, resolution, origin, h, (count,) * n)

    @property
    def dimension(self):
        return self.domain.dimension

    @property
    def cell_shape(self):
        return tuple(s - 1 for s in self.shape)

    @property
    def cell_volume(self):
        return self.spacing ** self.dimension

    def same_as(self, other):
        return (self.domain == other.domain and
                self.resolution == other.resolution)

    @cached_property
    def axes(self):
        return [o + self.spacing * np.arange(s)
                for (o, s) in zip(self.origin, self.shape)]

    @cached_property
    def nodes(self):
        grids = np.meshgrid(*self.axes, indexing='ij')
        return np.stack(grids, axis=-1)

    @cached_property
    def cell_centers(self):
        axes = [a[:-1] + self.spacing / 2.0 for a in self.axes]
        grids = np.meshgrid(*axes, indexing='ij')
        return np.stack(grids, axis=-1)

    @cached_property
    def cell_active(self):
        if self.domain.shape == BOX:
            return np.ones(self.cell_shape, dtype=bool)
        return np.linalg.norm(self.cell_centers, axis=-1) <= 1.0 + 1e-12

    @cached_property
    def node_active(self):
        n = self.dimension
        active = np.zeros(self.shape, dtype=bool)
        for offset in corner_offsets(n):
            active[corner_slices(offset, self.cell_shape)] |= self.cell_active
        return active

    @cached_property
    def active_volume(self):
        return float(self.cell_active.sum()) * self.cell_volume

    def nearest_cell_center(self, point):
        x = np.asarray(point, dtype=float)
        o = np.asarray(self.origin)
        h = self.spacing
        index = np.floor((x - o) / h)
        index = np.clip(index, 0, np.asarray(self.cell_shape) - 1)
        return o + (index + 0.5) * h

    def is_node(self, point):
        x = np.asarray(point, dtype=float)
        q = (x - np.asarray(self.origin)) / self.spacing
        return bool(np.all(np.abs(q - np.round(q)) <= NODE_TOLERANCE))

    def to_dict(self):
        return {
            "domain": self.domain.to_dict(),
            "resolution": self.resolution,
            "spacing": self.spacing,
            "shape": list(self.shape),
        }
