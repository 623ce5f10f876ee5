"""Length of the minimal connection between positive and negative charges.

The boundary of the domain may absorb any charge at the cost of its
distance to the boundary.
"""

import logging
from dataclasses import dataclass
from dataclasses import field
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from sphere_surgery import errors
from sphere_surgery.field import lp_norm
from sphere_surgery.jacobian import d_field
from sphere_surgery.jacobian import detect_charges
from sphere_surgery.jacobian import pairings
from sphere_surgery.lattice import unit_ball_volume
from sphere_surgery.testfunction import Cone
from sphere_surgery.testfunction import DistanceRamp
from sphere_surgery.testfunction import Tent

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 8

LIPSCHITZ_SLACK = 1e-9


def _point(x):
    return [float(c) for c in x]


@dataclass(frozen=True)
class MatchedPair:
    positive: tuple
    negative: tuple
    positive_on_boundary: bool = False
    negative_on_boundary: bool = False

    @property
    def length(self):
        return float(np.linalg.norm(np.subtract(self.positive, self.negative)))

    @property
    def interior(self):
        return not (self.positive_on_boundary or self.negative_on_boundary)

    def to_json(self):
        return {
            "positive": _point(self.positive),
            "negative": _point(self.negative),
            "positive_on_boundary": self.positive_on_boundary,
            "negative_on_boundary": self.negative_on_boundary,
            "length": self.length,
        }


@dataclass(frozen=True)
class MatchingSolution:
    length: float = 0.0
    pairs: tuple = ()

    @property
    def segments(self):
        return [(np.asarray(pair.positive), np.asarray(pair.negative))
                for pair in self.pairs]

    def to_json(self):
        return {
            "length": self.length,
            "pairs": [pair.to_json() for pair in self.pairs],
        }


@dataclass(frozen=True)
class Connection:
    length: float
    charges: object
    matching: MatchingSolution = field(default_factory=MatchingSolution)

    def to_json(self):
        return {
            "length": self.length,
            "cell_scale": self.charges.cell_scale,
            "charges": self.charges.to_json(),
            "matching": self.matching.to_json(),
        }


def _cost_matrix(domain, positives, negatives):
    kp = len(positives)
    km = len(negatives)
    size = kp + km
    cost = np.zeros((size, size))
    dp = domain.boundary_distance(np.reshape(positives, (kp, -1))) if kp else np.zeros(0)
    dm = domain.boundary_distance(np.reshape(negatives, (km, -1))) if km else np.zeros(0)
    if kp and km:
        cost[:kp, :km] = cdist(np.asarray(positives), np.asarray(negatives))
    cost[:kp, km:] = dp[:, None]
    cost[kp:, :km] = dm[None, :]
    return cost


def minimal_connection(charges, domain=None):
    """Exact minimal connection as a square assignment problem.

    Rows are the expanded positive charges followed by one boundary dummy
    per negative charge; columns are the negatives followed by one boundary
    dummy per positive charge. Dummy to dummy costs nothing.
    """
    domain = domain or charges.domain
    positives, negatives = charges.expanded()
    kp = len(positives)
    km = len(negatives)
    if kp + km == 0:
        return MatchingSolution()
    cost = _cost_matrix(domain, positives, negatives)
    rows, cols = linear_sum_assignment(cost)
    pairs = []
    total = 0.0
    for i, j in zip(rows, cols):
        if i >= kp and j >= km:
            continue
        total += cost[i, j]
        if i < kp and j < km:
            pairs.append(MatchedPair(tuple(positives[i]), tuple(negatives[j])))
        elif i < kp:
            sink = domain.project_to_boundary(positives[i])
            pairs.append(MatchedPair(tuple(positives[i]), tuple(sink),
                negative_on_boundary=True))
        else:
            source = domain.project_to_boundary(negatives[j])
            pairs.append(MatchedPair(tuple(source), tuple(negatives[j]),
                positive_on_boundary=True))
    logger.debug("Matched %d positive and %d negative charges, L = %g", kp, km, total)
    return MatchingSolution(float(total), tuple(pairs))


def brute_force_connection(charges, domain=None):
    """Exhaustive minimum over every pairing with the boundary option."""
    domain = domain or charges.domain
    count = charges.expanded_count()
    if count > BRUTE_FORCE_LIMIT:
        raise errors.TooManyCharges("Too many charges for exhaustive matching",
            charges=count, limit=BRUTE_FORCE_LIMIT)
    positives, negatives = charges.expanded()
    kp = len(positives)
    km = len(negatives)
    if kp + km == 0:
        return 0.0
    cost = _cost_matrix(domain, positives, negatives)

    @lru_cache(maxsize=None)
    def best(i, free):
        if i == kp:
            return sum(cost[kp, j] for j in range(km) if free & (1 << j))
        value = cost[i, km] + best(i + 1, free)
        for j in range(km):
            if free & (1 << j):
                value = min(value, cost[i, j] + best(i + 1, free & ~(1 << j)))
        return value

    return float(best(0, (1 << km) - 1))


def dual_family(domain, spacing, charges=None, matching=None):
    """The default family of 1-Lipschitz test functions.

    Distance ramps of both signs, cones of both signs at every charge, tents
    along every interior matched pair and a 3^N grid of cones, all vanishing
    a margin of 2h away from the boundary.
    """
    margin = 2.0 * spacing
    eta = 2.0 * spacing
    family = [
        DistanceRamp(domain, margin, 1.0, eta, ident='distance+'),
        DistanceRamp(domain, margin, -1.0, eta, ident='distance-'),
    ]
    if charges is not None:
        for k, charge in enumerate(charges):
            x = np.asarray(charge.location)
            radius = float(domain.boundary_distance(x)) - margin - eta
            if radius <= 2.0 * spacing:
                continue
            for sign, tag in ((1.0, '+'), (-1.0, '-')):
                family.append(Cone(x, radius, sign, eta, ident='cone%s[%d]' % (tag, k)))
    if matching is not None:
        for k, pair in enumerate(matching.pairs):
            if not pair.interior or pair.length == 0.0:
                continue
            middle = (np.asarray(pair.positive) + np.asarray(pair.negative)) / 2.0
            radius = float(domain.boundary_distance(middle)) - margin
            if radius <= pair.length / 2.0:
                continue
            for sign, tag in ((1.0, '+'), (-1.0, '-')):
                family.append(Tent(pair.positive, pair.negative, radius, sign,
                    ident='tent%s[%d]' % (tag, k)))
    reach = 0.5 * domain.inradius
    radius = 0.3 * domain.inradius
    n = domain.dimension
    grid = np.stack(np.meshgrid(*([[-reach, 0.0, reach]] * n), indexing='ij'), axis=-1)
    for k, offset in enumerate(grid.reshape(-1, n)):
        x = domain.center + offset
        cone = Cone(x, radius, 1.0, eta, ident='grid[%d]' % k)
        if float(domain.boundary_distance(x)) - cone.support_radius > margin:
            family.append(cone)
            family.append(Cone(x, radius, -1.0, eta, ident='grid-[%d]' % k))
    return family


def dual_lower_bound(u, family, workers=1):
    """sup over the family of <Jac u, zeta> / omega_N, never below zero."""
    for zeta in family:
        if zeta.lipschitz > 1.0 + LIPSCHITZ_SLACK:
            raise errors.FamilyViolatesLipschitz("Test function is not 1-Lipschitz",
                zeta=zeta.ident, lipschitz=zeta.lipschitz)
    if not family:
        return 0.0
    values = pairings(u, family, workers=workers)
    return max(0.0, max(values)) / unit_ball_volume(u.dimension)


def l_of_map(u, cell_scale=None):
    charges = detect_charges(u, cell_scale)
    matching = minimal_connection(charges, u.domain)
    return Connection(matching.length, charges, matching)


@dataclass(frozen=True)
class ContinuityRecord:
    l_u: float
    l_v: float
    lhs: float
    rhs: float
    sharper: float
    tolerance: float
    holds: bool

    def to_json(self):
        return dict(self.__dict__)


def l_continuity(u, v, cell_scale=None):
    """Compare |L(u) - L(v)| with the L^1 distance of the D-fields."""
    if cell_scale is None:
        cell_scale = 4.0 * u.spacing
    lu = l_of_map(u, cell_scale)
    lv = l_of_map(v, cell_scale)
    lhs = abs(lu.length - lv.length)
    rhs = lp_norm(d_field(u) - d_field(v), 1.0)
    n = u.dimension
    sharper = rhs / (n * unit_ball_volume(n))
    tolerance = 2.0 * lu.charges.cell_scale
    return ContinuityRecord(lu.length, lv.length, lhs, rhs, sharper, tolerance,
        bool(lhs <= rhs + tolerance))
