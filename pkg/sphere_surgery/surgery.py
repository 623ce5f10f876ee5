"""Local replacements of a map inside one ball.

Every surgery picks a slicing sphere by a Fubini scan, rebuilds the map
inside it and leaves the nodes outside the stated outer ball untouched.
Bad balls get a radial extension plugged by a contraction of the sphere
trace, good balls get the retraction Phi followed by mollify-and-project,
and boundary balls do either on the box faces.
"""

import logging
from dataclasses import dataclass
from dataclasses import field
from functools import lru_cache

import numpy as np

from sphere_surgery import errors
from sphere_surgery.connection import l_of_map
from sphere_surgery.field import GridMap
from sphere_surgery.field import NodeField
from sphere_surgery.field import ball_region
from sphere_surgery.field import cells_touching
from sphere_surgery.field import check_exponent
from sphere_surgery.field import gradient
from sphere_surgery.field import lp_norm
from sphere_surgery.field import mollify
from sphere_surgery.field import normalize_rows
from sphere_surgery.field import project_to_sphere
from sphere_surgery.field import restrict_to_sphere
from sphere_surgery.homotopy import RetractionPhi
from sphere_surgery.homotopy import contract_cone
from sphere_surgery.homotopy import contract_degree_zero
from sphere_surgery.jacobian import trace_degree
from sphere_surgery.lattice import BALL
from sphere_surgery.lattice import DomainSpec
from sphere_surgery.lattice import unit_ball_volume
from sphere_surgery.testfunction import Plateau

logger = logging.getLogger(__name__)

# candidate radii scanned by the slice selection
CANDIDATES = 64

SCAN_LEVEL = 3

# largest geodesic radius of a good-ball trace around its mean
SPREAD_LIMIT = 1.0 / 3.0

GOOD = 'good'
BAD = 'bad'
BOUNDARY = 'boundary'


def safe_ratio(num, den):
    if num == 0.0:
        return 0.0
    if den <= 0.0:
        return None
    return float(num / den)


def _point(x):
    return [float(c) for c in x]


def ball_energy(grad, center, radius, p):
    """int_{B_radius} |grad v|^p over the active cells."""
    region = ball_region(grad.lattice, center, radius)
    return lp_norm(grad, p, region) ** p if region.any() else 0.0


@dataclass(frozen=True, eq=False)
class SliceSelection:
    center: np.ndarray
    r: float
    radius: float
    surface_energy: float
    bulk_energy: float
    fubini_average: float
    c_slice: float
    candidates: int
    admissible: int
    degree: object
    cutoff: Plateau
    avoids_segments: bool
    trace: object = None

    @property
    def fubini_holds(self):
        return self.surface_energy ** self.trace.p <= 4.0 * self.fubini_average + 1e-12

    def to_dict(self):
        return {
            "radius": self.radius,
            "surface_energy": self.surface_energy,
            "bulk_energy": self.bulk_energy,
            "fubini_average": self.fubini_average,
            "fubini_holds": bool(self.fubini_holds),
            "c_slice": self.c_slice,
            "candidates": self.candidates,
            "admissible": self.admissible,
            "degree": self.degree,
            "cutoff": [self.cutoff.inner, self.cutoff.outer],
            "avoids_segments": self.avoids_segments,
        }


def _segment_reach(center, segments):
    reach = []
    for a, b in segments:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = b - a
        length = float(d @ d)
        t = 0.0 if length == 0.0 else float(np.clip((center - a) @ d / length, 0.0, 1.0))
        near = float(np.linalg.norm(a + t * d - center))
        far = max(float(np.linalg.norm(a - center)), float(np.linalg.norm(b - center)))
        reach.append((near, far))
    return reach


def _select(v, center, r, lo, hi, matching, p, bulk):
    h = v.spacing
    radii = lo + (np.arange(CANDIDATES) + 0.5) * (hi - lo) / CANDIDATES
    reach = _segment_reach(center, matching.segments if matching else [])
    admissible = [s for s in radii
                  if all(s < near - h or s > far + h for (near, far) in reach)]
    if not admissible:
        raise errors.NoAdmissibleRadius("Every slicing radius meets the connection",
            center=_point(center), r=r, segments=len(reach))
    level = SCAN_LEVEL if v.dimension == 3 else None
    energies = []
    for s in radii:
        trace = restrict_to_sphere(v, center, s, p=p, level=level)
        energies.append(trace.energy)
    energies = np.asarray(energies)
    allowed = np.isin(radii, admissible)
    best = int(np.argmin(np.where(allowed, energies, np.inf)))
    s = float(radii[best])
    fubini = float(np.mean(energies ** p))
    trace = restrict_to_sphere(v, center, s, p=p)
    logger.debug("Slice radius %.4f chosen from %d admissible candidates",
        s, len(admissible))
    degree = None
    if trace.complete:
        try:
            degree, _ = trace_degree(trace)
        except errors.NonIntegerDegree:
            logger.warning("Slice at radius %.4f has no integer degree", s)
    cutoff = Plateau(center, s, s + min(r / 8.0, 0.9 * (hi - s)))
    return SliceSelection(center, float(r), s, trace.energy, bulk, fubini,
        safe_ratio(trace.energy * r ** (1.0 / p), bulk) or 0.0, CANDIDATES,
        len(admissible), degree, cutoff, True, trace)


def _connection_length(matching):
    return matching.length if matching is not None else 0.0


def select_radius(v, center, r, matching=None, p=2.0, grad=None):
    """Fubini-type choice of a slicing radius s in (3r/2, 2r)."""
    check_exponent(p)
    center = np.asarray(center, dtype=float)
    length = _connection_length(matching)
    if r <= 4.0 * length:
        raise errors.RadiusBelowConnection("Ball radius must exceed 4 L",
            r=r, connection=length)
    if float(v.domain.boundary_distance(center)) < 2.0 * r - 1e-12:
        raise errors.BallLeavesDomain("The doubled ball leaves the domain",
            center=_point(center), r=r)
    if grad is None:
        grad = gradient(v)
    bulk = ball_energy(grad, center, 2.0 * r, p) ** (1.0 / p)
    return _select(v, center, r, 1.5 * r, 2.0 * r, matching, p, bulk)


@dataclass(eq=False)
class SurgeryReport:
    ball: int
    kind: str
    center: list
    r: float
    outer_radius: float
    slice: SliceSelection = None
    epsilon: float = None
    epsilon_condition_met: bool = None
    homotopy: dict = None
    a_mask: np.ndarray = None
    a_measure: float = 0.0
    delta_lp: float = 0.0
    delta_grad: float = 0.0
    bulk_energy: float = 0.0
    energy_ratio: float = 0.0
    l_before: float = None
    l_after: float = None
    constants: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "ball": self.ball,
            "kind": self.kind,
            "center": _point(self.center),
            "r": self.r,
            "outer_radius": self.outer_radius,
            "slice": self.slice.to_dict() if self.slice is not None else None,
            "epsilon": self.epsilon,
            "epsilon_condition_met": self.epsilon_condition_met,
            "homotopy": self.homotopy,
            "a_cells": int(self.a_mask.sum()) if self.a_mask is not None else 0,
            "a_measure": self.a_measure,
            "delta_lp": self.delta_lp,
            "delta_grad": self.delta_grad,
            "bulk_energy": self.bulk_energy,
            "energy_ratio": self.energy_ratio,
            "l_before": self.l_before,
            "l_after": self.l_after,
            "constants": self.constants,
            "checks": self.checks,
            "notes": self.notes,
        }


def _node_geometry(lattice, center):
    rel = lattice.nodes - center
    return rel, np.linalg.norm(rel, axis=-1)


def _radial_fill(v, center, s, trace, homotopy, p, target):
    """Radial extension of the trace inside B_s, plugged by the homotopy.

    The plug radius eps starts at s/2 and is halved, never below 2h, until
    the plug changes the gradient of the extension by at most target.
    """
    lattice = v.lattice
    h = lattice.spacing
    rel, rho = _node_geometry(lattice, center)
    inside = (rho < s) & lattice.node_active
    radius = rho[inside]
    fallback = np.zeros(v.dimension)
    fallback[-1] = 1.0
    omega = normalize_rows(rel[inside], fallback)
    outer = trace.sample(center + s * omega)
    values = np.array(v.values, copy=True)
    values[inside] = outer
    extension = GridMap(lattice, values)
    grad_ext = gradient(extension)
    eps = s / 2.0
    while True:
        plug = radius < eps
        filled = np.array(outer, copy=True)
        filled[plug] = homotopy.evaluate(radius[plug] / eps, omega[plug], outer[plug])
        values[inside] = filled
        w = GridMap(lattice, values)
        cost = lp_norm(gradient(w) - grad_ext, p)
        if cost <= target:
            logger.debug("Plug radius %.4f accepted, cost %.4g <= %.4g", eps, cost, target)
            return w, eps, True
        if eps / 2.0 < 2.0 * h:
            logger.warning("Plug cost %.4g still above %.4g at radius %.4f",
                cost, target, eps)
            return w, eps, False
        eps /= 2.0


def _measure_l(report, v, w, cell_scale):
    if cell_scale is None:
        cell_scale = 4.0 * v.spacing
    before = l_of_map(v, cell_scale)
    after = l_of_map(w, cell_scale)
    report.l_before = before.length
    report.l_after = after.length
    report.checks["l_monotone"] = bool(after.length <= before.length + 2.0 * cell_scale)


def _finish(report, v, w, p, outer):
    report.delta_lp = lp_norm(w - v, p)
    report.delta_grad = lp_norm(gradient(w) - gradient(v), p)
    _, rho = _node_geometry(v.lattice, report.center)
    report.checks["locality"] = bool(np.array_equal(w.values[rho >= outer],
        v.values[rho >= outer]))


def _bad_core(v, center, sel, homotopy, p, target, report):
    w, eps, met = _radial_fill(v, center, sel.radius, sel.trace, homotopy, p, target)
    report.epsilon = eps
    report.epsilon_condition_met = met
    report.homotopy = homotopy.to_dict()
    if not met:
        report.notes.append("plug cost above the bulk energy at the smallest radius")
    return w


def replace_bad_ball(v, center, r, matching=None, p=2.0, lam=0.0, ball=0,
                     check=True, measure_l=False, cell_scale=None, max_iters=6):
    """Remove the charges inside a ball of large energy.

    The degree-zero trace on the chosen sphere is extended radially and
    contracted to a constant in a small plug around the centre.
    """
    center = np.asarray(center, dtype=float)
    n = v.dimension
    grad = gradient(v)
    sel = select_radius(v, center, r, matching, p, grad)
    energy = sel.bulk_energy ** p
    threshold = lam * r ** (n - p)
    if check and energy < threshold:
        raise errors.NotABadBall("Ball energy below the bad-ball threshold",
            energy=energy, threshold=threshold, center=_point(center), r=r)
    report = SurgeryReport(ball, BAD, center, float(r), 2.0 * r, sel,
        bulk_energy=sel.bulk_energy, energy_ratio=energy / r ** (n - p))
    if not check:
        report.notes.append("bad construction without the energy test")
    homotopy = contract_degree_zero(sel.trace, max_iters)
    w = _bad_core(v, center, sel, homotopy, p, sel.bulk_energy, report)
    region = ball_region(v.lattice, center, 2.0 * r)
    report.a_mask = region
    report.a_measure = float(region.sum()) * v.lattice.cell_volume
    _finish(report, v, w, p, 2.0 * r)
    bulk = sel.bulk_energy
    c_a = safe_ratio(report.a_measure ** (1.0 / p), r * bulk)
    report.constants.update({
        "C_lp": safe_ratio(report.delta_lp, r * bulk),
        "C_grad": safe_ratio(report.delta_grad, bulk),
        "C_A": c_a,
    })
    if lam > 0.0:
        bound = (2 ** n * unit_ball_volume(n) / lam) ** (1.0 / p)
        report.constants["volume_bound"] = bound
        report.checks["volume"] = bool(c_a is not None and c_a <= bound * (1.0 + 1e-9))
    if measure_l:
        _measure_l(report, v, w, cell_scale)
    logger.info("Bad ball %d at %s: s = %.4f, eps = %.4f", ball, _point(center),
        sel.radius, report.epsilon)
    return w, report


def _good_core(v, center, sel, inner, p, energy, report):
    """Retract into a small disk inside B_s, then mollify and project near B_inner."""
    lattice = v.lattice
    h = lattice.spacing
    s = sel.radius
    trace = sel.trace
    xi0 = trace.mean_direction()
    spread = trace.spread(xi0)
    report.constants["spread"] = spread
    report.constants["xi0"] = _point(xi0)
    if spread > SPREAD_LIMIT:
        raise errors.TraceNotInSmallDisk("Trace image is not in a small geodesic disk",
            spread=spread, limit=SPREAD_LIMIT, center=_point(center), radius=s)
    phi = RetractionPhi(xi0)
    _, rho = _node_geometry(lattice, center)
    inside = (rho < s) & lattice.node_active
    values = np.array(v.values, copy=True)
    values[inside] = phi(values[inside])
    retracted = GridMap(lattice, values)

    far = inside & (phi.distance(v.values) > phi.inner)
    a_mask = cells_touching(lattice, far) & ball_region(lattice, center, s)
    c_p = (2.0 * s) ** p
    a_measure = float(a_mask.sum()) * lattice.cell_volume
    report.constants["C_P"] = c_p
    report.checks["chebyshev_poincare"] = bool(
        a_measure <= 3.0 ** p * c_p * energy * (1.0 + 1e-9))
    grad = gradient(v)
    if not a_mask.any():
        density = grad.magnitude()
        density = np.where(ball_region(lattice, center, s), density, -1.0)
        a_mask = np.zeros(lattice.cell_shape, dtype=bool)
        a_mask[np.unravel_index(int(np.argmax(density)), density.shape)] = True
        report.notes.append("A empty, single cell of largest energy used")
    report.a_mask = a_mask
    report.a_measure = float(a_mask.sum()) * lattice.cell_volume
    grad_a = lp_norm(grad, p, a_mask)

    zeta = Plateau(center, inner, (inner + s) / 2.0)
    zone = (rho < zeta.outer) & lattice.node_active
    weight = zeta.value(lattice.nodes[zone])[:, None]
    grad_ret = gradient(retracted)
    eps = sel.r / 4.0
    if eps < 2.0 * h:
        eps = 2.0 * h
    result = None
    failure = None
    while True:
        try:
            smooth = mollify(NodeField(lattice, values), eps, zone)
            blended = np.array(values, copy=True)
            blended[zone] = (1.0 - weight) * values[zone] + weight * smooth.values[zone]
            candidate = project_to_sphere(NodeField(lattice, blended), region=zone)
        except errors.NearZeroVector as exc:
            failure = exc
            candidate = None
        if candidate is not None:
            cost = lp_norm(gradient(candidate) - grad_ret, p)
            result = (candidate, eps, cost ** p <= grad_a ** p * (1.0 + 1e-9))
            if result[2]:
                break
        if eps / 2.0 < 2.0 * h:
            break
        eps /= 2.0
    if result is None:
        raise failure
    w, eps, met = result
    report.epsilon = eps
    report.epsilon_condition_met = met
    if not met:
        report.notes.append("mollification cost above the energy of A at the smallest epsilon")
    report.constants["grad_A"] = grad_a
    return w, grad_a


def replace_good_ball(v, center, r, matching=None, p=2.0, lam=0.0, ball=0,
                      check=True, measure_l=False, cell_scale=None):
    """Smooth a ball of small energy without changing its topology."""
    center = np.asarray(center, dtype=float)
    n = v.dimension
    grad = gradient(v)
    sel = select_radius(v, center, r, matching, p, grad)
    energy = sel.bulk_energy ** p
    threshold = lam * r ** (n - p)
    if check and energy >= threshold:
        raise errors.NotAGoodBall("Ball energy at or above the good-ball threshold",
            energy=energy, threshold=threshold, center=_point(center), r=r)
    report = SurgeryReport(ball, GOOD, center, float(r), 2.0 * r, sel,
        bulk_energy=sel.bulk_energy, energy_ratio=energy / r ** (n - p))
    if energy == 0.0:
        report.notes.append("map constant on the doubled ball")
        report.checks["locality"] = True
        return v, report
    w, grad_a = _good_core(v, center, sel, r, p, energy, report)
    _finish(report, v, w, p, 2.0 * r)
    report.constants.update({
        "C_lp": safe_ratio(report.delta_lp, r * grad_a),
        "C_grad": safe_ratio(report.delta_grad, grad_a),
    })
    if measure_l:
        _measure_l(report, v, w, cell_scale)
    logger.info("Good ball %d at %s: s = %.4f, eps = %.4f", ball, _point(center),
        sel.radius, report.epsilon)
    return w, report


def replace_boundary_ball(v, center, r, matching=None, p=2.0, lam=0.0, delta=None,
                          ball=0, measure_l=False, cell_scale=None, force=None):
    """Surgery on a ball centred on the flat faces of the box.

    Slices are taken in (3r, 4r) and the energy over B_4r decides between
    the bad construction, contracting the partial trace towards the inward
    pole, and the good one.
    """
    domain = v.domain
    h = v.spacing
    n = v.dimension
    check_exponent(p)
    if domain.shape == BALL:
        raise errors.CurvedBoundaryUnsupported("Boundary surgery needs flat faces",
            shape=domain.shape)
    center = np.array(center, dtype=float)
    if float(domain.boundary_distance(center)) > h / 2.0:
        raise errors.NotOnBoundary("Ball centre is not on the boundary",
            center=_point(center), distance=float(domain.boundary_distance(center)))
    for axis, sign in domain.touching_faces(center, h / 2.0):
        center[axis] = 0.0 if sign > 0 else 1.0
    length = _connection_length(matching)
    if r <= 4.0 * length:
        raise errors.RadiusBelowConnection("Ball radius must exceed 4 L",
            r=r, connection=length)
    if delta is not None and r >= delta:
        raise errors.RadiusTooLarge("Boundary ball radius must stay below delta",
            r=r, delta=delta)
    normals = np.zeros(n)
    for axis, sign in domain.touching_faces(center, 4.0 * r):
        normals[axis] += sign
    pole = normalize_rows(normals)
    grad = gradient(v)
    energy = ball_energy(grad, center, 4.0 * r, p)
    bulk = energy ** (1.0 / p)
    threshold = lam * (2.0 * r) ** (n - p)
    kind = force or (BAD if energy >= threshold else GOOD)
    sel = _select(v, center, r, 3.0 * r, 4.0 * r, matching, p, bulk)
    report = SurgeryReport(ball, BOUNDARY, center, float(r), 8.0 * r, sel,
        bulk_energy=bulk, energy_ratio=energy / (2.0 * r) ** (n - p))
    report.notes.append("%s construction" % kind)
    if force:
        report.notes.append("construction forced")
    if energy == 0.0:
        report.notes.append("map constant on B_4r")
        report.checks["locality"] = True
        return v, report
    wide = ball_energy(grad, center, 8.0 * r, p) ** (1.0 / p)
    if kind == BAD:
        homotopy = contract_cone(sel.trace, pole)
        w = _bad_core(v, center, sel, homotopy, p, bulk, report)
        region = ball_region(v.lattice, center, 4.0 * r)
        report.a_mask = region
        report.a_measure = float(region.sum()) * v.lattice.cell_volume
        _finish(report, v, w, p, 8.0 * r)
        report.constants.update({
            "C_lp": safe_ratio(report.delta_lp, r * wide),
            "C_grad": safe_ratio(report.delta_grad, wide),
            "C_A": safe_ratio(report.a_measure ** (1.0 / p), r * wide),
        })
    else:
        w, grad_a = _good_core(v, center, sel, 3.0 * r, p, energy, report)
        _finish(report, v, w, p, 8.0 * r)
        report.constants.update({
            "C_lp": safe_ratio(report.delta_lp, r * grad_a),
            "C_grad": safe_ratio(report.delta_grad, grad_a),
        })
    if measure_l:
        _measure_l(report, v, w, cell_scale)
    logger.info("Boundary ball %d at %s (%s): s = %.4f", ball, _point(center), kind,
        sel.radius)
    return w, report


CALIBRATION_DIRECTION = (1.0, 0.37, 0.21)
CALIBRATION_RADII = (0.08, 0.12, 0.16)
CALIBRATION_STEPS = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0)


@lru_cache(maxsize=None)
def calibrate_lambda(n, p, resolution):
    """Largest safe good-ball threshold, measured on a hedgehog in the ball.

    Balls B_r at k*r from the singularity give samples of the energy ratio
    int_{B_2r} |grad u|^p / r^(N-p) and of the trace spread at 1.75 r.
    The threshold is bisected so that every sample below it has a spread of
    at most 1/3, and 0.9 of it is returned.
    """
    from sphere_surgery.presets import make_map

    check_exponent(p)
    cap = 32 if n == 3 else 128
    res = max(16, min(int(resolution), cap))
    u = make_map(DomainSpec(n, BALL), res, 'hedgehog')
    grad = gradient(u)
    direction = np.asarray(CALIBRATION_DIRECTION[:n])
    direction /= np.linalg.norm(direction)
    samples = []
    for r in CALIBRATION_RADII:
        for k in CALIBRATION_STEPS:
            x = k * r * direction
            if np.linalg.norm(x) + 2.0 * r > 1.0:
                continue
            ratio = ball_energy(grad, x, 2.0 * r, p) / r ** (n - p)
            trace = restrict_to_sphere(u, x, 1.75 * r, p=p)
            samples.append((ratio, trace.spread(trace.mean_direction())))
    ratios = np.array([s[0] for s in samples])
    spreads = np.array([s[1] for s in samples])

    def safe(lam):
        return bool(np.all(spreads[ratios < lam] <= SPREAD_LIMIT))

    lo, hi = 0.0, 2.0 * float(ratios.max())
    for _ in range(60):
        mid = (lo + hi) / 2.0
        if safe(mid):
            lo = mid
        else:
            hi = mid
    lam = 0.9 * lo
    logger.info("Calibrated lambda %.4g for N=%d, p=%g at resolution %d "
                "from %d samples", lam, n, p, res, len(samples))
    return lam
