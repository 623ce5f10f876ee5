"""The global approximation: cover, colour, operate ball by ball, verify.

A map whose minimal connection is short compared with delta is repaired
ball by ball on an r-cover, one colour class at a time. Otherwise it is
replaced by its normalised mean.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from dataclasses import field

import networkx as nx
import numpy as np
from scipy.spatial import cKDTree

from sphere_surgery import errors
from sphere_surgery import surgery
from sphere_surgery.connection import brute_force_connection
from sphere_surgery.connection import dual_family
from sphere_surgery.connection import l_of_map
from sphere_surgery.connection import minimal_connection
from sphere_surgery.connection import BRUTE_FORCE_LIMIT
from sphere_surgery.field import GridMap
from sphere_surgery.field import gradient
from sphere_surgery.field import lp_norm
from sphere_surgery.field import normalize_rows
from sphere_surgery.field import w1p_distance
from sphere_surgery.jacobian import detect_charges
from sphere_surgery.jacobian import pairings
from sphere_surgery.lattice import BOX

logger = logging.getLogger(__name__)

INTERIOR = 'interior'
BOUNDARY = 'boundary'

# outer balls are B_8r, so two balls conflict below 16 r
OVERLAP_FACTOR = 16.0

RADIUS_FACTOR = 4.5
MIN_RADIUS_CELLS = 8

# ceilings for the realised constants of verify_estimates; a colour step
# changes u only inside outer balls of diameter at most 16 r
CONSTANT_BOUNDS = {
    "global-w1p": 25.0,
    "global-measure": 100.0,
    "step-lp": 16.0,
    "step-gradient": 25.0,
    "step-measure": 25.0,
    "step-measure-2p": 25.0,
    "step-cumulative": 25.0,
}


def overlap_bound(n):
    """#{k in Z^N, k != 0, |k| < 16}."""
    k = int(OVERLAP_FACTOR)
    grid = np.indices((2 * k + 1,) * n).reshape(n, -1).T - k
    norms = np.linalg.norm(grid, axis=1)
    return int(np.count_nonzero((norms > 0) & (norms < OVERLAP_FACTOR)))


def default_delta(domain):
    return domain.inradius / 4.0


@dataclass(eq=False)
class BallPlan:
    domain: object
    r: float
    centers: np.ndarray
    anchors: np.ndarray
    kinds: list
    colors: list
    theta: int
    max_overlap: int
    lam: float = None
    delta: float = None

    def __len__(self):
        return len(self.centers)

    def to_dict(self):
        return {
            "r": self.r,
            "balls": len(self.centers),
            "interior": self.kinds.count(INTERIOR),
            "boundary": self.kinds.count(BOUNDARY),
            "colors": len(self.colors),
            "theta": self.theta,
            "max_overlap": self.max_overlap,
            "lam": self.lam,
            "delta": self.delta,
        }


def _box_centers(n, r):
    axis = list(np.arange(0.0, 1.0, r))
    if 1.0 - axis[-1] > 1e-12:
        axis.append(1.0)
    return np.array(list(itertools.product(axis, repeat=n)))


def _ball_centers(domain, r):
    n = domain.dimension
    k = int(math.ceil((1.0 + r) / r))
    points = (np.indices((2 * k + 1,) * n).reshape(n, -1).T - k) * r
    norms = np.linalg.norm(points, axis=1)
    inside = points[norms <= 1.0]
    outside = points[(norms > 1.0) & (norms < 1.0 + r)]
    centers = np.vstack([inside, domain.project_to_boundary(outside)])
    return np.unique(np.round(centers, 12), axis=0)


def plan_cover(domain, r, lattice=None, delta=None, lam=None):
    """Cover the domain with r-balls and colour the 16r-overlap graph."""
    if r >= domain.diameter / 4.0:
        raise errors.RadiusTooLarge("Cover radius must stay below a quarter diameter",
            r=r, diameter=domain.diameter)
    if delta is not None and r >= delta:
        raise errors.RadiusTooLarge("Cover radius must stay below delta", r=r, delta=delta)
    n = domain.dimension
    if domain.shape == BOX:
        centers = _box_centers(n, r)
    else:
        centers = _ball_centers(domain, r)
    if lattice is not None:
        nodes = lattice.nodes[lattice.node_active]
        gap, _ = cKDTree(centers).query(nodes)
        remaining = nodes[gap > r]
        extra = []
        while len(remaining):
            extra.append(remaining[0])
            remaining = remaining[np.linalg.norm(remaining - remaining[0], axis=1) > r]
        if extra:
            logger.debug("Coverage pass added %d centres", len(extra))
            centers = np.vstack([centers, extra])
    distance = domain.boundary_distance(centers)
    interior = distance >= 2.0 * r
    anchors = np.where(interior[:, None], centers, domain.project_to_boundary(centers))
    # boundary balls sharing an anchor are the same surgery
    _, keep = np.unique(np.round(anchors, 12), axis=0, return_index=True)
    keep = np.sort(keep)
    centers = centers[keep]
    anchors = anchors[keep]
    kinds = [INTERIOR if interior[i] else BOUNDARY for i in keep]
    graph = nx.Graph()
    graph.add_nodes_from(range(len(anchors)))
    graph.add_edges_from(cKDTree(anchors).query_pairs(OVERLAP_FACTOR * r))
    coloring = nx.greedy_color(graph, strategy='largest_first')
    count = max(coloring.values()) + 1 if coloring else 0
    colors = [sorted(i for (i, c) in coloring.items() if c == k) for k in range(count)]
    max_overlap = max((d for (_, d) in graph.degree()), default=0)
    theta = overlap_bound(n)
    logger.info("Cover with %d balls of radius %.4f in %d colours", len(anchors), r, count)
    return BallPlan(domain, float(r), centers, anchors, kinds, colors, theta,
        int(max_overlap), lam, delta)


@dataclass(eq=False)
class ColorStep:
    color: int
    balls: list
    reports: list
    before: GridMap
    after: GridMap
    e_mask: np.ndarray
    f_mask: np.ndarray
    delta_lp: float
    delta_grad: float
    l_after: float

    @property
    def e_measure(self):
        return float(self.e_mask.sum()) * self.before.lattice.cell_volume

    @property
    def f_measure(self):
        return float(self.f_mask.sum()) * self.before.lattice.cell_volume

    def to_dict(self):
        return {
            "color": self.color,
            "balls": self.balls,
            "surgeries": [r.to_dict() for r in self.reports],
            "e_measure": self.e_measure,
            "f_measure": self.f_measure,
            "delta_lp": self.delta_lp,
            "delta_grad": self.delta_grad,
            "l_after": self.l_after,
        }


@dataclass(eq=False)
class ApproximationReport:
    case: int
    p: float
    lam: float
    delta: float
    l_initial: float
    cell_scale: float = None
    r: float = None
    plan: BallPlan = None
    steps: list = field(default_factory=list)
    residual_charges: int = None
    residual_pairing: float = None
    w1p: float = None
    a_mask: np.ndarray = None
    a_measure: float = 0.0
    grad_norm: float = 0.0
    constants: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    success: bool = False
    failure: dict = None

    def to_dict(self):
        return {
            "case": self.case,
            "p": self.p,
            "lam": self.lam,
            "delta": self.delta,
            "l_initial": self.l_initial,
            "cell_scale": self.cell_scale,
            "r": self.r,
            "plan": self.plan.to_dict() if self.plan is not None else None,
            "steps": [s.to_dict() for s in self.steps],
            "residual_charges": self.residual_charges,
            "residual_pairing": self.residual_pairing,
            "w1p": self.w1p,
            "a_measure": self.a_measure,
            "grad_norm": self.grad_norm,
            "constants": self.constants,
            "checks": self.checks,
            "notes": self.notes,
            "success": self.success,
            "failure": self.failure,
        }


def _setting(config, name, default=None):
    value = getattr(config, name, None) if config is not None else None
    return default if value is None else value


def _resolve_lambda(config, n, p, resolution):
    lam = _setting(config, 'lam', 'auto')
    if lam == 'auto':
        return surgery.calibrate_lambda(n, float(p), int(resolution))
    return float(lam)


def _check_range(p, n):
    if not (n - 1 < p < n):
        raise errors.InvalidExponent("Exponent must lie strictly between N-1 and N",
            p=p, dimension=n)


def choose_radius(length, spacing, delta):
    r = max(RADIUS_FACTOR * length, min(MIN_RADIUS_CELLS * spacing, 0.9 * delta))
    if r >= delta:
        r = (4.0 * length + delta) / 2.0
    return r


def _mean_direction(u):
    cells = u.at_cells().data[u.lattice.cell_active]
    mean = cells.sum(axis=0)
    if np.linalg.norm(mean) == 0.0:
        mean = np.zeros(u.dimension)
        mean[-1] = 1.0
    return normalize_rows(mean)


def _constant_case(u, p, report):
    """Replace u by its normalised mean when L is large compared with delta."""
    n = u.dimension
    lattice = u.lattice
    alpha = _mean_direction(u)
    w = GridMap.constant(lattice, alpha)
    grad_norm = lp_norm(gradient(u), p)
    volume = lattice.active_volume
    length = report.l_initial
    report.grad_norm = grad_norm
    report.a_mask = lattice.cell_active.copy()
    report.a_measure = volume
    holder = volume ** (1.0 - (n - 1) / p) * grad_norm ** (n - 1)
    c0 = (report.delta / 4.0) ** (n / (n - 1.0)) / volume ** (1.0 / (n - 1.0))
    report.constants.update({
        "alpha": [float(c) for c in alpha],
        "poincare": surgery.safe_ratio(lp_norm(u - w, p), grad_norm),
        "holder_rhs": holder,
        "c0": c0,
    })
    report.checks["holder"] = bool(length <= holder * (1.0 + 1e-9))
    report.checks["c0_chain"] = bool(length * grad_norm >= c0 * volume ** (1.0 / p))
    report.notes.append("connection too long for the cover, constant map returned")
    logger.info("Case 2: 4L = %.4g >= delta = %.4g", 4.0 * length, report.delta)
    return w


def _operate(current, grad, plan, i, connection, p, lam, config):
    """Pick and run the surgery for ball i; None when the ball is skipped."""
    anchor = plan.anchors[i]
    r = plan.r
    n = current.dimension
    charges = connection.charges
    matching = connection.matching
    cell_scale = _setting(config, 'cell_scale')
    max_iters = _setting(config, 'max_iters', 6)
    if plan.kinds[i] == INTERIOR:
        energy = surgery.ball_energy(grad, anchor, 2.0 * r, p)
        threshold = lam * r ** (n - p)
        if energy < threshold and not len(charges.within(anchor, 2.0 * r)):
            return None
        if energy >= threshold:
            return surgery.replace_bad_ball(current, anchor, r, matching, p, lam,
                ball=i, cell_scale=cell_scale, max_iters=max_iters)
        try:
            return surgery.replace_good_ball(current, anchor, r, matching, p, lam,
                ball=i, cell_scale=cell_scale)
        except errors.TraceNotInSmallDisk as exc:
            logger.info("Ball %d: %s, using the bad construction", i, exc.args[0])
            w, report = surgery.replace_bad_ball(current, anchor, r, matching, p, lam,
                ball=i, check=False, cell_scale=cell_scale, max_iters=max_iters)
            report.notes.append("fallback from the good construction")
            return w, report
    energy = surgery.ball_energy(grad, anchor, 4.0 * r, p)
    threshold = lam * (2.0 * r) ** (n - p)
    if energy < threshold and not len(charges.within(anchor, 4.0 * r)):
        return None
    force = surgery.BAD if energy >= threshold else surgery.GOOD
    try:
        return surgery.replace_boundary_ball(current, anchor, r, matching, p, lam,
            delta=plan.delta, ball=i, cell_scale=cell_scale, force=force)
    except errors.TraceNotInSmallDisk:
        w, report = surgery.replace_boundary_ball(current, anchor, r, matching, p, lam,
            delta=plan.delta, ball=i, cell_scale=cell_scale, force=surgery.BAD)
        report.notes.append("fallback from the good construction")
        return w, report


def approximate(u, p, config=None):
    """Approximate u by a charge-free map, recording every estimate.

    config is any object with the attributes lam, delta, radius, cell_scale,
    max_iters and workers; missing or None attributes take their defaults.
    """
    n = u.dimension
    lattice = u.lattice
    _check_range(p, n)
    cell_scale = _setting(config, 'cell_scale')
    delta = float(_setting(config, 'delta', default_delta(u.domain)))
    lam = _resolve_lambda(config, n, p, lattice.resolution)
    workers = int(_setting(config, 'workers', 1))
    connection = l_of_map(u, cell_scale)
    length = connection.length
    report = ApproximationReport(1, float(p), lam, delta, length)
    report.cell_scale = connection.charges.cell_scale
    report.grad_norm = lp_norm(gradient(u), p)
    if 4.0 * length >= delta:
        report.case = 2
        w = _constant_case(u, p, report)
        return _conclude(u, w, p, report, connection, workers, cell_scale)

    r = _setting(config, 'radius')
    if r is None:
        r = choose_radius(length, lattice.spacing, delta)
    r = float(r)
    if r <= 4.0 * length:
        raise errors.RadiusBelowConnection("Cover radius must exceed 4 L",
            r=r, connection=length)
    report.r = r
    plan = plan_cover(u.domain, r, lattice, delta, lam)
    report.plan = plan
    if len(plan.colors) > plan.theta + 1:
        report.notes.append("colour count above theta + 1")
    initial = connection
    current = u
    f_mask = np.zeros(lattice.cell_shape, dtype=bool)
    for k, color in enumerate(plan.colors):
        before = current
        grad = gradient(current)
        reports = []
        for i in color:
            try:
                result = _operate(current, grad, plan, i, connection, p, lam, config)
            except errors.SphereSurgeryError as exc:
                report.failure = {"ball": int(i), "color": k, "error": exc.to_dict()}
                raise errors.SurgeryFailed(int(i), exc, report)
            if result is None:
                continue
            current, ball_report = result
            grad = gradient(current)
            reports.append(ball_report)
        if not reports:
            continue
        e_mask = np.zeros(lattice.cell_shape, dtype=bool)
        for ball_report in reports:
            if ball_report.a_mask is not None:
                e_mask |= ball_report.a_mask
        f_mask = f_mask | e_mask
        connection = l_of_map(current, cell_scale)
        step = ColorStep(k, [rep.ball for rep in reports], reports, before, current,
            e_mask, f_mask, lp_norm(current - before, p),
            lp_norm(gradient(current) - gradient(before), p), connection.length)
        report.steps.append(step)
        logger.info("Colour %d: %d surgeries, L = %.4g", k, len(reports), connection.length)
    report.a_mask = f_mask
    report.a_measure = float(f_mask.sum()) * lattice.cell_volume
    return _conclude(u, current, p, report, initial, workers, cell_scale)


def _conclude(u, w, p, report, initial, workers, cell_scale):
    residual = detect_charges(w, cell_scale)
    report.residual_charges = residual.expanded_count()
    family = dual_family(u.domain, u.spacing, initial.charges, initial.matching)
    report.residual_pairing = jacobian_zero_test(w, family, workers)
    report.w1p = w1p_distance(u, w, p)
    grad_a = lp_norm(gradient(u), p, report.a_mask) if report.a_mask.any() else 0.0
    measure = report.a_measure ** (1.0 / p)
    report.constants.update({
        "grad_A": grad_a,
        "C_w1p": surgery.safe_ratio(report.w1p, grad_a),
        "C_measure": surgery.safe_ratio(measure, report.l_initial * report.grad_norm),
    })
    if report.r is not None:
        report.constants["C_A_r"] = surgery.safe_ratio(measure, report.r * report.grad_norm)
    report.success = report.residual_charges == 0
    if not report.success:
        logger.warning("%d charges remain after the approximation",
            report.residual_charges)
    return w, report


def jacobian_zero_test(u, family, workers=1):
    """max |<Jac u, zeta>| over the family, 0 for an empty family."""
    if not family:
        return 0.0
    return float(max(abs(x) for x in pairings(u, family, workers=workers)))


@dataclass(frozen=True)
class Check:
    name: str
    lhs: float
    rhs: float
    constant: float
    holds: bool
    note: str = ""
    bound: float = None

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class VerificationRecord:
    checks: tuple

    @property
    def all_hold(self):
        return all(c.holds for c in self.checks)

    def by_name(self, name):
        return [c for c in self.checks if c.name == name]

    def to_dict(self):
        return {
            "all_hold": self.all_hold,
            "checks": [c.to_dict() for c in self.checks],
        }


def _measured(name, lhs, rhs, bounds, scale=1.0, note=""):
    """A realised constant lhs / (scale * rhs), held against its ceiling."""
    constant = surgery.safe_ratio(lhs, scale * rhs)
    bound = bounds[name.split("[")[0]]
    holds = constant is not None and constant <= bound * (1.0 + 1e-9)
    return Check(name, float(lhs), float(rhs), constant, bool(holds), note, bound)


def _exact_length(charges, domain):
    if charges.expanded_count() <= BRUTE_FORCE_LIMIT:
        return brute_force_connection(charges, domain), "brute-force connection"
    return minimal_connection(charges, domain).length, "assignment connection"


def verify_estimates(u, w, report, p, bounds=None):
    """Recompute the global and per-colour estimates from stored snapshots.

    Every realised constant is compared with its ceiling in CONSTANT_BOUNDS,
    which bounds may override by check name without the colour suffix.
    """
    ceilings = dict(CONSTANT_BOUNDS)
    ceilings.update(bounds or {})
    lattice = u.lattice
    grad_u = gradient(u)
    checks = []
    a_mask = report.a_mask if report.a_mask is not None else np.zeros(
        lattice.cell_shape, dtype=bool)
    grad_a = lp_norm(grad_u, p, a_mask) if a_mask.any() else 0.0
    checks.append(_measured("global-w1p", w1p_distance(u, w, p), grad_a, ceilings))
    charges = detect_charges(u, report.cell_scale)
    length, how = _exact_length(charges, u.domain)
    measure = (float(a_mask.sum()) * lattice.cell_volume) ** (1.0 / p)
    checks.append(_measured("global-measure", measure, length * lp_norm(grad_u, p), ceilings,
        note=how))
    r = report.r
    previous_f = 0.0
    for step in report.steps:
        k = step.color
        before = step.before
        after = step.after
        grad_before = gradient(before)
        grad_after = gradient(after)
        jump = lp_norm(grad_after - grad_before, p)
        checks.append(_measured("step-lp[%d]" % k, lp_norm(after - before, p), jump, ceilings,
            r))
        e_grad = lp_norm(grad_before, p, step.e_mask) if step.e_mask.any() else 0.0
        checks.append(_measured("step-gradient[%d]" % k, jump, e_grad, ceilings))
        e_root = step.e_measure ** (1.0 / p)
        checks.append(_measured("step-measure[%d]" % k, e_root, lp_norm(grad_u, p), ceilings,
            r))
        checks.append(_measured("step-measure-2p[%d]" % k, e_root, lp_norm(grad_u, 2.0 * p),
            ceilings, r, note="L^2p right-hand side"))
        f_grad = lp_norm(grad_u, p, step.f_mask) if step.f_mask.any() else 0.0
        checks.append(_measured("step-cumulative[%d]" % k, lp_norm(grad_after - grad_u, p),
            f_grad, ceilings))
        f_root = step.f_measure ** (1.0 / p)
        bound = previous_f + e_root
        checks.append(Check("f-ledger[%d]" % k, f_root, bound, None,
            bool(f_root <= bound * (1.0 + 1e-12) + 1e-15)))
        previous_f = f_root
    return VerificationRecord(tuple(checks))
