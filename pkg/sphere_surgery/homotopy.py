"""Sphere-valued building blocks of the surgeries.

RetractionPhi squeezes the sphere into a geodesic disk, and Homotopy
contracts a degree-zero sphere trace to a constant.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from sphere_surgery import errors
from sphere_surgery.field import icosphere
from sphere_surgery.field import normalize_rows
from sphere_surgery.jacobian import trace_degree
from sphere_surgery.testfunction import smoothstep5

logger = logging.getLogger(__name__)

# radial shells used to discretise the homotopy time
SHELLS = 32

# required angular gap between a trace image and the antipode of its base
CAP_MARGIN = 0.2

# smallest y . m allowed when blending a trace y with its smoothing m
BLEND_DOT = -0.9

# smallest norm of a kernel average before it is renormalised
MIN_AVERAGE = 0.1

CAP_SEARCH_LEVEL = 3

KERNEL_CHUNK = 512


def time_weight(t):
    """0 on [0, 1/3], 1 on [2/3, 1], smooth in between, on SHELLS steps."""
    t = np.round(np.asarray(t, dtype=float) * SHELLS) / SHELLS
    return smoothstep5(3.0 * t - 1.0)


def slerp(origin, targets, tau):
    """Constant speed geodesic from origin (tau = 0) to targets (tau = 1)."""
    targets = np.asarray(targets, dtype=float)
    origin = np.broadcast_to(np.asarray(origin, dtype=float), targets.shape)
    tau = np.broadcast_to(np.asarray(tau, dtype=float), targets.shape[:-1])
    dots = np.clip(np.einsum('...i,...i->...', origin, targets), -1.0, 1.0)
    theta = np.arccos(dots)
    sin = np.sin(theta)
    close = sin < 1e-9
    safe = np.where(close, 1.0, sin)
    a = np.where(close, 1.0 - tau, np.sin((1.0 - tau) * theta) / safe)
    b = np.where(close, tau, np.sin(tau * theta) / safe)
    return normalize_rows(a[..., None] * origin + b[..., None] * targets)


class RetractionPhi(object):
    """Geodesic squeeze of the sphere towards xi0.

    Points within geodesic distance 2/3 of xi0 are fixed, the remaining
    radii are compressed by a monotone C^1 profile onto [2/3, 0.9) and the
    antipode goes to xi0. The profile has slope at most one and stays below
    the identity, so Phi is 1-Lipschitz for the geodesic metric.
    """

    inner = 2.0 / 3.0
    geodesic_radius = 0.9
    lipschitz = math.pi / 2.0

    _profile = CubicHermiteSpline([2.0 / 3.0, 1.2, math.pi], [2.0 / 3.0, 0.9, 0.0],
        [1.0, 0.0, -0.6])

    def __init__(self, xi0):
        self.xi0 = normalize_rows(np.asarray(xi0, dtype=float))

    def sigma(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= self.inner, rho,
            self._profile(np.clip(rho, self.inner, math.pi)))

    def distance(self, x):
        dots = np.clip(np.asarray(x) @ self.xi0, -1.0, 1.0)
        return np.arccos(dots)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.array(x, copy=True)
        rho = self.distance(x)
        move = rho > self.inner
        if not move.any():
            return out
        xm = x[move]
        along = xm @ self.xi0
        normal = normalize_rows(xm - along[:, None] * self.xi0,
            fallback=_any_normal(self.xi0))
        s = self.sigma(rho[move])
        out[move] = np.cos(s)[:, None] * self.xi0 + np.sin(s)[:, None] * normal
        return out


def _any_normal(xi):
    e = np.zeros_like(xi)
    e[int(np.argmin(np.abs(xi)))] = 1.0
    e -= (e @ xi) * xi
    return e / np.linalg.norm(e)


def _cap_margin(values, xi):
    dots = np.clip(values @ xi, -1.0, 1.0)
    return math.pi - float(np.arccos(dots.min()))


def find_cap(values, first=None):
    """A direction whose antipodal cap of radius CAP_MARGIN misses values."""
    candidates, _ = icosphere(CAP_SEARCH_LEVEL)
    if first is not None:
        candidates = np.vstack([first, candidates])
    best = None
    best_margin = -1.0
    for xi in candidates:
        margin = _cap_margin(values, xi)
        if margin >= CAP_MARGIN:
            return xi, margin
        if margin > best_margin:
            best, best_margin = xi, margin
    logger.debug("No free cap, best margin %.3f", best_margin)
    return None, best_margin


def kernel_average(trace, width, directions):
    """Average of the trace values against exp((w . w_k - 1) / width^2)."""
    weights = trace.vertex_weights()
    used = weights > 0.0
    nodes = trace.directions[used]
    values = trace.values[used]
    weights = weights[used]
    directions = np.asarray(directions, dtype=float)
    out = np.empty(directions.shape)
    for start in range(0, len(directions), KERNEL_CHUNK):
        chunk = directions[start:start + KERNEL_CHUNK]
        k = np.exp((chunk @ nodes.T - 1.0) / width ** 2) * weights
        out[start:start + KERNEL_CHUNK] = (k @ values) / k.sum(axis=1, keepdims=True)
    return out


def _mean_spacing(trace):
    faces = trace.elements
    a = trace.directions[faces[:, 0]]
    b = trace.directions[faces[:, 1]]
    return float(np.mean(np.arccos(np.clip(np.einsum('ij,ij->i', a, b), -1.0, 1.0))))


@dataclass(frozen=True, eq=False)
class Homotopy:
    """H(t, w): the constant base for t <= 1/3, the trace for t >= 2/3.

    method is one of 'lift' (circle maps), 'geodesic' (trace omits a cap),
    'mollified' (trace blended with its kernel smoothing first) and 'cone'
    (partial sphere contracted towards a pole inside the domain).
    """

    method: str
    trace: object
    base: np.ndarray
    lift: np.ndarray = None
    width: float = 0.0
    pole: np.ndarray = None

    def _lift_at(self, directions):
        samples = len(self.trace.directions)
        phi = np.mod(np.arctan2(directions[:, 1], directions[:, 0]), 2.0 * math.pi)
        grid = 2.0 * math.pi * np.arange(samples + 1) / samples
        lift = np.append(self.lift, self.lift[0])
        return np.interp(phi, grid, lift)

    def evaluate(self, t, directions, values):
        directions = np.asarray(directions, dtype=float)
        values = np.asarray(values, dtype=float)
        tau = np.broadcast_to(time_weight(t), values.shape[:-1])
        out = np.array(values, copy=True)
        moving = tau < 1.0
        if not moving.any():
            return out
        tau = tau[moving]
        omega = directions[moving]
        y = values[moving]
        if self.method == 'lift':
            guess = self._lift_at(omega)
            wrapped = np.arctan2(y[:, 1], y[:, 0]) - guess
            exact = guess + np.remainder(wrapped + math.pi, 2.0 * math.pi) - math.pi
            mean = math.atan2(self.base[1], self.base[0])
            angle = mean + tau * (exact - mean)
            out[moving] = np.stack([np.cos(angle), np.sin(angle)], axis=1)
        elif self.method == 'geodesic':
            out[moving] = slerp(self.base, y, tau)
        elif self.method == 'mollified':
            m = normalize_rows(kernel_average(self.trace, self.width, omega))
            late = tau >= 0.5
            mix = np.empty(y.shape)
            lam = 2.0 * (1.0 - tau[late])
            mix[late] = normalize_rows((1.0 - lam)[:, None] * y[late] +
                lam[:, None] * m[late])
            mix[~late] = slerp(self.base, m[~late], 2.0 * tau[~late])
            out[moving] = mix
        elif self.method == 'cone':
            path = slerp(self.pole, omega, tau)
            points = self.trace.center + self.trace.radius * path
            out[moving] = self.trace.sample(points)
        else:
            raise ValueError("Unknown homotopy method %s" % self.method)
        return out

    def to_dict(self):
        return {
            "method": self.method,
            "base": [float(c) for c in self.base],
            "width": self.width,
        }


def contract_degree_zero(trace, max_iters=6):
    """Contract a complete degree-zero trace to a constant.

    Circle traces are lifted to a real angle and contracted to its mean.
    Sphere traces try a geodesic contraction to a free cap first, then blend
    with kernel averages of doubling width until one omits a cap.
    """
    degree, _ = trace_degree(trace)
    if degree != 0:
        raise errors.NonzeroDegree("Only degree zero traces contract to a constant",
            degree=degree, center=[float(c) for c in trace.center],
            radius=trace.radius)
    values = trace.values
    if trace.dimension == 2:
        lift = np.unwrap(np.arctan2(values[:, 1], values[:, 0]))
        mean = float(np.mean(lift))
        base = np.array([math.cos(mean), math.sin(mean)])
        logger.debug("Circle trace lifted, mean angle %.4f", mean)
        return Homotopy('lift', trace, base, lift=lift)
    used = values[trace.used()]
    xi, margin = find_cap(used, trace.mean_direction())
    if xi is not None:
        logger.debug("Trace omits a cap of margin %.3f", margin)
        return Homotopy('geodesic', trace, xi)
    width = 2.0 * _mean_spacing(trace)
    directions = trace.directions[trace.used()]
    for attempt in range(max_iters):
        raw = kernel_average(trace, width, directions)
        norms = np.linalg.norm(raw, axis=1)
        if norms.min() >= MIN_AVERAGE:
            m = raw / norms[:, None]
            if np.einsum('ij,ij->i', used, m).min() >= BLEND_DOT:
                xi, margin = find_cap(m, normalize_rows(raw.mean(axis=0)))
                if xi is not None:
                    logger.info("Trace contracted after smoothing at width %.3f", width)
                    return Homotopy('mollified', trace, xi, width=width)
        logger.debug("Smoothing width %.3f rejected (attempt %d)", width, attempt + 1)
        width *= 2.0
    raise errors.HomotopyNotFound("No contraction found for the sphere trace",
        center=[float(c) for c in trace.center], radius=trace.radius,
        attempts=max_iters)


def contract_cone(trace, pole):
    """Contract a partial sphere inside the domain to its point towards pole."""
    pole = normalize_rows(np.asarray(pole, dtype=float))
    base = trace.sample(np.atleast_2d(trace.center + trace.radius * pole))[0]
    return Homotopy('cone', trace, base, pole=pole)
