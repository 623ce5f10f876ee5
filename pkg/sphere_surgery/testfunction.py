"""Compactly supported scalar test functions with analytic gradients.

Every kind knows its Lipschitz bound, so families can be screened before
they are paired with a Jacobian.
"""

import logging
import math
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from sphere_surgery.lattice import BALL

logger = logging.getLogger(__name__)


def _radial(points, center):
    rel = np.asarray(points, dtype=float) - center
    return rel, np.linalg.norm(rel, axis=-1)


def bump_profile(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


def bump_slope(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = -2.0 * ti / (1.0 - ti ** 2) ** 2 * np.exp(1.0 - 1.0 / (1.0 - ti ** 2))
    return out


@lru_cache(maxsize=None)
def bump_slope_max():
    result = minimize_scalar(lambda t: float(bump_slope(t)), bounds=(0.0, 0.999),
        method='bounded', options={'xatol': 1e-12})
    return -float(result.fun) * (1.0 + 1e-9)


def _ramp(q, eta):
    # C^1 ramp: 0 below 0, quadratic on (0, eta), slope one beyond
    if eta <= 0.0:
        return np.maximum(q, 0.0), (q > 0.0).astype(float)
    value = np.where(q <= 0.0, 0.0, np.where(q < eta, q ** 2 / (2.0 * eta), q - eta / 2.0))
    slope = np.clip(q / eta, 0.0, 1.0)
    return value, slope


def smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def smoothstep5_slope(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 30.0 * t ** 2 * (1.0 - t) ** 2, 0.0)


class TestFunction(object):
    __test__ = False

    kind = None

    def __init__(self, center, support_radius, lipschitz, ident=None):
        self.center = np.asarray(center, dtype=float)
        self.support_radius = float(support_radius)
        self.lipschitz = float(lipschitz)
        self.ident = ident or self.kind

    def value(self, points):
        raise NotImplementedError

    def gradient(self, points):
        raise NotImplementedError

    def support_inside(self, domain):
        return bool(domain.boundary_distance(self.center) > self.support_radius)

    def scaled(self, factor):
        return LinearCombination([(factor, self)])

    def to_dict(self):
        return {
            "id": self.ident,
            "kind": self.kind,
            "center": [float(c) for c in self.center],
            "support_radius": self.support_radius,
            "lipschitz": self.lipschitz,
        }


class Bump(TestFunction):
    """amplitude * exp(1 - 1/(1 - t^2)) with t = |x - c| / radius."""

    kind = 'bump'

    def __init__(self, center, radius, amplitude=1.0, ident=None):
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        lip = abs(self.amplitude) * bump_slope_max() / self.radius
        super(Bump, self).__init__(center, radius, lip, ident)

    @classmethod
    def unit_lipschitz(cls, center, radius, ident=None):
        return cls(center, radius, radius / bump_slope_max(), ident)

    def value(self, points):
        _, rho = _radial(points, self.center)
        return self.amplitude * bump_profile(rho / self.radius)

    def gradient(self, points):
        rel, rho = _radial(points, self.center)
        slope = self.amplitude * bump_slope(rho / self.radius) / self.radius
        scale = np.divide(slope, rho, out=np.zeros_like(rho), where=rho > 0)
        return rel * scale[..., None]


class Cone(TestFunction):
    """A cone of height about radius, with its tip and rim rounded over eta."""

    kind = 'cone'

    def __init__(self, center, radius, amplitude=1.0, smoothing=0.0, ident=None):
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self.smoothing = float(smoothing)
        eta = self.smoothing
        reach = math.sqrt((self.radius + eta) ** 2 - eta ** 2)
        super(Cone, self).__init__(center, reach, abs(self.amplitude), ident)

    @property
    def peak(self):
        return self.amplitude * float(_ramp(np.array(self.radius), self.smoothing)[0])

    def _soft_rho(self, rho):
        eta = self.smoothing
        return np.sqrt(rho ** 2 + eta ** 2) - eta

    def value(self, points):
        _, rho = _radial(points, self.center)
        value, _ = _ramp(self.radius - self._soft_rho(rho), self.smoothing)
        return self.amplitude * value

    def gradient(self, points):
        rel, rho = _radial(points, self.center)
        _, slope = _ramp(self.radius - self._soft_rho(rho), self.smoothing)
        soft = np.sqrt(rho ** 2 + self.smoothing ** 2)
        scale = np.divide(-self.amplitude * slope, soft, out=np.zeros_like(rho),
            where=soft > 0)
        return rel * scale[..., None]


class Tent(TestFunction):
    """Lipschitz-1 tent along a dipole axis.

    The projection onto the axis through the midpoint m is clamped to half the
    pair length, and the result is capped by radius - |x - m|. It equals
    +-length/2 at the two charges whenever radius >= length.
    """

    kind = 'tent'

    def __init__(self, positive, negative, radius, sign=1.0, ident=None):
        self.positive = np.asarray(positive, dtype=float)
        self.negative = np.asarray(negative, dtype=float)
        axis = self.positive - self.negative
        self.length = float(np.linalg.norm(axis))
        self.axis = axis / self.length
        self.radius = float(radius)
        self.sign = 1.0 if sign >= 0 else -1.0
        middle = (self.positive + self.negative) / 2.0
        super(Tent, self).__init__(middle, radius, 1.0, ident)

    def _parts(self, points):
        rel, rho = _radial(points, self.center)
        t = rel @ self.axis
        half = self.length / 2.0
        a = np.clip(t, -half, half)
        cap = np.maximum(self.radius - rho, 0.0)
        return rel, rho, t, a, cap

    def value(self, points):
        _, _, _, a, cap = self._parts(points)
        return self.sign * np.sign(a) * np.minimum(np.abs(a), cap)

    def gradient(self, points):
        rel, rho, t, a, cap = self._parts(points)
        along = (np.abs(a) <= cap) & (cap > 0.0) & (np.abs(t) < self.length / 2.0)
        capped = (np.abs(a) > cap) & (cap > 0.0)
        grad = np.zeros(rel.shape)
        grad[along] = self.axis
        unit = np.divide(rel, rho[..., None], out=np.zeros_like(rel),
            where=rho[..., None] > 0)
        grad[capped] = -np.sign(a[capped])[:, None] * unit[capped]
        return self.sign * grad


class DistanceRamp(TestFunction):
    """sign * ramp(dist(x, boundary) - margin), smoothed by eta.

    The box distance is a soft minimum over the faces, the ball distance has
    its apex rounded, so the result is C^1 and 1-Lipschitz.
    """

    kind = 'distance'

    def __init__(self, domain, margin, sign=1.0, smoothing=0.0, ident=None):
        self.domain = domain
        self.margin = float(margin)
        self.sign = 1.0 if sign >= 0 else -1.0
        self.smoothing = float(smoothing)
        super(DistanceRamp, self).__init__(domain.center,
            domain.inradius - self.margin, 1.0, ident)

    def support_inside(self, domain):
        return self.margin > 0.0 and domain == self.domain

    def _distance(self, points):
        x = np.asarray(points, dtype=float)
        eta = self.smoothing
        if self.domain.shape == BALL:
            rho = np.linalg.norm(x, axis=-1)
            soft = np.sqrt(rho ** 2 + eta ** 2)
            unit = np.divide(x, soft[..., None], out=np.zeros_like(x),
                where=soft[..., None] > 0)
            return 1.0 - (soft - eta), -unit
        n = x.shape[-1]
        gaps = np.concatenate([x, 1.0 - x], axis=-1)
        normals = np.concatenate([np.eye(n), -np.eye(n)], axis=0)
        if eta <= 0.0:
            nearest = np.argmin(gaps, axis=-1)
            return np.min(gaps, axis=-1), normals[nearest]
        low = np.min(gaps, axis=-1, keepdims=True)
        w = np.exp(-(gaps - low) / eta)
        total = w.sum(axis=-1, keepdims=True)
        soft = low[..., 0] - eta * np.log(total[..., 0])
        return soft, (w / total) @ normals

    def value(self, points):
        d, _ = self._distance(points)
        value, _ = _ramp(d - self.margin, self.smoothing)
        return self.sign * value

    def gradient(self, points):
        d, grad = self._distance(points)
        _, slope = _ramp(d - self.margin, self.smoothing)
        return self.sign * slope[..., None] * grad


class Plateau(TestFunction):
    """1 on B_inner, 0 outside B_outer, quintic smoothstep in between."""

    kind = 'plateau'

    def __init__(self, center, inner, outer, ident=None):
        self.inner = float(inner)
        self.outer = float(outer)
        lip = 15.0 / (8.0 * (self.outer - self.inner))
        super(Plateau, self).__init__(center, outer, lip, ident)

    def _t(self, rho):
        return (rho - self.inner) / (self.outer - self.inner)

    def value(self, points):
        _, rho = _radial(points, self.center)
        return 1.0 - smoothstep5(self._t(rho))

    def gradient(self, points):
        rel, rho = _radial(points, self.center)
        slope = -smoothstep5_slope(self._t(rho)) / (self.outer - self.inner)
        scale = np.divide(slope, rho, out=np.zeros_like(rho), where=rho > 0)
        return rel * scale[..., None]


class LinearCombination(TestFunction):

    kind = 'combination'

    def __init__(self, terms, ident=None):
        self.terms = [(float(a), z) for (a, z) in terms]
        lip = sum(abs(a) * z.lipschitz for (a, z) in self.terms)
        reach = max(z.support_radius for (_, z) in self.terms)
        super(LinearCombination, self).__init__(self.terms[0][1].center, reach,
            lip, ident)

    def support_inside(self, domain):
        return all(z.support_inside(domain) for (_, z) in self.terms)

    def value(self, points):
        return sum(a * z.value(points) for (a, z) in self.terms)

    def gradient(self, points):
        return sum(a * z.gradient(points) for (a, z) in self.terms)
