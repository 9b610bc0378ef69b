"""Interface curves and the geometric queries the discretization needs.

The interface separates the inner subdomain (``Region.OMEGA1``) from the outer one
(``Region.OMEGA2``). Curves are parametrized so that the inner subdomain lies to the
left of increasing parameter; the unit normal returned by every query points out of
the inner subdomain.
"""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .errors import NonConvergence

TWO_PI = 2.0 * np.pi


class Region(enum.IntEnum):
    OMEGA1 = 1
    OMEGA2 = 2
    ON_GAMMA = 0


class Intersection(NamedTuple):
    s: float  # curve parameter
    point: np.ndarray
    t: float  # position along the segment, in [0, 1]
    tangency: bool


@dataclass(frozen=True)
class CurvatureBound:
    kappa: float
    s_arg: float
    samples: int


class InterfaceCurve(ABC):
    """A smooth curve with an implicit side function.

    Subclasses provide the parametrization (``point``, ``d1``, ``d2``) and a level
    function that is negative inside the inner subdomain. ``eps`` is the
    classification tolerance: points whose level lies in ``[-eps, eps]`` are on the
    curve.
    """

    closed = True
    period = TWO_PI

    def __init__(self, eps: float = 1e-12):
        self.eps = float(eps)

    @abstractmethod
    def point(self, s): ...

    @abstractmethod
    def d1(self, s): ...

    @abstractmethod
    def d2(self, s): ...

    @abstractmethod
    def level(self, x, y): ...

    @abstractmethod
    def param_of(self, x, y):
        """Parameter of a point lying on the curve."""

    @abstractmethod
    def param_range(self, box):
        """Parameter interval covering the part of the curve inside ``box``."""

    def side(self, x, y):
        """-1 strictly inside the inner subdomain, +1 otherwise.

        Points on the curve are assigned to the outer subdomain, which gives a
        deterministic topology when the curve passes through a grid vertex.
        """
        return np.where(self.level(x, y) < -self.eps, -1, 1)

    def classify(self, p) -> Region:
        v = float(self.level(p[0], p[1]))
        if v < -self.eps:
            return Region.OMEGA1
        if v > self.eps:
            return Region.OMEGA2
        return Region.ON_GAMMA

    def tangent(self, s):
        d = self.d1(s)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal(self, s):
        t = self.tangent(s)
        return np.stack([t[..., 1], -t[..., 0]], axis=-1)

    def speed(self, s):
        return np.linalg.norm(self.d1(s), axis=-1)

    def curvature(self, s):
        d1, d2 = self.d1(s), self.d2(s)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3


class PolarCurve(InterfaceCurve):
    """Star-shaped curve ``r = r0 + sum(amp * sin(freq*theta + phase))`` about a centre."""

    def __init__(self, center, r0, terms: Sequence[tuple[float, float, float]] = (), eps=1e-12):
        super().__init__(eps)
        self.center = np.asarray(center, dtype=float)
        self.r0 = float(r0)
        self.terms = tuple((float(a), float(k), float(ph)) for a, k, ph in terms)
        th = np.linspace(0.0, TWO_PI, 4097)
        if np.min(self.radius(th)) <= 0.0:
            raise ValueError("polar radius function must stay positive")

    def __repr__(self):
        return f"PolarCurve(center={self.center.tolist()}, r0={self.r0}, terms={list(self.terms)})"

    @property
    def max_frequency(self):
        return max([abs(k) for _, k, _ in self.terms], default=0.0)

    def radius(self, th, der=0):
        th = np.asarray(th, dtype=float)
        r = np.full_like(th, self.r0 if der == 0 else 0.0)
        for a, k, ph in self.terms:
            arg = k * th + ph
            if der == 0:
                r = r + a * np.sin(arg)
            elif der == 1:
                r = r + a * k * np.cos(arg)
            elif der == 2:
                r = r - a * k * k * np.sin(arg)
            else:
                r = r - a * k**3 * np.cos(arg)
        return r

    def point(self, s):
        s = np.asarray(s, dtype=float)
        r = self.radius(s)
        return np.stack([self.center[0] + r * np.cos(s), self.center[1] + r * np.sin(s)], axis=-1)

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        r, dr = self.radius(s), self.radius(s, 1)
        c, sn = np.cos(s), np.sin(s)
        return np.stack([dr * c - r * sn, dr * sn + r * c], axis=-1)

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        r, dr, ddr = self.radius(s), self.radius(s, 1), self.radius(s, 2)
        c, sn = np.cos(s), np.sin(s)
        return np.stack(
            [ddr * c - 2 * dr * sn - r * c, ddr * sn + 2 * dr * c - r * sn], axis=-1
        )

    def curvature(self, s):
        r, dr, ddr = self.radius(s), self.radius(s, 1), self.radius(s, 2)
        return (r * r + 2 * dr * dr - r * ddr) / (r * r + dr * dr) ** 1.5

    def level(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        return np.hypot(dx, dy) - self.radius(np.arctan2(dy, dx))

    def level_gradient(self, x, y):
        dx = np.asarray(x, dtype=float) - self.center[0]
        dy = np.asarray(y, dtype=float) - self.center[1]
        r = np.hypot(dx, dy)
        th = np.arctan2(dy, dx)
        dR = self.radius(th, 1)
        er = np.stack([dx / r, dy / r], axis=-1)
        et = np.stack([-dy / r, dx / r], axis=-1)
        return er - (dR / r)[..., None] * et

    def classify(self, p) -> Region:
        d = np.asarray(p, dtype=float) - self.center
        r = float(np.hypot(d[0], d[1]))
        R = float(self.radius(np.arctan2(d[1], d[0])))
        if r < R - self.eps:
            return Region.OMEGA1
        if r > R + self.eps:
            return Region.OMEGA2
        return Region.ON_GAMMA

    def param_of(self, x, y):
        return np.mod(np.arctan2(np.asarray(y) - self.center[1], np.asarray(x) - self.center[0]), TWO_PI)

    def param_range(self, box):
        return 0.0, TWO_PI

    def enclosed_area(self):
        val, _ = _quad(lambda t: 0.5 * self.radius(t) ** 2, 0.0, TWO_PI)
        return val


def circle(center, radius, eps=1e-12) -> PolarCurve:
    return PolarCurve(center, radius, (), eps=eps)


class LineCurve(InterfaceCurve):
    """Straight interface through ``origin`` along ``direction``; the inner subdomain is on the left."""

    closed = False
    period = np.inf

    def __init__(self, origin, direction, eps=1e-12):
        super().__init__(eps)
        self.origin = np.asarray(origin, dtype=float)
        d = np.asarray(direction, dtype=float)
        self.direction = d / np.linalg.norm(d)

    def __repr__(self):
        return f"LineCurve(origin={self.origin.tolist()}, direction={self.direction.tolist()})"

    def point(self, s):
        s = np.asarray(s, dtype=float)
        return self.origin + s[..., None] * self.direction

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(self.direction, s.shape + (2,)).copy()

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        return np.zeros(s.shape + (2,))

    def curvature(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def level(self, x, y):
        dx = np.asarray(x, dtype=float) - self.origin[0]
        dy = np.asarray(y, dtype=float) - self.origin[1]
        return -(self.direction[0] * dy - self.direction[1] * dx)

    def level_gradient(self, x, y):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        g = np.array([self.direction[1], -self.direction[0]])
        return np.broadcast_to(g, shape + (2,)).copy()

    def param_of(self, x, y):
        return (np.asarray(x) - self.origin[0]) * self.direction[0] + (
            np.asarray(y) - self.origin[1]
        ) * self.direction[1]

    def param_range(self, box):
        x0, x1, y0, y1 = box
        corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
        s = self.param_of(corners[:, 0], corners[:, 1])
        return float(s.min()), float(s.max())


def horizontal_line(y, omega1_below=True, eps=1e-12) -> LineCurve:
    direction = (-1.0, 0.0) if omega1_below else (1.0, 0.0)
    return LineCurve((0.0, y), direction, eps=eps)


def _quad(f, a, b):
    from scipy import integrate

    return integrate.quad(f, a, b, limit=400, epsabs=1e-14, epsrel=1e-13)


def classify_point(curve: InterfaceCurve, p) -> Region:
    return curve.classify(p)


def edge_intersections(curve: InterfaceCurve, a, b, samples: int = 64) -> list[Intersection]:
    """Crossings and tangential touches of the curve with the segment ``ab``.

    Sign changes of the level function are bracketed on ``samples`` uniform
    subintervals and refined by Brent's method; local minima of ``|level|`` that come
    within ``eps`` of zero without a sign change are reported as tangencies.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    length = float(np.hypot(*ab))
    if length <= 0.0:
        raise ValueError("segment must have positive length")
    eps = curve.eps
    t = np.linspace(0.0, 1.0, samples + 1)
    pts = a + t[:, None] * ab
    phi = curve.level(pts[:, 0], pts[:, 1])
    neg = phi < -eps

    def g(tt):
        q = a + tt * ab
        return float(curve.level(q[0], q[1])) + eps

    xtol = max(eps / length, 1e-15)
    out = []
    for k in np.nonzero(neg[:-1] != neg[1:])[0]:
        try:
            tr = optimize.brentq(g, t[k], t[k + 1], xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
        except (RuntimeError, ValueError) as exc:
            raise NonConvergence(f"root bracketing failed on segment {a}->{b}") from exc
        q = a + tr * ab
        out.append(Intersection(float(curve.param_of(q[0], q[1])), q, float(tr), False))

    absphi = np.abs(phi)
    for k in range(samples + 1):
        lo, hi = max(k - 1, 0), min(k + 1, samples)
        if absphi[k] > absphi[lo] or absphi[k] > absphi[hi]:
            continue
        if np.any(neg[lo:hi + 1] != neg[k]):
            continue
        if absphi[k] <= eps:
            tr = t[k]
        else:
            if lo == k or hi == k:
                continue
            res = optimize.minimize_scalar(
                lambda tt: abs(g(tt) - eps), bounds=(t[lo], t[hi]), method="bounded",
                options={"xatol": 1e-14},
            )
            if res.fun > eps:
                continue
            tr = float(res.x)
        if any(abs(tr - o.t) * length <= 10 * eps for o in out):
            continue
        q = a + tr * ab
        out.append(Intersection(float(curve.param_of(q[0], q[1])), q, float(tr), True))
    out.sort(key=lambda o: o.t)
    return out


def curvature_at(curve: InterfaceCurve, s) -> float:
    return float(curve.curvature(s))


def max_curvature(curve: InterfaceCurve, samples: int = 4096) -> CurvatureBound:
    """Maximum of ``|curvature|`` by dense sampling plus bounded local refinement."""
    if not curve.closed:
        return CurvatureBound(float(np.max(np.abs(curve.curvature(np.zeros(1))))), 0.0, samples)
    s = np.linspace(0.0, curve.period, samples, endpoint=False)
    k = np.abs(curve.curvature(s))
    ds = curve.period / samples
    kmax = float(k.max())
    best_s, best = float(s[np.argmax(k)]), kmax
    peaks = np.nonzero((k >= np.roll(k, 1)) & (k >= np.roll(k, -1)) & (k >= 0.5 * kmax))[0]
    for i in peaks:
        res = optimize.minimize_scalar(
            lambda x: -abs(float(curve.curvature(x))),
            bounds=(s[i] - ds, s[i] + ds), method="bounded", options={"xatol": 1e-13},
        )
        if -res.fun > best:
            best, best_s = -float(res.fun), float(np.mod(res.x, curve.period))
    return CurvatureBound(best, best_s, samples)


def arc_quadrature_segment(curve: InterfaceCurve, s_lo, s_hi, order: int, panels: int = 1):
    """Gauss rule on the arc ``s_lo <= s <= s_hi``.

    Returns ``(points, weights, normals)``; weights are arc-length elements and the
    normals point out of the inner subdomain.
    """
    if not s_hi > s_lo:
        raise ValueError("need s_lo < s_hi")
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(s_lo, s_hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    s = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return curve.point(s), w * curve.speed(s), curve.normal(s)


def arc_panels(curve: InterfaceCurve, s_lo, s_hi, per_radian: float = 6.0) -> int:
    """Panel count that keeps the turning angle and oscillation per panel small."""
    span = s_hi - s_lo
    if isinstance(curve, PolarCurve):
        rate = max(1.0, curve.max_frequency)
        return max(1, int(np.ceil(span * rate * per_radian / 2.0)))
    return 1
