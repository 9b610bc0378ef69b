"""Interface curves and manufactured solutions for the built-in test cases."""

from __future__ import annotations

import numpy as np

from .assembly import ExactSolution, ProblemData
from .errors import UnknownExample
from .geometry import InterfaceCurve, PolarCurve, circle, horizontal_line

EXAMPLES = ("flower", "circle", "straight", "none", "patch")

PI = np.pi


def flower(center=(0.5, 0.5), r0=0.25, amp=1.0 / 14.0, petals=5, phase=0.0) -> PolarCurve:
    return PolarCurve(center, r0, ((amp, petals, phase),))


def make_curve(example: str, offset=(0.0, 0.0), **kw) -> InterfaceCurve:
    ox, oy = offset
    if example in ("flower", "patch"):
        return flower(center=(kw.get("cx", 0.5) + ox, kw.get("cy", 0.5) + oy),
                      r0=kw.get("r0", 0.25), amp=kw.get("amp", 1.0 / 14.0),
                      petals=kw.get("petals", 5))
    if example == "circle":
        return circle((kw.get("cx", 0.5) + ox, kw.get("cy", 0.5) + oy), kw.get("radius", 0.3))
    if example == "straight":
        return horizontal_line(kw.get("y", 0.4321) + oy)
    if example == "none":
        # a tiny circle far outside the domain: everything belongs to the outer subdomain
        return circle((10.0, 10.0), 0.1)
    raise UnknownExample(example)


def _sinsin(x, y):
    return np.sin(PI * x) * np.sin(PI * y)


def _grad_sinsin(x, y):
    return np.stack([PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y)], axis=-1)


def _from_exact(a1, a2, u1, g1, u2, g2, f1, f2, name):
    def g_D(x, y):
        return u1(x, y) - u2(x, y)

    def g_N(x, y, nx, ny):
        d1 = g1(x, y)
        d2 = g2(x, y)
        return a1 * (d1[..., 0] * nx + d1[..., 1] * ny) - a2 * (d2[..., 0] * nx + d2[..., 1] * ny)

    return ProblemData(a1, a2, f1, f2, g_D, g_N, ExactSolution(u1, u2, g1, g2), name)


def manufactured(example: str, alpha1: float = 1000.0, alpha2: float = 1.0) -> ProblemData:
    """Right-hand side, interface data and exact solution for a built-in example."""
    a1, a2 = float(alpha1), float(alpha2)
    if example in ("flower", "circle"):
        def u1(x, y):
            return np.exp(x * y) / a1

        def g1(x, y):
            e = np.exp(x * y) / a1
            return np.stack([y * e, x * e], axis=-1)

        def f1(x, y):
            return -(x * x + y * y) * np.exp(x * y)

        def u2(x, y):
            return _sinsin(x, y) / a2

        def g2(x, y):
            return _grad_sinsin(x, y) / a2

        def f2(x, y):
            return 2.0 * PI * PI * _sinsin(x, y)

        return _from_exact(a1, a2, u1, g1, u2, g2, f1, f2, example)

    if example == "straight":
        def u1(x, y):
            return _sinsin(x, y) / a1

        def g1(x, y):
            return _grad_sinsin(x, y) / a1

        def f1(x, y):
            return 2.0 * PI * PI * _sinsin(x, y)

        def u2(x, y):
            return np.sin(PI * x) * np.sin(2 * PI * y) / a2

        def g2(x, y):
            return np.stack([PI * np.cos(PI * x) * np.sin(2 * PI * y),
                             2 * PI * np.sin(PI * x) * np.cos(2 * PI * y)], axis=-1) / a2

        def f2(x, y):
            return 5.0 * PI * PI * np.sin(PI * x) * np.sin(2 * PI * y)

        return _from_exact(a1, a2, u1, g1, u2, g2, f1, f2, example)

    if example == "none":
        def u(x, y):
            return _sinsin(x, y) / a2

        def g(x, y):
            return _grad_sinsin(x, y) / a2

        def f(x, y):
            return 2.0 * PI * PI * _sinsin(x, y)

        return _from_exact(a1, a2, u, g, u, g, f, f, example)

    if example == "patch":
        # a single quadratic across a flower interface with matched coefficients
        if a1 != a2:
            raise ValueError("the patch example needs alpha1 == alpha2")

        def u(x, y):
            return x * (1 - x) * y * (1 - y)

        def g(x, y):
            return np.stack([(1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)], axis=-1)

        def f(x, y):
            return 2.0 * a1 * (y * (1 - y) + x * (1 - x))

        def u_s(x, y):
            return u(x, y) / a1

        def g_s(x, y):
            return g(x, y) / a1

        def f_s(x, y):
            return f(x, y) / a1

        return _from_exact(a1, a2, u_s, g_s, u_s, g_s, f_s, f_s, example)

    raise UnknownExample(example)
