"""Quadrature on full cells, cut sub-regions, interface arcs and partial faces."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateRegion
from .geometry import InterfaceCurve, arc_panels, arc_quadrature_segment, edge_intersections
from .mesh import DEGENERATE, INTERIOR1, MeshGeometry, cell_arcs


@dataclass
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray = None

    @property
    def total(self):
        return float(np.sum(self.weights))

    def __len__(self):
        return len(self.weights)

    def integrate(self, f):
        return float(np.sum(self.weights * f(self.points[:, 0], self.points[:, 1])))

    @staticmethod
    def empty(with_normals=False):
        return QuadRule(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 2)) if with_normals else None)

    @staticmethod
    def concat(rules):
        rules = [r for r in rules if len(r)]
        if not rules:
            return QuadRule.empty()
        normals = None
        if all(r.normals is not None for r in rules):
            normals = np.vstack([r.normals for r in rules])
        return QuadRule(np.vstack([r.points for r in rules]), np.concatenate([r.weights for r in rules]), normals)


@lru_cache(maxsize=None)
def gauss01(q: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_tensor(box, q: int) -> QuadRule:
    if q < 1:
        raise ValueError("order must be positive")
    x0, x1, y0, y1 = box
    t, w = gauss01(q)
    X, Y = np.meshgrid(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t)
    W = np.outer(w, w) * (x1 - x0) * (y1 - y0)
    return QuadRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel())


def gauss_segment(a, b, q: int, normal=None) -> QuadRule:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t, w = gauss01(q)
    pts = a + t[:, None] * (b - a)
    nrm = None if normal is None else np.tile(np.asarray(normal, dtype=float), (q, 1))
    return QuadRule(pts, w * float(np.hypot(*(b - a))), nrm)


# ---------------------------------------------------------------------------
# cut volumes


def _box_arcs(curve: InterfaceCurve, box):
    x0, x1, y0, y1 = box
    corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    params = []
    for c in range(4):
        hits = edge_intersections(curve, corners[c], corners[(c + 1) % 4], samples=16)
        params.extend(o.s for o in hits if not o.tangency)
    tol = 1e-12 * (1.0 if curve.closed else (x1 - x0))
    return cell_arcs(curve, box, params, tol)


def _graph_axis(curve, arcs, margin, max_turn):
    """Axis over which every arc is a well-behaved graph, or None."""
    for d in (0, 1):
        ok = True
        for a, b in arcs:
            s = np.linspace(a, b, 13)
            t = curve.tangent(s)
            if np.min(np.abs(t[:, d])) < margin:
                ok = False
                break
            ang = np.unwrap(np.arctan2(t[:, 1], t[:, 0]))
            if ang.max() - ang.min() > max_turn:
                ok = False
                break
        if ok:
            return d
    return None


def _solve_coord(curve, a, b, d, target):
    """Parameters ``s`` in ``[a, b]`` with ``point(s)[d] == target`` on a monotone arc."""
    target = np.asarray(target, dtype=float)
    pa, pb = curve.point(np.array([a, b]))[:, d]
    s = a + (b - a) * np.clip((target - pa) / (pb - pa), 0.0, 1.0)
    lo, hi = min(a, b), max(a, b)
    for _ in range(50):
        f = curve.point(s)[:, d] - target
        df = curve.d1(s)[:, d]
        step = f / df
        s = np.clip(s - step, lo, hi)
        if np.max(np.abs(step)) < 1e-15 * max(1.0, abs(hi)):
            break
    return s


def _slab_rule(curve, box, arcs, d, sub, q, splits=3):
    """Integrate over ``box ∩ Ω_sub`` by slabs along axis ``d`` bounded by graph arcs."""
    e = 1 - d
    lo_u, hi_u = (box[0], box[1]) if d == 0 else (box[2], box[3])
    lo_v, hi_v = (box[2], box[3]) if d == 0 else (box[0], box[1])
    width = hi_u - lo_u
    target = -1 if sub == 1 else 1
    ranges = []
    cuts = [lo_u, hi_u]
    for a, b in arcs:
        ua, ub = curve.point(np.array([a, b]))[:, d]
        ranges.append((min(ua, ub), max(ua, ub)))
        cuts.extend([min(max(ua, lo_u), hi_u), min(max(ub, lo_u), hi_u)])
    # composite panels along the slab axis: curved bounds are only piecewise polynomial-like
    cuts.extend(lo_u + width * np.arange(1, splits) / splits)
    cuts = np.unique(np.array(cuts))
    tg, wg = gauss01(q)
    pts, wts = [], []
    tol = 1e-12 * width
    for ua, ub in zip(cuts[:-1], cuts[1:]):
        if ub - ua <= tol:
            continue
        um = 0.5 * (ua + ub)
        active = [i for i, (ra, rb) in enumerate(ranges) if ra <= ua + tol and rb >= ub - tol]
        u_nodes = ua + (ub - ua) * tg
        # v-coordinates of each active arc at the slab midpoint and at the nodes
        vm, vn = [], []
        for i in active:
            a, b = arcs[i]
            s = _solve_coord(curve, a, b, d, np.concatenate([[um], u_nodes]))
            v = curve.point(s)[:, e]
            vm.append(v[0])
            vn.append(v[1:])
        order = np.argsort(vm)
        levels_m = [lo_v] + [vm[i] for i in order] + [hi_v]
        levels_n = [np.full(q, lo_v)] + [np.clip(vn[i], lo_v, hi_v) for i in order] + [np.full(q, hi_v)]
        for j in range(len(levels_m) - 1):
            va, vb = levels_m[j], levels_m[j + 1]
            if vb - va <= tol:
                continue
            mid_v = 0.5 * (va + vb)
            xy = (um, mid_v) if d == 0 else (mid_v, um)
            if int(curve.side(xy[0], xy[1])) != target:
                continue
            bot, top = levels_n[j], levels_n[j + 1]
            span = np.maximum(top - bot, 0.0)
            U = np.repeat(u_nodes, q)
            V = (bot[:, None] + span[:, None] * tg[None, :]).ravel()
            W = ((ub - ua) * wg[:, None] * span[:, None] * wg[None, :]).ravel()
            pts.append(np.column_stack([U, V] if d == 0 else [V, U]))
            wts.append(W)
    if not pts:
        return QuadRule.empty()
    return QuadRule(np.vstack(pts), np.concatenate(wts))


def _cut_rule(curve, box, arcs, sub, q, depth, margin, max_turn):
    if not arcs:
        xc, yc = 0.5 * (box[0] + box[1]), 0.5 * (box[2] + box[3])
        inside = int(curve.side(xc, yc)) == (-1 if sub == 1 else 1)
        return gauss_tensor(box, q) if inside else QuadRule.empty()
    d = _graph_axis(curve, arcs, margin, max_turn)
    if d is None and depth > 0:
        xm, ym = 0.5 * (box[0] + box[1]), 0.5 * (box[2] + box[3])
        subs = [(box[0], xm, box[2], ym), (xm, box[1], box[2], ym),
                (box[0], xm, ym, box[3]), (xm, box[1], ym, box[3])]
        return QuadRule.concat([
            _cut_rule(curve, b, _box_arcs(curve, b), sub, q, depth - 1, margin, max_turn) for b in subs
        ])
    if d is None:
        # last resort: the axis with the larger minimal tangent component
        score = []
        for dd in (0, 1):
            score.append(min(np.min(np.abs(curve.tangent(np.linspace(a, b, 13))[:, dd])) for a, b in arcs))
        d = int(np.argmax(score))
    return _slab_rule(curve, box, arcs, d, sub, q)


def cut_volume_rule(geom: MeshGeometry, k: int, sub: int, q: int, depth: int = 6,
                    margin: float = 0.4, max_turn: float = 0.6) -> QuadRule:
    """Positive-weight rule for ``K ∩ Ω_sub``.

    The cell is split recursively until every interface arc inside a box is a
    graph over one axis with a bounded turning angle; each box is then cut into
    slabs whose curved sides are mapped to a tensor Gauss rule.
    """
    box = geom.grid.box(k)
    cell = geom.cells.get(k)
    if cell is None:
        inside = geom.tags[k] == (INTERIOR1 if sub == 1 else 2)
        return gauss_tensor(box, q) if inside else QuadRule.empty()
    if cell.area(sub) < DEGENERATE * geom.grid.h ** 2:
        raise DegenerateRegion(f"cell {k} has no measurable part in subdomain {sub}")
    return _cut_rule(geom.curve, box, cell.arcs, sub, q, depth, margin, max_turn)


def interface_rule(geom: MeshGeometry, k: int, q: int) -> QuadRule:
    """Gauss rule on ``Γ ∩ K`` with normals pointing out of the inner subdomain."""
    cell = geom.cells.get(k)
    if cell is None:
        return QuadRule.empty(with_normals=True)
    rules = []
    for a, b in cell.arcs:
        pts, w, nrm = arc_quadrature_segment(geom.curve, a, b, q, panels=arc_panels(geom.curve, a, b))
        rules.append(QuadRule(pts, w, nrm))
    return QuadRule.concat(rules) if rules else QuadRule.empty(with_normals=True)


def face_rule(geom: MeshGeometry, key, sub: int, q: int) -> QuadRule:
    """Gauss rule on the part of grid edge ``key`` inside subdomain ``sub``.

    The normal is the unit vector from the lower-indexed to the higher-indexed
    adjacent cell, i.e. +x for vertical edges and +y for horizontal ones.
    """
    ec = geom.edge_cut(key)
    normal = (1.0, 0.0) if key[0] == "v" else (0.0, 1.0)
    target = -1 if sub == 1 else 1
    rules = []
    for t0, t1, s in ec.pieces:
        if s != target:
            continue
        a = ec.a + t0 * (ec.b - ec.a)
        b = ec.a + t1 * (ec.b - ec.a)
        rules.append(gauss_segment(a, b, q, normal))
    return QuadRule.concat(rules) if rules else QuadRule.empty(with_normals=True)
