"""Cartesian background grid, element classification and cut measures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import AssumptionIViolated, NonSquareDomain
from .geometry import (
    InterfaceCurve,
    PolarCurve,
    arc_panels,
    edge_intersections,
    max_curvature,
)

INTERFACE, INTERIOR1, INTERIOR2 = 0, 1, 2
SIDES = ("bottom", "right", "top", "left")
# relative area below which a cut piece is treated as empty
DEGENERATE = 1e-14


@dataclass(frozen=True)
class Grid:
    x0: float
    x1: float
    y0: float
    y1: float
    n: int

    @property
    def h(self) -> float:
        return (self.x1 - self.x0) / self.n

    @property
    def ncells(self) -> int:
        return self.n * self.n

    @property
    def domain(self):
        return (self.x0, self.x1, self.y0, self.y1)

    def index(self, i, j):
        return j * self.n + i

    def ij(self, k):
        return k % self.n, k // self.n

    def xv(self, i):
        return self.x0 + i * self.h

    def yv(self, j):
        return self.y0 + j * self.h

    def box(self, k):
        i, j = self.ij(k)
        return (self.xv(i), self.xv(i + 1), self.yv(j), self.yv(j + 1))

    def neighbor(self, k, side):
        """Edge neighbour across ``side`` (0 bottom, 1 right, 2 top, 3 left), or None."""
        i, j = self.ij(k)
        di, dj = ((0, -1), (1, 0), (0, 1), (-1, 0))[side]
        i, j = i + di, j + dj
        if 0 <= i < self.n and 0 <= j < self.n:
            return self.index(i, j)
        return None

    def neighbor_side(self, k, other):
        """Side of ``k`` shared with cell ``other``, or None if they are not edge neighbours."""
        for side in range(4):
            if self.neighbor(k, side) == other:
                return side
        return None

    def cell_edge(self, k, side):
        """Key of the grid edge on ``side`` of cell ``k`` and whether it runs counterclockwise."""
        i, j = self.ij(k)
        return (
            (("h", i, j), True),
            (("v", i + 1, j), True),
            (("h", i, j + 1), False),
            (("v", i, j), False),
        )[side]

    def edge_points(self, key):
        kind, i, j = key
        a = np.array([self.xv(i), self.yv(j)])
        b = np.array([self.xv(i + 1), self.yv(j)]) if kind == "h" else np.array([self.xv(i), self.yv(j + 1)])
        return a, b

    def interior_faces(self):
        """Interior faces as ``(lower cell, upper cell, 'v'|'h')`` in lexicographic order."""
        out = []
        for k in range(self.ncells):
            i, j = self.ij(k)
            if i + 1 < self.n:
                out.append((k, k + 1, "v"))
            if j + 1 < self.n:
                out.append((k, k + self.n, "h"))
        return out

    def locate(self, x, y):
        i = min(max(int(np.floor((x - self.x0) / self.h)), 0), self.n - 1)
        j = min(max(int(np.floor((y - self.y0) / self.h)), 0), self.n - 1)
        return self.index(i, j)


def build_grid(domain=(0.0, 1.0, 0.0, 1.0), n: int = 16) -> Grid:
    x0, x1, y0, y1 = (float(v) for v in domain)
    if n < 2:
        raise ValueError("need at least two cells per axis")
    if x1 <= x0 or y1 <= y0 or not np.isclose(x1 - x0, y1 - y0, rtol=1e-14, atol=0.0):
        raise NonSquareDomain(f"domain {domain} is not a square")
    return Grid(x0, x1, y0, y1, int(n))


@dataclass
class EdgeCut:
    """Interface crossings on one grid edge, stored along its canonical direction."""

    a: np.ndarray
    b: np.ndarray
    crossings: list  # Intersection records with tangency == False
    tangencies: list
    pieces: list  # (t0, t1, side) with side -1 (inner) / +1 (outer)

    @property
    def length(self):
        return float(np.hypot(*(self.b - self.a)))

    def side_length(self, sub):
        target = -1 if sub == 1 else 1
        return self.length * sum(t1 - t0 for t0, t1, s in self.pieces if s == target)


@dataclass
class CutCellGeometry:
    index: int
    box: tuple
    counts: tuple  # crossings per side (bottom, right, top, left)
    cut_type: str  # "type1", "type2" or "other"
    cut_code: str
    area1: float = 0.0
    area2: float = 0.0
    arc_length: float = 0.0
    arcs: list = field(default_factory=list)
    edge_len: np.ndarray = None  # (4, 2) length of each side inside each subdomain
    assumption_ok: bool = True

    def area(self, sub):
        return self.area1 if sub == 1 else self.area2


class MeshGeometry:
    """Classification of every background cell against the interface.

    ``tags[k]`` is ``INTERIOR1``, ``INTERIOR2`` or ``INTERFACE``; ``areas[k, i-1]``
    is ``|K ∩ Ω_i|``. Interface cells carry a :class:`CutCellGeometry` in ``cells``.
    """

    def __init__(self, grid: Grid, curve: InterfaceCurve):
        self.grid = grid
        self.curve = curve
        self.tags = np.zeros(grid.ncells, dtype=int)
        self.areas = np.zeros((grid.ncells, 2))
        self.cells: dict[int, CutCellGeometry] = {}
        self.flagged: list[tuple[int, str]] = []
        self._edges: dict = {}

    def edge_cut(self, key) -> EdgeCut:
        ec = self._edges.get(key)
        if ec is None:
            a, b = self.grid.edge_points(key)
            hits = edge_intersections(self.curve, a, b)
            cross = [o for o in hits if not o.tangency]
            tang = [o for o in hits if o.tangency]
            ts = [0.0] + [o.t for o in cross] + [1.0]
            pieces = []
            for t0, t1 in zip(ts[:-1], ts[1:]):
                if t1 - t0 <= 0.0:
                    continue
                m = a + 0.5 * (t0 + t1) * (b - a)
                pieces.append((t0, t1, int(self.curve.side(m[0], m[1]))))
            ec = EdgeCut(a, b, cross, tang, pieces)
            self._edges[key] = ec
        return ec

    def in_subdomain(self, sub):
        """Cells of ``T_{h,i}``: nonempty intersection with subdomain ``sub``."""
        return self.areas[:, sub - 1] > DEGENERATE * self.grid.h ** 2

    def vertex_side(self, x, y):
        return int(self.curve.side(x, y))

    def interface_cells(self):
        return sorted(self.cells)


def _curve_samples(curve: InterfaceCurve, grid: Grid, spacing: float):
    if curve.closed:
        s = np.linspace(0.0, curve.period, 4096, endpoint=False)
        p = curve.point(s)
        length = float(np.sum(np.linalg.norm(np.diff(np.vstack([p, p[:1]]), axis=0), axis=1)))
        m = max(4096, int(np.ceil(length / spacing)))
        s = np.linspace(0.0, curve.period, m, endpoint=False)
    else:
        lo, hi = curve.param_range(grid.domain)
        m = max(2, int(np.ceil((hi - lo) / spacing)) + 1)
        s = np.linspace(lo, hi, m)
    return s, curve.point(s)


def _cut_type(counts):
    c = list(counts)
    total = sum(c)
    doubles = [s for s in range(4) if c[s] == 2]
    singles = [s for s in range(4) if c[s] == 1]
    if total == 2 and len(doubles) == 1:
        return "type1", f"bump:{SIDES[doubles[0]]}"
    if total == 2 and len(singles) == 2:
        s0, s1 = singles
        if (s1 - s0) % 2 == 0:
            return "type1", f"opposite:{SIDES[s0]}-{SIDES[s1]}"
        corner = s0 if (s1 - s0) % 4 == 1 else s1
        return "type2", f"corner:{SIDES[corner]}-{SIDES[(corner + 1) % 4]}"
    if total == 4 and len(doubles) == 1 and len(singles) == 2:
        s = doubles[0]
        if set(singles) == {(s + 1) % 4, (s + 3) % 4}:
            return "type1", f"bump_sides:{SIDES[s]}"
    return "other", f"counts:{c}"


def assumption_one_ok(counts) -> bool:
    c = sorted(counts, reverse=True)
    return c[0] <= 2 and c[1] <= 1 and c[1] + c[2] + c[3] <= 2


def cell_arcs(curve: InterfaceCurve, box, params, tol):
    """Parameter intervals of the curve lying inside ``box`` given its boundary crossings."""
    x0, x1, y0, y1 = box
    if len(params) == 0:
        return []
    s = np.sort(np.asarray(params, dtype=float))
    uniq = [s[0]]
    for v in s[1:]:
        if v - uniq[-1] > tol:
            uniq.append(v)
    if curve.closed and len(uniq) > 1 and uniq[0] + curve.period - uniq[-1] <= tol:
        uniq.pop()
    if curve.closed:
        bounds = list(zip(uniq, uniq[1:] + [uniq[0] + curve.period]))
        if len(uniq) == 1:
            bounds = []
    else:
        bounds = list(zip(uniq[:-1], uniq[1:]))
    out = []
    slack = 1e-9 * (x1 - x0)
    for a, b in bounds:
        m = curve.point(0.5 * (a + b))
        if x0 - slack <= m[0] <= x1 + slack and y0 - slack <= m[1] <= y1 + slack:
            out.append((float(a), float(b)))
    return out


def _boundary_pieces(geom: MeshGeometry, k):
    """Straight boundary pieces of the cell, counterclockwise, tagged with their side."""
    grid = geom.grid
    out = []
    for side in range(4):
        key, ccw = grid.cell_edge(k, side)
        ec = geom.edge_cut(key)
        for t0, t1, s in ec.pieces:
            p = ec.a + t0 * (ec.b - ec.a)
            q = ec.a + t1 * (ec.b - ec.a)
            out.append((p, q, s) if ccw else (q, p, s))
    return out


def region_moments(geom: MeshGeometry, k, sub):
    """``(area, ∫x, ∫y)`` of ``K ∩ Ω_sub`` by Green's theorem on its boundary."""
    box = geom.grid.box(k)
    ox, oy = box[0], box[2]
    target = -1 if sub == 1 else 1
    area = mx = my = 0.0
    for p, q, s in _boundary_pieces(geom, k):
        if s != target:
            continue
        px, py, qx, qy = p[0] - ox, p[1] - oy, q[0] - ox, q[1] - oy
        area += 0.5 * (px + qx) * (qy - py)
        mx += (qy - py) * (px * px + px * qx + qx * qx) / 6.0
        my -= (qx - px) * (py * py + py * qy + qy * qy) / 6.0
    cell = geom.cells.get(k)
    if cell is not None:
        sign = 1.0 if sub == 1 else -1.0
        curve = geom.curve
        xg, wg = np.polynomial.legendre.leggauss(20)
        for a, b in cell.arcs:
            npan = arc_panels(curve, a, b)
            e = np.linspace(a, b, npan + 1)
            half = 0.5 * np.diff(e)
            s = (0.5 * (e[:-1] + e[1:])[:, None] + half[:, None] * xg).ravel()
            w = (half[:, None] * wg).ravel()
            pt, d = curve.point(s), curve.d1(s)
            x, y = pt[:, 0] - ox, pt[:, 1] - oy
            area += sign * np.sum(w * x * d[:, 1])
            mx += sign * np.sum(w * 0.5 * x * x * d[:, 1])
            my -= sign * np.sum(w * 0.5 * y * y * d[:, 0])
    return area, mx + ox * area, my + oy * area


def cut_measures(geom: MeshGeometry, k):
    """``(|K∩Ω1|, |K∩Ω2|, |Γ∩K|)`` for cell ``k``."""
    return float(geom.areas[k, 0]), float(geom.areas[k, 1]), (
        geom.cells[k].arc_length if k in geom.cells else 0.0
    )


def classify_elements(grid: Grid, curve: InterfaceCurve, strict: bool = True) -> MeshGeometry:
    """Tag every cell, compute cut topology and measures for interface cells.

    With ``strict`` an unsupported intersection pattern raises
    :class:`AssumptionIViolated`; otherwise it is recorded in ``geom.flagged``.
    """
    geom = MeshGeometry(grid, curve)
    h, n = grid.h, grid.n
    xc = grid.x0 + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(xc, xc + (grid.y0 - grid.x0))
    center_side = curve.side(X.ravel(), Y.ravel())
    geom.tags[:] = np.where(center_side < 0, INTERIOR1, INTERIOR2)

    s, pts = _curve_samples(curve, grid, h / 8.0)
    inside = (
        (pts[:, 0] > grid.x0) & (pts[:, 0] < grid.x1) & (pts[:, 1] > grid.y0) & (pts[:, 1] < grid.y1)
    )
    pts = pts[inside]
    fi = (pts[:, 0] - grid.x0) / h
    fj = (pts[:, 1] - grid.y0) / h
    ci = np.clip(np.floor(fi).astype(int), 0, n - 1)
    cj = np.clip(np.floor(fj).astype(int), 0, n - 1)
    strictly = (np.minimum(fi - ci, ci + 1 - fi) > 1e-9) & (np.minimum(fj - cj, cj + 1 - fj) > 1e-9)
    touched = set((cj * n + ci)[strictly].tolist())
    band = set()
    for k in set((cj * n + ci).tolist()):
        i, j = grid.ij(k)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if 0 <= i + di < n and 0 <= j + dj < n:
                    band.add(grid.index(i + di, j + dj))

    for k in sorted(band):
        counts = []
        params = []
        for side in range(4):
            key, _ = grid.cell_edge(k, side)
            ec = geom.edge_cut(key)
            counts.append(len(ec.crossings))
            params.extend(o.s for o in ec.crossings)
        box = grid.box(k)
        if sum(counts) == 0:
            corners = curve.side(np.array([box[0], box[1], box[1], box[0]]), np.array([box[2], box[2], box[3], box[3]]))
            geom.tags[k] = INTERIOR1 if corners[0] < 0 else INTERIOR2
            if k in touched:
                msg = "interface enters the element without crossing its edges"
                geom.flagged.append((k, msg))
                if strict:
                    raise AssumptionIViolated(k, msg)
            continue
        geom.tags[k] = INTERFACE
        cut_type, code = _cut_type(counts)
        cell = CutCellGeometry(k, box, tuple(counts), cut_type, code)
        cell.assumption_ok = assumption_one_ok(counts)
        if not cell.assumption_ok:
            msg = f"edge crossing counts {counts} exceed the supported pattern"
            geom.flagged.append((k, msg))
            if strict:
                raise AssumptionIViolated(k, msg)
        tol = 1e-12 * (1.0 if curve.closed else h)
        cell.arcs = cell_arcs(curve, box, params, tol)
        geom.cells[k] = cell
        el = np.zeros((4, 2))
        for side in range(4):
            ec = geom.edge_cut(grid.cell_edge(k, side)[0])
            el[side] = ec.side_length(1), ec.side_length(2)
        cell.edge_len = el

    for k, cell in geom.cells.items():
        a1 = region_moments(geom, k, 1)[0]
        a2 = region_moments(geom, k, 2)[0]
        cell.area1, cell.area2 = a1, a2
        xg, wg = np.polynomial.legendre.leggauss(20)
        length = 0.0
        for a, b in cell.arcs:
            half = 0.5 * (b - a)
            length += half * np.sum(wg * curve.speed(0.5 * (a + b) + half * xg))
        cell.arc_length = float(length)
    full = h * h
    geom.areas[:, 0] = np.where(geom.tags == INTERIOR1, full, 0.0)
    geom.areas[:, 1] = np.where(geom.tags == INTERIOR2, full, 0.0)
    for k, cell in geom.cells.items():
        geom.areas[k] = cell.area1, cell.area2
    return geom


# ---------------------------------------------------------------------------
# assumptions


def admissibility(t):
    """Merging admissibility function ``30 t (t + 2) / (100 t + 63)``."""
    t = np.asarray(t, dtype=float)
    return 30.0 * t * (t + 2.0) / (100.0 * t + 63.0)


def max_admissible_t(delta: float) -> float:
    """Largest ``t = (max curvature) * h`` satisfying the curvature criterion for threshold ``delta``."""
    c = 1.0 - 2.0 * delta
    b = 60.0 - 100.0 * c
    root = (-b + np.sqrt(b * b + 4.0 * 30.0 * 63.0 * c)) / 60.0
    return float(min(1.0, root))


@dataclass
class AssumptionReport:
    element_ok: dict
    ball_ok: np.ndarray
    ball_params: np.ndarray
    kappa: float
    h: float
    delta: float

    @property
    def t(self):
        return self.kappa * self.h

    @property
    def T(self):
        return float(admissibility(self.t))

    @property
    def threshold(self):
        return 1.0 - 2.0 * self.delta

    @property
    def one_ok(self):
        return all(self.element_ok.values())

    @property
    def two_ok(self):
        return bool(np.all(self.ball_ok))

    @property
    def three_ok(self):
        return self.t <= 1.0 and self.T <= self.threshold

    @property
    def verdict(self):
        return self.one_ok and self.two_ok and self.three_ok

    def to_dict(self):
        return {
            "assumption_I": {
                "pass": self.one_ok,
                "failed_elements": sorted(k for k, ok in self.element_ok.items() if not ok),
            },
            "assumption_II": {
                "pass": self.two_ok,
                "samples": int(self.ball_ok.size),
                "failed_params": [float(s) for s in self.ball_params[~self.ball_ok]],
            },
            "assumption_III": {
                "pass": self.three_ok,
                "kappa_m": self.kappa,
                "h": self.h,
                "t": self.t,
                "T": self.T,
                "threshold": self.threshold,
            },
            "verdict": self.verdict,
        }


def _ball_connectivity(curve, grid, params, radius, res):
    pts = curve.point(params)
    u = np.linspace(-radius, radius, res)
    du, dv = np.meshgrid(u, u, indexing="ij")
    disk = du * du + dv * dv <= radius * radius
    ok = np.ones(len(params), dtype=bool)
    structure = np.ones((3, 3), dtype=bool)
    for m, (px, py) in enumerate(pts):
        x = px + du
        y = py + dv
        mask = disk & (x >= grid.x0) & (x <= grid.x1) & (y >= grid.y0) & (y <= grid.y1)
        side = curve.side(x, y)
        for target in (-1, 1):
            _, ncomp = ndimage.label(mask & (side == target), structure=structure)
            if ncomp > 1:
                ok[m] = False
    return ok


def check_assumptions(grid: Grid, curve: InterfaceCurve, delta: float, geom: MeshGeometry = None,
                      samples: int = 1024, resolution: int = 64) -> AssumptionReport:
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    if geom is None:
        geom = classify_elements(grid, curve, strict=False)
    element_ok = {k: c.assumption_ok for k, c in geom.cells.items()}
    for k, _ in geom.flagged:
        element_ok[k] = False
    if curve.closed:
        params = np.linspace(0.0, curve.period, samples, endpoint=False)
    else:
        lo, hi = curve.param_range(grid.domain)
        params = np.linspace(lo, hi, samples)
        p = curve.point(params)
        keep = (p[:, 0] >= grid.x0) & (p[:, 0] <= grid.x1) & (p[:, 1] >= grid.y0) & (p[:, 1] <= grid.y1)
        params = params[keep]
    ball_ok = _ball_connectivity(curve, grid, params, 2.0 * np.sqrt(2.0) * grid.h, resolution)
    kappa = max_curvature(curve).kappa if isinstance(curve, PolarCurve) else 0.0
    return AssumptionReport(element_ok, ball_ok, params, kappa, grid.h, delta)
