"""Small-cell detection and merging of cut cells into rectangular macro elements."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CardinalityViolation, NoLargeNeighbor, OverlapDetected
from .mesh import INTERFACE, MeshGeometry


@dataclass(frozen=True)
class SmallSet:
    subdomain: int
    cells: tuple
    delta: float

    def __contains__(self, k):
        return k in set(self.cells)

    def __len__(self):
        return len(self.cells)


def find_small(geom: MeshGeometry, delta: float):
    """Interface cells whose share of each subdomain is below ``delta * h**2``.

    Cells with a degenerate (numerically empty) share are not part of the
    subdomain's mesh and are therefore never small.
    """
    full = geom.grid.h ** 2
    present = [geom.in_subdomain(1), geom.in_subdomain(2)]
    out = []
    for sub in (1, 2):
        a = geom.areas[:, sub - 1]
        mask = (geom.tags == INTERFACE) & present[sub - 1] & (a < delta * full)
        out.append(SmallSet(sub, tuple(int(k) for k in np.nonzero(mask)[0]), float(delta)))
    return tuple(out)


def _rule_sides(cell):
    kind, _, rest = cell.cut_code.partition(":")
    names = ("bottom", "right", "top", "left")
    uncrossed = [s for s in range(4) if cell.counts[s] == 0]
    if kind == "bump":
        return [names.index(rest)]
    if kind == "opposite":
        return uncrossed
    if kind == "bump_sides":
        return [names.index(rest)] + uncrossed
    if kind == "corner":
        a, b = rest.split("-")
        return [names.index(a), names.index(b)]
    return list(range(4))


def select_neighbor(geom: MeshGeometry, k: int, sub: int, is_large, strict: bool = True) -> int:
    """Large edge neighbour that a small cell ``k`` merges with in subdomain ``sub``.

    The candidates follow the cut topology: across the twice-crossed edge, across
    an uncrossed edge lying in the subdomain, or for a corner cut across whichever
    of the two crossed edges carries the longer piece in the subdomain. Ties go to
    the smaller neighbour index.
    """
    grid = geom.grid
    cell = geom.cells[k]
    col = sub - 1

    def ranked(sides):
        cand = []
        for s in sides:
            nb = grid.neighbor(k, s)
            length = cell.edge_len[s, col]
            if nb is not None and length > 0.0:
                cand.append((-length, nb))
        cand.sort()
        return [nb for _, nb in cand]

    rule = ranked(_rule_sides(cell))
    if rule and is_large(rule[0]):
        return rule[0]
    if strict:
        raise NoLargeNeighbor(k, sub)
    for nb in rule + ranked(range(4)):
        if is_large(nb):
            return nb
    # last resort: a large diagonal neighbour through a corner lying in the subdomain
    i, j = grid.ij(k)
    x0, x1, y0, y1 = cell.box
    target = -1 if sub == 1 else 1
    best = None
    for di, dj, cx, cy in ((-1, -1, x0, y0), (1, -1, x1, y0), (1, 1, x1, y1), (-1, 1, x0, y1)):
        ii, jj = i + di, j + dj
        if not (0 <= ii < grid.n and 0 <= jj < grid.n):
            continue
        nb = grid.index(ii, jj)
        if geom.vertex_side(cx, cy) != target or not is_large(nb):
            continue
        key = (-geom.areas[nb, col], nb)
        if best is None or key < best:
            best = key
    if best is not None:
        return best[1]
    raise NoLargeNeighbor(k, sub)


@dataclass
class MacroElement:
    id: int
    subdomain: int
    cells: tuple
    rect: tuple  # cell index ranges (i0, i1, j0, j1), half open
    box: tuple  # (x0, x1, y0, y1)
    measure: float  # |M ∩ Ω_i|

    @property
    def area(self):
        return (self.box[1] - self.box[0]) * (self.box[3] - self.box[2])

    @property
    def fraction(self):
        return self.measure / self.area

    @property
    def diameter(self):
        return float(np.hypot(self.box[1] - self.box[0], self.box[3] - self.box[2]))

    def to_dict(self):
        return {
            "subdomain": self.subdomain,
            "cells": list(self.cells),
            "rectangle": list(self.box),
            "measure_fraction": self.fraction,
        }


@dataclass
class MergedMesh:
    geom: MeshGeometry
    delta: float
    small: tuple
    macros: dict  # sub -> list[MacroElement]
    owner: dict  # sub -> {cell: macro id}
    issues: list = field(default_factory=list)

    @property
    def grid(self):
        return self.geom.grid

    def macro_of(self, sub, k):
        m = self.owner[sub].get(k)
        return None if m is None else self.macros[sub][m]

    def active(self, sub):
        """Boolean mask of cells that carry subdomain ``sub`` unknowns."""
        return self.geom.in_subdomain(sub)


def _make_macro(geom, mid, sub, cells):
    grid = geom.grid
    ij = [grid.ij(k) for k in cells]
    i0 = min(i for i, _ in ij)
    i1 = max(i for i, _ in ij) + 1
    j0 = min(j for _, j in ij)
    j1 = max(j for _, j in ij) + 1
    rect_cells = tuple(grid.index(i, j) for j in range(j0, j1) for i in range(i0, i1))
    box = (grid.xv(i0), grid.xv(i1), grid.yv(j0), grid.yv(j1))
    measure = float(sum(geom.areas[c, sub - 1] for c in rect_cells))
    return MacroElement(mid, sub, rect_cells, (i0, i1, j0, j1), box, measure)


def run_merge(geom: MeshGeometry, delta: float, strict: bool = True) -> MergedMesh:
    """Merge every small cell with a large neighbour, subdomain by subdomain.

    A large cell chosen by one small cell forms a two-cell macro with it; a large
    cell chosen by two forms the smallest enclosing rectangle of all three, which
    absorbs any further cell inside it. More than two, or a rectangle reaching
    into another macro, raises in strict mode. Otherwise the event is recorded
    in ``issues`` and overlapping macros are fused into one rectangle.
    """
    small = find_small(geom, delta)
    grid = geom.grid
    macros, owner, issues = {}, {}, []
    for sset in small:
        sub = sset.subdomain
        small_cells = set(sset.cells)
        present = geom.in_subdomain(sub)

        def is_large(c):
            return bool(present[c]) and c not in small_cells

        targets: dict[int, list] = {}
        for k in sset.cells:
            try:
                nb = select_neighbor(geom, k, sub, is_large, strict=strict)
            except NoLargeNeighbor:
                if strict:
                    raise
                issues.append(("no_large_neighbor", sub, k))
                continue
            if grid.neighbor_side(k, nb) is None:
                issues.append(("diagonal_merge", sub, k))
            targets.setdefault(nb, []).append(k)

        own: dict[int, int] = {}
        lst: list[MacroElement] = []
        for kp in sorted(targets):
            group = targets[kp]
            if len(group) > 2:
                if strict:
                    raise CardinalityViolation(f"cell {kp} selected by {len(group)} small cells in subdomain {sub}")
                issues.append(("cardinality", sub, kp))
            macro = _make_macro(geom, len(lst), sub, [kp] + group)
            clash = [c for c in macro.cells if c in own]
            if clash and strict:
                raise OverlapDetected(f"macro around cell {kp} overlaps cells {clash} in subdomain {sub}")
            while clash:
                # absorb the overlapping macros into one enclosing rectangle
                issues.append(("overlap", sub, kp))
                absorbed = {own[c] for c in clash}
                cells = set(macro.cells)
                for mid in absorbed:
                    cells.update(lst[mid].cells)
                    lst[mid] = None
                for c in [c for c, m in own.items() if m in absorbed]:
                    del own[c]
                macro = _make_macro(geom, len(lst), sub, sorted(cells))
                clash = [c for c in macro.cells if c in own]
            for c in macro.cells:
                own[c] = macro.id
            lst.append(macro)
        # renumber after any absorption
        kept = [m for m in lst if m is not None]
        remap = {m.id: i for i, m in enumerate(kept)}
        for m in kept:
            m.id = remap[m.id]
        own = {c: remap[m] for c, m in own.items()}
        macros[sub] = kept
        owner[sub] = own
    return MergedMesh(geom, float(delta), small, macros, owner, issues)


@dataclass
class MergeValidation:
    overlaps: list
    too_large: list
    too_small: list
    too_many_cells: list
    not_rectangular: list
    uncovered: list

    @property
    def ok(self):
        return not (self.overlaps or self.too_large or self.too_small or self.too_many_cells
                    or self.not_rectangular or self.uncovered)

    def to_dict(self):
        return {name: [list(map(int, v)) for v in getattr(self, name)] for name in (
            "overlaps", "too_large", "too_small", "too_many_cells", "not_rectangular", "uncovered")} | {"ok": self.ok}


def validate_merge(merged: MergedMesh, delta: float = None) -> MergeValidation:
    """Check disjointness, size, volume fraction and coverage of all macros."""
    delta = merged.delta if delta is None else delta
    grid = merged.grid
    h = grid.h
    rep = MergeValidation([], [], [], [], [], [])
    for sub, lst in merged.macros.items():
        seen: dict[int, int] = {}
        for m in lst:
            for c in m.cells:
                if c in seen:
                    rep.overlaps.append((sub, seen[c], m.id))
                seen[c] = m.id
            if m.diameter > 2.0 * np.sqrt(2.0) * h * (1 + 1e-12):
                rep.too_large.append((sub, m.id))
            if m.measure < delta * m.area:
                rep.too_small.append((sub, m.id))
            if len(m.cells) > 4:
                rep.too_many_cells.append((sub, m.id))
            i0, i1, j0, j1 = m.rect
            if len(m.cells) != (i1 - i0) * (j1 - j0) or any(
                not (i0 <= grid.ij(c)[0] < i1 and j0 <= grid.ij(c)[1] < j1) for c in m.cells
            ):
                rep.not_rectangular.append((sub, m.id))
        for sset in merged.small:
            if sset.subdomain != sub:
                continue
            for k in sset.cells:
                if k not in seen:
                    rep.uncovered.append((sub, k))
    for sub, lst in merged.macros.items():
        owner = merged.owner[sub]
        for m in lst:
            if any(owner.get(c) != m.id for c in m.cells):
                rep.overlaps.append((sub, m.id, -1))
    return rep
