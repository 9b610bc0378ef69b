"""Lagrange spaces on the background grid and the macro-element merge operator."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import UnsupportedDegree
from .merging import MacroElement, MergedMesh

SUPPORTED_DEGREES = (1, 2, 3)


@lru_cache(maxsize=None)
def gll_nodes(p: int) -> np.ndarray:
    """Gauss-Lobatto nodes on [0, 1]."""
    if p not in SUPPORTED_DEGREES:
        raise UnsupportedDegree(f"polynomial degree {p} is not supported")
    if p == 1:
        return np.array([0.0, 1.0])
    if p == 2:
        return np.array([0.0, 0.5, 1.0])
    r = 1.0 / np.sqrt(5.0)
    return np.array([0.0, 0.5 * (1.0 - r), 0.5 * (1.0 + r), 1.0])


def lagrange_1d(p: int, t):
    """Values and derivatives of the 1D Lagrange basis on the GLL nodes, shape (m, p+1)."""
    nodes = gll_nodes(p)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    m = p + 1
    vals = np.ones((t.size, m))
    ders = np.zeros((t.size, m))
    for a in range(m):
        others = [b for b in range(m) if b != a]
        denom = np.prod([nodes[a] - nodes[b] for b in others])
        for b in others:
            vals[:, a] *= t - nodes[b]
        for c in others:
            term = np.ones(t.size)
            for b in others:
                if b != c:
                    term = term * (t - nodes[b])
            ders[:, a] += term
        vals[:, a] /= denom
        ders[:, a] /= denom
    return vals, ders


def tensor_basis(p: int, box, x, y):
    """Tensor Lagrange basis on ``box``: values (m, n) and gradients (m, n, 2).

    Local index ``b * (p + 1) + a`` pairs x-node ``a`` with y-node ``b``.
    """
    x0, x1, y0, y1 = box
    hx, hy = x1 - x0, y1 - y0
    vx, dx = lagrange_1d(p, (np.asarray(x, dtype=float) - x0) / hx)
    vy, dy = lagrange_1d(p, (np.asarray(y, dtype=float) - y0) / hy)
    m = p + 1
    val = (vy[:, :, None] * vx[:, None, :]).reshape(-1, m * m)
    gx = (vy[:, :, None] * dx[:, None, :]).reshape(-1, m * m) / hx
    gy = (dy[:, :, None] * vx[:, None, :]).reshape(-1, m * m) / hy
    return val, np.stack([gx, gy], axis=-1)


def local_nodes(p: int, box):
    """Physical coordinates of the (p+1)^2 tensor nodes of ``box`` in local order."""
    t = gll_nodes(p)
    x0, x1, y0, y1 = box
    X, Y = np.meshgrid(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t)
    return np.column_stack([X.ravel(), Y.ravel()])


@dataclass(frozen=True)
class DGFace:
    key: tuple  # grid edge key
    lo: int  # owner cell (lower index)
    hi: int
    normal: tuple  # from lo to hi


@dataclass
class DofMap:
    """Numbering of the unmerged space, the merged space and the map between them.

    ``cell_dofs[sub][k]`` lists the unmerged indices of the local basis of cell
    ``k`` for component ``sub`` (``-1`` for eliminated boundary nodes or absent
    cells). ``B`` maps merged coefficients to unmerged ones.
    """

    p: int
    merged: MergedMesh
    cell_dofs: dict
    n_unmerged: int
    n_merged: int
    offsets: dict  # sub -> (unmerged start, merged start)
    macro_dofs: dict  # sub -> list of arrays of merged indices per macro (-1 eliminated)
    B: sp.csr_matrix = None
    faces: dict = None

    @property
    def nloc(self):
        return (self.p + 1) ** 2

    @property
    def grid(self):
        return self.merged.grid


def _on_boundary(I, J, last):
    return (I == 0) | (J == 0) | (I == last) | (J == last)


def build_spaces(merged: MergedMesh, p: int) -> DofMap:
    if p not in SUPPORTED_DEGREES:
        raise UnsupportedDegree(f"polynomial degree {p} is not supported")
    grid = merged.grid
    n = grid.n
    m = p + 1
    nloc = m * m
    last = n * p
    la = np.tile(np.arange(m), m)
    lb = np.repeat(np.arange(m), m)

    cell_dofs = {}
    macro_dofs = {}
    offsets = {}
    rows, cols, vals = [], [], []
    nu = nm = 0
    for sub in (1, 2):
        offsets[sub] = (nu, nm)
        active = merged.active(sub)
        owner = merged.owner[sub]
        dofs = -np.ones((grid.ncells, nloc), dtype=np.int64)
        # continuous nodes of unmerged cells, numbered by lattice position
        plain = np.array([k for k in range(grid.ncells) if active[k] and k not in owner], dtype=np.int64)
        pi, pj = plain % n, plain // n
        I = pi[:, None] * p + la[None, :]
        J = pj[:, None] * p + lb[None, :]
        keep = ~_on_boundary(I, J, last)
        lid = J * (last + 1) + I
        uniq, inv = np.unique(lid[keep], return_inverse=True)
        ncont = len(uniq)
        block = -np.ones(I.shape, dtype=np.int64)
        block[keep] = nu + inv
        dofs[plain] = block
        cont_ids = np.arange(ncont)
        rows.append(nu + cont_ids)
        cols.append(nm + cont_ids)
        vals.append(np.ones(ncont))

        # per-cell nodes of macro constituents, tied to the macro polynomial through B
        nxt_u = nu + ncont
        nxt_m = nm + ncont
        mlist = []
        for macro in merged.macros[sub]:
            mnodes = local_nodes(p, macro.box)
            # macro nodes on the outer boundary are fixed to zero
            on_bd = (
                np.isclose(mnodes[:, 0], grid.x0) | np.isclose(mnodes[:, 0], grid.x1)
                | np.isclose(mnodes[:, 1], grid.y0) | np.isclose(mnodes[:, 1], grid.y1)
            )
            mids = -np.ones(nloc, dtype=np.int64)
            mids[~on_bd] = nxt_m + np.arange(int(np.sum(~on_bd)))
            nxt_m += int(np.sum(~on_bd))
            mlist.append(mids)
            for k in macro.cells:
                if not active[k]:
                    continue
                ids = nxt_u + np.arange(nloc)
                nxt_u += nloc
                dofs[k] = ids
                val, _ = tensor_basis(p, macro.box, *local_nodes(p, grid.box(k)).T)
                val[np.abs(val) < 1e-15] = 0.0
                r, c = np.nonzero(val[:, ~on_bd])
                rows.append(ids[r])
                cols.append(mids[~on_bd][c])
                vals.append(val[:, ~on_bd][r, c])
        cell_dofs[sub] = dofs
        macro_dofs[sub] = mlist
        nu, nm = nxt_u, nxt_m

    B = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nu, nm)
    )
    dm = DofMap(p, merged, cell_dofs, nu, nm, offsets, macro_dofs, B)
    dm.faces = {sub: enumerate_dg_faces(merged, sub) for sub in (1, 2)}
    return dm


def build_merge_operator(dofmap: DofMap) -> sp.csr_matrix:
    return dofmap.B


def enumerate_dg_faces(merged: MergedMesh, sub: int) -> list[DGFace]:
    """Faces on the boundary of a macro element that carry part of subdomain ``sub``.

    Faces inside a macro, faces between two unmerged cells and faces whose
    intersection with the subdomain has zero length are excluded.
    """
    grid = merged.grid
    geom = merged.geom
    active = merged.active(sub)
    owner = merged.owner[sub]
    out = []
    for lo, hi, orient in grid.interior_faces():
        mlo, mhi = owner.get(lo), owner.get(hi)
        if mlo is None and mhi is None:
            continue
        if mlo is not None and mlo == mhi:
            continue
        if not (active[lo] and active[hi]):
            continue
        side = 1 if orient == "v" else 2
        key, _ = grid.cell_edge(lo, side)
        if geom.edge_cut(key).side_length(sub) <= 0.0:
            continue
        out.append(DGFace(key, lo, hi, (1.0, 0.0) if orient == "v" else (0.0, 1.0)))
    return out


def macro_polynomial_rows(p: int, macro: MacroElement, points):
    """Lagrange basis of the macro's bounding rectangle evaluated at ``points``."""
    return tensor_basis(p, macro.box, points[:, 0], points[:, 1])
