"""Assembly of the unmerged interface-penalty system and its reduction to the merged space."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch
from .mesh import INTERFACE, MeshGeometry
from .quadrature import cut_volume_rule, face_rule, gauss01, interface_rule
from .space import DofMap, tensor_basis


@dataclass
class ExactSolution:
    u1: Callable
    u2: Callable
    grad1: Callable  # (x, y) -> (m, 2)
    grad2: Callable

    def value(self, sub, x, y):
        return (self.u1 if sub == 1 else self.u2)(x, y)

    def grad(self, sub, x, y):
        return (self.grad1 if sub == 1 else self.grad2)(x, y)


@dataclass
class ProblemData:
    alpha1: float
    alpha2: float
    f1: Callable
    f2: Callable
    g_D: Callable  # (x, y) -> jump of u across the interface
    g_N: Callable  # (x, y, nx, ny) -> jump of the flux
    exact: Optional[ExactSolution] = None
    name: str = "custom"

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0):
            raise ValueError("coefficients must be positive")

    def alpha(self, sub):
        return self.alpha1 if sub == 1 else self.alpha2

    def f(self, sub, x, y):
        return (self.f1 if sub == 1 else self.f2)(x, y)


@dataclass(frozen=True)
class PenaltyConfig:
    gamma: float = 100.0
    beta: float = 1.0
    weights: str = "harmonic"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.weights not in ("harmonic", "arithmetic"):
            raise ValueError(f"unknown weights mode {self.weights!r}")


def interface_weights(alpha1, alpha2, mode="harmonic"):
    """``(w1, w2, w1 * alpha1 + w2 * alpha2)`` for the interface averages."""
    if mode == "arithmetic":
        w1 = w2 = 0.5
    else:
        w1 = alpha2 / (alpha1 + alpha2)
        w2 = alpha1 / (alpha1 + alpha2)
    return w1, w2, w1 * alpha1 + w2 * alpha2


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, dofs_r, dofs_c, mat):
        r = np.repeat(dofs_r, len(dofs_c))
        c = np.tile(dofs_c, len(dofs_r))
        v = np.asarray(mat).ravel()
        keep = (r >= 0) & (c >= 0)
        self.rows.append(r[keep])
        self.cols.append(c[keep])
        self.vals.append(v[keep])

    def add_batch(self, dofs, mats):
        """Add dense blocks ``mats[e]`` for rows and columns ``dofs[e]``."""
        ne, nl = dofs.shape
        r = np.repeat(dofs, nl, axis=1).ravel()
        c = np.tile(dofs, (1, nl)).ravel()
        v = mats.reshape(ne, -1).ravel()
        keep = (r >= 0) & (c >= 0)
        self.rows.append(r[keep])
        self.cols.append(c[keep])
        self.vals.append(v[keep])

    def matrix(self, n):
        if not self.rows:
            return sp.csr_matrix((n, n))
        return sp.csr_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))), shape=(n, n)
        )


def _add_vec(F, dofs, vals):
    keep = dofs >= 0
    np.add.at(F, dofs[keep], np.asarray(vals)[keep])


def reference_stiffness(p):
    """Stiffness matrix of the tensor basis on a square; independent of its size in 2D."""
    t, w = gauss01(p + 1)
    X, Y = np.meshgrid(t, t)
    _, g = tensor_basis(p, (0.0, 1.0, 0.0, 1.0), X.ravel(), Y.ravel())
    W = np.outer(w, w).ravel()
    return np.einsum("q,qid,qjd->ij", W, g, g)


def assemble_unmerged(problem: ProblemData, penalty: PenaltyConfig, dofmap: DofMap, q: int = None):
    """Stiffness matrix and load vector in the unmerged numbering."""
    p = dofmap.p
    q = p + 3 if q is None else q
    merged = dofmap.merged
    geom: MeshGeometry = merged.geom
    grid = geom.grid
    h = grid.h
    n = dofmap.n_unmerged
    trip = _Triplets()
    F = np.zeros(n)

    kref = reference_stiffness(p)
    tq, wq = gauss01(q)
    TX, TY = np.meshgrid(tq, tq)
    phi_ref, _ = tensor_basis(p, (0.0, 1.0, 0.0, 1.0), TX.ravel(), TY.ravel())
    wref = np.outer(wq, wq).ravel()

    for sub in (1, 2):
        alpha = problem.alpha(sub)
        dofs = dofmap.cell_dofs[sub]
        active = merged.active(sub)
        full = np.nonzero(active & (geom.tags != INTERFACE))[0]
        if full.size:
            trip.add_batch(dofs[full], np.broadcast_to(alpha * kref, (full.size,) + kref.shape))
            ci, cj = full % grid.n, full // grid.n
            X = grid.x0 + (ci[:, None] + TX.ravel()[None, :]) * h
            Y = grid.y0 + (cj[:, None] + TY.ravel()[None, :]) * h
            fv = problem.f(sub, X, Y) * (wref * h * h)[None, :]
            loads = fv @ phi_ref
            d = dofs[full].ravel()
            keep = d >= 0
            np.add.at(F, d[keep], loads.ravel()[keep])
        for k in np.nonzero(active & (geom.tags == INTERFACE))[0]:
            rule = cut_volume_rule(geom, int(k), sub, q)
            phi, g = tensor_basis(p, grid.box(k), rule.points[:, 0], rule.points[:, 1])
            ke = alpha * np.einsum("q,qid,qjd->ij", rule.weights, g, g)
            trip.add(dofs[k], dofs[k], ke)
            _add_vec(F, dofs[k], phi.T @ (rule.weights * problem.f(sub, rule.points[:, 0], rule.points[:, 1])))

    # interface terms
    a1, a2 = problem.alpha1, problem.alpha2
    w1, w2, aw = interface_weights(a1, a2, penalty.weights)
    pen = penalty.gamma * aw / h
    beta = penalty.beta
    act1, act2 = merged.active(1), merged.active(2)
    for k in geom.interface_cells():
        if not (act1[k] and act2[k]):
            continue
        rule = interface_rule(geom, k, q)
        if not len(rule):
            continue
        x, y = rule.points[:, 0], rule.points[:, 1]
        nrm = rule.normals
        phi, g = tensor_basis(p, grid.box(k), x, y)
        dn = np.einsum("qid,qd->qi", g, nrm)
        J = np.hstack([phi, -phi])
        Fl = np.hstack([w1 * a1 * dn, w2 * a2 * dn])
        W = rule.weights
        ke = pen * (J.T * W) @ J - (J.T * W) @ Fl - beta * (Fl.T * W) @ J
        d = np.concatenate([dofmap.cell_dofs[1][k], dofmap.cell_dofs[2][k]])
        trip.add(d, d, ke)
        gd = problem.g_D(x, y)
        gn = problem.g_N(x, y, nrm[:, 0], nrm[:, 1])
        Vw = np.hstack([w2 * phi, w1 * phi])
        fe = J.T @ (W * pen * gd) + Vw.T @ (W * gn) - beta * Fl.T @ (W * gd)
        _add_vec(F, d, fe)

    # faces on the boundary of merged macros, arithmetic weights
    for sub in (1, 2):
        alpha = problem.alpha(sub)
        dofs = dofmap.cell_dofs[sub]
        pen_f = penalty.gamma * alpha / h
        for face in dofmap.faces[sub]:
            rule = face_rule(geom, face.key, sub, q)
            if not len(rule):
                continue
            x, y = rule.points[:, 0], rule.points[:, 1]
            nrm = np.asarray(face.normal)
            pl, gl = tensor_basis(p, grid.box(face.lo), x, y)
            ph, gh = tensor_basis(p, grid.box(face.hi), x, y)
            J = np.hstack([pl, -ph])
            Fl = 0.5 * alpha * np.hstack([gl @ nrm, gh @ nrm])
            W = rule.weights
            ke = pen_f * (J.T * W) @ J - (J.T * W) @ Fl - beta * (Fl.T * W) @ J
            d = np.concatenate([dofs[face.lo], dofs[face.hi]])
            trip.add(d, d, ke)
    return trip.matrix(n), F


@dataclass
class SparseSymmetricSystem:
    A: sp.csr_matrix
    F: np.ndarray

    @property
    def n(self):
        return self.A.shape[0]


def reduce_system(A_tilde, F_tilde, B) -> SparseSymmetricSystem:
    """Congruence reduction ``A = Bᵀ Ã B``, ``F = Bᵀ F̃``."""
    if A_tilde.shape[0] != A_tilde.shape[1] or A_tilde.shape[1] != B.shape[0] or F_tilde.shape[0] != B.shape[0]:
        raise DimensionMismatch(f"Ã {A_tilde.shape}, F̃ {F_tilde.shape}, B {B.shape}")
    Bt = B.T.tocsr()
    A = (Bt @ A_tilde @ B).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return SparseSymmetricSystem(A, Bt @ F_tilde)


def export_matrix(A, path):
    """Write ``row col value`` lines with 17 significant digits."""
    coo = sp.coo_matrix(A)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
