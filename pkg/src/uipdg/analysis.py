"""Linear solves, condition numbers, solution evaluation and error norms."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SparseSymmetricSystem
from .discretize import Discretization
from .errors import IndefiniteDetected, NoExactSolution, NotConverged, OutOfDomain
from .mesh import INTERFACE
from .quadrature import cut_volume_rule, gauss01
from .space import tensor_basis

DENSE_LIMIT = 5000


@dataclass(frozen=True)
class SolveConfig:
    method: str = "cg"  # "cg", "dense" or "direct"
    tol: float = 1e-12
    maxiter: int = None

    def __post_init__(self):
        if self.method not in ("cg", "dense", "direct"):
            raise ValueError(f"unknown solver {self.method!r}")
        if not 0.0 < self.tol < 1.0:
            raise ValueError("tolerance must lie in (0, 1)")


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float


def pcg(A, b, tol=1e-12, maxiter=None):
    """Jacobi-preconditioned conjugate gradients with a breakdown check.

    Raises :class:`IndefiniteDetected` when a search direction has nonpositive
    curvature and :class:`NotConverged` when the iteration budget runs out.
    """
    n = A.shape[0]
    maxiter = 20 * n + 100 if maxiter is None else maxiter
    d = A.diagonal()
    if np.any(d <= 0):
        raise IndefiniteDetected("nonpositive diagonal entry")
    minv = 1.0 / d
    x = np.zeros(n)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x, 0, 0.0
    z = minv * r
    pdir = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ pdir
        curv = pdir @ Ap
        if curv <= 0.0:
            raise IndefiniteDetected(f"nonpositive curvature at iteration {it}")
        step = rz / curv
        x += step * pdir
        r -= step * Ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, it, res
        z = minv * r
        rz_new = r @ z
        pdir = z + (rz_new / rz) * pdir
        rz = rz_new
    raise NotConverged(maxiter, res)


def solve(system: SparseSymmetricSystem, config: SolveConfig = SolveConfig()) -> SolveResult:
    A, F = system.A, system.F
    n = A.shape[0]
    if config.method == "dense":
        if n > DENSE_LIMIT:
            raise ValueError(f"dense solve refused for N = {n} > {DENSE_LIMIT}")
        x = sla.solve(A.toarray(), F, assume_a="sym")
        it = 0
    elif config.method == "direct":
        x = spla.splu(A.tocsc()).solve(F)
        it = 0
    else:
        x, it, _ = pcg(A, F, config.tol, config.maxiter)
    fn = np.linalg.norm(F)
    res = float(np.linalg.norm(A @ x - F) / fn) if fn > 0 else 0.0
    if config.method == "cg" and res > 10 * config.tol:
        # the recursive residual drifted from the true one
        raise NotConverged(it, res)
    return SolveResult(x, it, res)


@dataclass
class ConditionEstimate:
    lambda_max: float
    lambda_min: float

    @property
    def kappa(self):
        return self.lambda_max / self.lambda_min


def estimate_condition(A, tol=1e-8) -> ConditionEstimate:
    """Extreme eigenvalues of a symmetric positive definite matrix.

    The largest comes from Lanczos, the smallest from shift-invert Lanczos about
    zero, which factorizes ``A`` once.
    """
    n = A.shape[0]
    if n <= 64:
        ev = np.linalg.eigvalsh(A.toarray() if sp.issparse(A) else np.asarray(A))
        lo, hi = float(ev[0]), float(ev[-1])
    else:
        A = sp.csc_matrix(A)
        try:
            hi = float(spla.eigsh(A, k=1, which="LA", tol=tol, return_eigenvectors=False)[0])
            lo = float(spla.eigsh(A, k=1, sigma=0.0, which="LM", tol=tol, return_eigenvectors=False)[0])
        except spla.ArpackNoConvergence as exc:
            raise NotConverged(0, float("nan")) from exc
    if lo <= 0.0:
        raise IndefiniteDetected(f"smallest eigenvalue {lo:.3e} is not positive")
    return ConditionEstimate(hi, lo)


def expand(disc: Discretization, coeffs):
    """Coefficients in the unmerged numbering."""
    return disc.dofmap.B @ coeffs


def _local(disc, ut, sub, k):
    d = disc.dofmap.cell_dofs[sub][k]
    return np.where(d >= 0, ut[np.maximum(d, 0)], 0.0)


def evaluate_solution(disc: Discretization, coeffs, x, y, sub, expanded=None):
    """Value and gradient of component ``sub`` of the discrete solution at ``(x, y)``."""
    grid = disc.grid
    if not (grid.x0 <= x <= grid.x1 and grid.y0 <= y <= grid.y1):
        raise OutOfDomain(f"({x}, {y}) lies outside the domain")
    ut = expand(disc, coeffs) if expanded is None else expanded
    k = grid.locate(x, y)
    macro = disc.merged.macro_of(sub, k)
    if macro is not None and not disc.merged.active(sub)[k]:
        # footprint cell without own unknowns: evaluate the macro polynomial directly
        mids = disc.dofmap.macro_dofs[sub][macro.id]
        c = np.where(mids >= 0, coeffs[np.maximum(mids, 0)], 0.0)
        phi, g = tensor_basis(disc.p, macro.box, np.array([x]), np.array([y]))
    else:
        c = _local(disc, ut, sub, k)
        phi, g = tensor_basis(disc.p, grid.box(k), np.array([x]), np.array([y]))
    return float(phi[0] @ c), g[0].T @ c


@dataclass
class ErrorReport:
    h: float
    p: int
    alpha1: float
    alpha2: float
    N: int
    energy: float
    l2: float
    flux: float
    rel_energy: float
    rel_l2: float
    rel_flux: float
    cond: float = None
    iterations: int = None
    residual: float = None

    def to_dict(self):
        return asdict(self)


def compute_errors(disc: Discretization, coeffs, q: int = None, cond: float = None,
                   solve_result: SolveResult = None) -> ErrorReport:
    """Energy, L2 and flux errors against the exact solution, with relative versions."""
    exact = disc.problem.exact
    if exact is None:
        raise NoExactSolution(disc.problem.name)
    p = disc.p
    q = p + 3 if q is None else q
    grid, geom, merged = disc.grid, disc.geom, disc.merged
    h = grid.h
    ut = expand(disc, coeffs)
    tq, wq = gauss01(q)
    TX, TY = np.meshgrid(tq, tq)
    phi_ref, g_ref = tensor_basis(p, (0.0, 1.0, 0.0, 1.0), TX.ravel(), TY.ravel())
    wref = np.outer(wq, wq).ravel() * h * h
    acc = dict(e=0.0, l=0.0, f=0.0, E=0.0, L=0.0, Fx=0.0)
    for sub in (1, 2):
        alpha = disc.problem.alpha(sub)
        dofs = disc.dofmap.cell_dofs[sub]
        active = merged.active(sub)
        full = np.nonzero(active & (geom.tags != INTERFACE))[0]
        if full.size:
            c = np.where(dofs[full] >= 0, ut[np.maximum(dofs[full], 0)], 0.0)
            X = grid.x0 + ((full % grid.n)[:, None] + TX.ravel()[None, :]) * h
            Y = grid.y0 + ((full // grid.n)[:, None] + TY.ravel()[None, :]) * h
            uh = c @ phi_ref.T
            gh = np.einsum("ej,qjd->eqd", c, g_ref) / h
            u = exact.value(sub, X, Y)
            gu = exact.grad(sub, X, Y)
            _accumulate(acc, alpha, wref[None, :], u, gu, uh, gh)
        for k in np.nonzero(active & (geom.tags == INTERFACE))[0]:
            rule = cut_volume_rule(geom, int(k), sub, q)
            x, y = rule.points[:, 0], rule.points[:, 1]
            phi, g = tensor_basis(p, grid.box(k), x, y)
            c = _local(disc, ut, sub, k)
            _accumulate(acc, alpha, rule.weights, exact.value(sub, x, y), exact.grad(sub, x, y),
                        phi @ c, np.einsum("qjd,j->qd", g, c))
    energy, l2, flux = math.sqrt(acc["e"]), math.sqrt(acc["l"]), math.sqrt(acc["f"])
    return ErrorReport(
        h, p, disc.problem.alpha1, disc.problem.alpha2, disc.N, energy, l2, flux,
        energy / math.sqrt(acc["E"]), l2 / math.sqrt(acc["L"]), flux / math.sqrt(acc["Fx"]),
        cond,
        None if solve_result is None else solve_result.iterations,
        None if solve_result is None else solve_result.residual,
    )


def _accumulate(acc, alpha, w, u, gu, uh, gh):
    e = u - uh
    ge = gu - gh
    g2 = np.sum(ge * ge, axis=-1)
    gu2 = np.sum(gu * gu, axis=-1)
    acc["e"] += alpha * float(np.sum(w * g2))
    acc["f"] += alpha * alpha * float(np.sum(w * g2))
    acc["l"] += float(np.sum(w * e * e))
    acc["E"] += alpha * float(np.sum(w * gu2))
    acc["Fx"] += alpha * alpha * float(np.sum(w * gu2))
    acc["L"] += float(np.sum(w * u * u))


def observed_rates(hs, errs):
    """``log2``-style rates ``log(e_i/e_{i+1}) / log(h_i/h_{i+1})`` between consecutive levels."""
    out = [None]
    for i in range(1, len(hs)):
        out.append(math.log(errs[i - 1] / errs[i]) / math.log(hs[i - 1] / hs[i]))
    return out
