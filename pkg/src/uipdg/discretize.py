"""End-to-end construction of the merged discrete system for one mesh."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .assembly import PenaltyConfig, ProblemData, SparseSymmetricSystem, assemble_unmerged, reduce_system
from .geometry import InterfaceCurve
from .merging import MergedMesh, run_merge, validate_merge, MergeValidation
from .mesh import Grid, MeshGeometry, build_grid, classify_elements
from .space import DofMap, build_spaces


@dataclass
class Discretization:
    grid: Grid
    curve: InterfaceCurve
    problem: ProblemData
    penalty: PenaltyConfig
    p: int
    delta: float
    geom: MeshGeometry
    merged: MergedMesh
    validation: MergeValidation
    dofmap: DofMap
    A_tilde: object
    F_tilde: object
    system: SparseSymmetricSystem
    timings: dict = field(default_factory=dict)

    @property
    def h(self):
        return self.grid.h

    @property
    def N(self):
        return self.system.n


def discretize(curve: InterfaceCurve, problem: ProblemData, n: int, p: int = 1,
               penalty: PenaltyConfig = PenaltyConfig(), delta: float = 0.25,
               domain=(0.0, 1.0, 0.0, 1.0), strict: bool = True, q: int = None) -> Discretization:
    """Classify, merge, number, assemble and reduce on an ``n x n`` grid."""
    t = {}
    t0 = time.perf_counter()
    grid = build_grid(domain, n)
    geom = classify_elements(grid, curve, strict=strict)
    t["geometry"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    merged = run_merge(geom, delta, strict=strict)
    validation = validate_merge(merged)
    t["merge"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    dofmap = build_spaces(merged, p)
    t["space"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    At, Ft = assemble_unmerged(problem, penalty, dofmap, q=q)
    system = reduce_system(At, Ft, dofmap.B)
    t["assembly"] = time.perf_counter() - t0
    return Discretization(grid, curve, problem, penalty, p, delta, geom, merged, validation,
                          dofmap, At, Ft, system, t)
