"""Unfitted interface-penalty discontinuous Galerkin finite elements on Cartesian grids.

Small cut cells are merged with large neighbours into rectangular macro
elements; merging is applied algebraically to the assembled system.
"""

from .analysis import SolveConfig, compute_errors, estimate_condition, evaluate_solution, solve
from .assembly import PenaltyConfig, ProblemData, assemble_unmerged, reduce_system
from .discretize import Discretization, discretize
from .geometry import LineCurve, PolarCurve, circle, horizontal_line
from .merging import run_merge, validate_merge
from .mesh import build_grid, check_assumptions, classify_elements
from .problems import make_curve, manufactured
from .space import build_spaces

__version__ = "0.1.0"
