"""Desk-scale laboratory for ground-state positivity and blow-up rates."""

from .grid_potential import (ClassPReport, GeometryError, Grid, PotentialSpec,
                             SandwichReport, build_grid, check_class_P,
                             check_sandwich)
from .operators import DiscreteOperator, apply, assemble, dump_triplets, radial_reduce
from .scalar_solver import (Certificate, DeflationError, DeltaEstimate, PoleError,
                            ScalarProblem, ScalarSolution, SolveError,
                            SpectralSplit, certify, estimate_delta, in_x_space,
                            project, solve_scalar, sweep_scalar, x_norm)
from .sources import SourceSpec, gaussian_bump
from .spectrum import (Eigenpair, GroundState, NonConvergenceError, SpectrumError,
                       check_comparability, collar_mask, dense_oracle,
                       ground_state, lowest_k)
from .system_solver import (ConditionReport, CouplingMatrix, DegenerateMatrixError,
                            MatrixAnalysis, PrincipalPair, SweepAborted,
                            SweepRecord, SweepResult, SystemProblem,
                            SystemSolution, analyze, blowup_sweep,
                            check_theorem_conditions, make_schedule,
                            principal_pair, solve_direct_coupled, solve_distinct,
                            solve_double, solve_system)

__version__ = "0.1.0"
