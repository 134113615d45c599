"""Fractional heat semigroups e^{-t L^alpha} on metric measure spaces:
subordinated kernels, space-time estimates, L^p capacities, trace
inequalities and dyadic potentials."""
from .exceptions import (AccuracyError, InfeasibleError, InputError, NonConvergenceError,
                         PreconditionError)
from .space import (HeatKernelModel, MetricMeasureSpace, QuadratureGrid, build_grid, euclidean,
                    heisenberg_h1, weighted_euclidean)
from .subordinator import SubordinatorDensity
from .frackernel import DiscreteMeasure, FracHeatOperator, FracHeatSemigroup, SpaceTimeField
from .capacity import CapacityInstance, LpCapacity, capacity, kappa_table
from .dyadic import build_christ_tree, wolff_potential_continuous, parabolic_maximal

__version__ = "0.1.0"

__all__ = [
    "AccuracyError", "InfeasibleError", "InputError", "NonConvergenceError",
    "PreconditionError", "HeatKernelModel", "MetricMeasureSpace", "QuadratureGrid",
    "build_grid", "euclidean", "heisenberg_h1", "weighted_euclidean", "SubordinatorDensity",
    "DiscreteMeasure", "FracHeatOperator", "FracHeatSemigroup", "SpaceTimeField",
    "CapacityInstance", "LpCapacity", "capacity", "kappa_table", "build_christ_tree",
    "wolff_potential_continuous", "parabolic_maximal",
]
