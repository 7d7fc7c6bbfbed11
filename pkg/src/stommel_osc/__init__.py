"""Simulation and analysis of piecewise-smooth fast/slow box models of the
thermohaline circulation."""
from .analysis import (EquilibriumReport, RegimeReport, classify_corner_bifurcation, classify_regime,
                       critical_manifold_mu, equilibria_of_2d, equilibrium, fold_point, jacobian)
from .core import (DimensionalParams, ForcingSpec, ModelParams, ParameterError, PiecewiseVectorField,
                   Trajectory, evaluate, region_of)
from .cycles import (BifurcationDiagram, CycleReport, ExcursionStats, classify_cycle,
                     count_large_excursions, find_limit_cycle, forced_run, poincare_crossings,
                     sweep_lambda)
from .integrate import IntegratorConfig, dense_eval, integrate
from .models import (lin3_field, nondim_field, reduced_field, forced_field, stom2_field, stom4_field,
                     nondimensionalize, psi)

__version__ = "0.1.0"

__all__ = [
    "BifurcationDiagram", "CycleReport", "DimensionalParams", "EquilibriumReport", "ExcursionStats",
    "ForcingSpec", "IntegratorConfig", "ModelParams", "ParameterError", "PiecewiseVectorField",
    "RegimeReport", "Trajectory", "classify_corner_bifurcation", "classify_cycle", "classify_regime",
    "count_large_excursions", "critical_manifold_mu", "dense_eval", "equilibria_of_2d", "equilibrium",
    "evaluate", "find_limit_cycle", "fold_point", "forced_field", "forced_run", "integrate", "jacobian",
    "lin3_field", "nondim_field", "nondimensionalize", "poincare_crossings", "psi", "reduced_field",
    "region_of", "stom2_field", "stom4_field", "sweep_lambda",
]
