"""Simulation and analysis of the four-dimensional uni-junction memristor model."""

from .analysis import eigenvalues_at, find_fixed_point, stability_sweep
from .chaos import (AttractorKind, MapStructure, classify_attractor, kaplan_yorke,
                    lyapunov_spectrum, map_structure, next_maxima_map)
from .fit import IVDataset, fit_g, load_iv_csv, r_squared
from .integrate import (IntegratorConfig, extract_maxima, integrate_trajectory,
                        simulate_driven_branch)
from .model import (PAPER_CIRCUIT, PAPER_G, PAPER_PARAMS, CircuitValues, GCoeffs,
                    MemristorDCCoeffs, ModelParams, State, derive_dimensionless, eval_g,
                    eval_g_prime, eval_memristor_dc, jacobian, vector_field)
from .sweep import bifurcation_sweep, diagram_summary

__version__ = "0.1.0"

__all__ = [
    "AttractorKind", "CircuitValues", "GCoeffs", "IVDataset", "IntegratorConfig",
    "MapStructure", "MemristorDCCoeffs", "ModelParams", "PAPER_CIRCUIT", "PAPER_G",
    "PAPER_PARAMS", "State", "bifurcation_sweep", "classify_attractor",
    "derive_dimensionless", "diagram_summary", "eigenvalues_at", "eval_g", "eval_g_prime",
    "eval_memristor_dc", "extract_maxima", "find_fixed_point", "fit_g",
    "integrate_trajectory", "jacobian", "kaplan_yorke", "load_iv_csv", "lyapunov_spectrum",
    "map_structure", "next_maxima_map", "r_squared", "simulate_driven_branch",
    "stability_sweep", "vector_field",
]
