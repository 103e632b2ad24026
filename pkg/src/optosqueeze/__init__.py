"""Mechanical squeezing in a two-tone driven optomechanical cavity with an OPA.

Linearized covariance-matrix dynamics, stability checks, closed-form
adiabatic squeezing and parameter sweeps. All rates are in units of the
mechanical frequency.
"""

__version__ = "0.1.0"

from .analysis import (SqueezingReport, adiabatic_model, analytic_squeezing_db,
                       analytic_variance_p, analytic_variance_q, optimal_ratio_search,
                       squeezing_db, squeezing_report, wigner)
from .dynamics import (CovarianceMatrix, diffusion, drift_rwa, drift_time_dependent, evolve,
                       initial_covariance, steady_state_covariance)
from .errors import OptosqueezeError
from .model import (PhysicalParams, SystemParams, couplings, default_params,
                    normalize_params, resolve_physical, solve_steady_amplitudes)
from .stability import StabilityReport, eigen_stable, routh_hurwitz
from .sweep import SweepSpec, SweepTable, figure_preset, run_sweep

__all__ = [
    "CovarianceMatrix", "OptosqueezeError", "PhysicalParams", "SqueezingReport",
    "StabilityReport", "SweepSpec", "SweepTable", "SystemParams", "adiabatic_model",
    "analytic_squeezing_db", "analytic_variance_p", "analytic_variance_q", "couplings",
    "default_params", "diffusion", "drift_rwa", "drift_time_dependent", "eigen_stable",
    "evolve", "figure_preset", "initial_covariance", "normalize_params",
    "optimal_ratio_search", "resolve_physical", "routh_hurwitz", "run_sweep",
    "solve_steady_amplitudes", "squeezing_db", "squeezing_report",
    "steady_state_covariance", "wigner",
]
