"""Enhanced-diffusion simulator for passive scalars in anisotropic 2-D boxes.

Subpackages:
    domain    -- anisotropy parameters, periodic box, velocity fields
    fields    -- grid scalars: norms, gradients, projection, interpolation
    solver    -- semi-Lagrangian / Crank-Nicolson and upwind time stepping
    particles -- backward SDE ensembles and the Feynman-Kac estimator
    analysis  -- decay-rate fits, kappa sweeps, scaling-law regression
    cli       -- command dispatch, run manifests, CSV/SVG artifacts
"""

__version__ = "0.1.0"

from .domain import (AnisotropyParams, DomainBox, VelocityField,
                     divergence_residual, make_velocity, scaling_f, scaling_g)
from .fields import (ScalarField, fourier_mode, fourier_sum, grad_norm_sq,
                     l2_norm_sq, mean_zero_project, random_fourier_sum, sample)
from .solver import DecaySeries, SolverConfig, run, step
from .particles import (ParticleEnsemble, VarianceMap, feynman_kac,
                        make_ensemble, sde_step, variance_integral)
from .analysis import (DecayFit, ExponentFit, FdrResult, exponent_report,
                       exponent_report_csv, fdr_check, figure1_curve,
                       figure1_exponent, figure2_surface, fit_decay,
                       fit_power_law, sweep_and_fit, theoretical_exponent)
from .errors import (AnisodiffError, ConfigError, FitWindowError,
                     InstabilityError, InsufficientDecayError, SweepError)

__all__ = [
    "AnisotropyParams", "DomainBox", "VelocityField", "divergence_residual",
    "make_velocity", "scaling_f", "scaling_g",
    "ScalarField", "fourier_mode", "fourier_sum", "grad_norm_sq", "l2_norm_sq",
    "mean_zero_project", "random_fourier_sum", "sample",
    "DecaySeries", "SolverConfig", "run", "step",
    "ParticleEnsemble", "VarianceMap", "feynman_kac", "make_ensemble",
    "sde_step", "variance_integral",
    "DecayFit", "ExponentFit", "FdrResult", "exponent_report",
    "exponent_report_csv", "fdr_check", "figure1_curve", "figure1_exponent",
    "figure2_surface", "fit_decay", "fit_power_law", "sweep_and_fit",
    "theoretical_exponent",
    "AnisodiffError", "ConfigError", "FitWindowError", "InstabilityError",
    "InsufficientDecayError", "SweepError",
    "__version__",
]
