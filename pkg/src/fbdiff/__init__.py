"""Forward-backward diffusion denoising for images corrupted by multiplicative Gamma noise."""
from .estimator import FBDiffusionDenoiser
from .experiment import ExperimentConfig, run_experiment
from .flux import (FluxParams, convexify, flux_q, potential_psi, q_star, psi_star,
                   radial_profile, scalar_flux_min_slope, verify_structure)
from .indicator import IndicatorParams, gray_indicator
from .noise import NoiseSpec, add_gamma_noise, mae, psnr
from .pgm import read_pgm, write_pgm
from .rothe import RotheConfig, fixed_point, minimize_slice, rothe_sweep
from .solver import SolverConfig, dependence_probe, run, step
from .synthetic import SyntheticSpec, make_synthetic

__version__ = "0.1.0"

__all__ = [
    "FBDiffusionDenoiser", "ExperimentConfig", "run_experiment", "FluxParams", "convexify",
    "flux_q", "potential_psi", "q_star", "psi_star", "radial_profile", "scalar_flux_min_slope",
    "verify_structure", "IndicatorParams", "gray_indicator", "NoiseSpec", "add_gamma_noise",
    "mae", "psnr", "read_pgm", "write_pgm", "RotheConfig", "fixed_point", "minimize_slice",
    "rothe_sweep", "SolverConfig", "dependence_probe", "run", "step", "SyntheticSpec",
    "make_synthetic",
]
