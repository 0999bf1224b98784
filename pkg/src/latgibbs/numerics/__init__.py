"""Quadrature, exact 1-D sampling, compactified suprema and counter-based RNG."""
from .density import (Density1D, EnvelopeError, NonConvergentError, QuadratureResult,
                      find_mode, integrate, invert_cdf, sample_logconcave, truncate)
from .maximize import DivergentSupError, MaxResult, maximize_1d, maximize_ratio
from .rho import cumulative_rho, cumulative_rho_many
from .rng import RngStream, keyed_uniform

__all__ = [
    "Density1D", "EnvelopeError", "NonConvergentError", "QuadratureResult", "find_mode",
    "integrate", "invert_cdf", "sample_logconcave", "truncate", "DivergentSupError",
    "MaxResult", "maximize_1d", "maximize_ratio", "cumulative_rho", "cumulative_rho_many",
    "RngStream", "keyed_uniform",
]
