"""Structure-preserving simulation of the 1D semilinear stochastic wave
equation with additive Q-Wiener noise.

The library couples a Galerkin space discretization (sine spectral basis
or piecewise-linear finite elements on (0, 1) with Dirichlet boundary)
with an exponential time integrator whose implicit stage uses the
averaged vector field of the cubic drift.  The step conserves the energy
functional along every path up to the injected noise, which makes the
expected energy grow exactly linearly, and the Monte Carlo harness
measures strong convergence rates in time and space against fine
reference runs with common random numbers.
"""

__version__ = "0.1.0"

from .backends import Embedding, FemBackend, SpectralBackend, make_backend
from .fem import FemOperators, Mesh1D, assemble, decompose
from .harness import (
    ConfigError,
    DegenerateStudyError,
    ExperimentConfig,
    RateReport,
    TraceReport,
    rate_fit,
    spatial_study,
    strong_error,
    temporal_study,
    trace_study,
)
from .noise import NoiseModel, SeedPlan, coarsen_time, hs_norm_check, restrict_modes, sample_increments
from .nonlinearity import CubicDrift, potential_integral
from .spectral import SpectralBasis
from .stepper import (
    NonConvergenceError,
    SolverConfig,
    State,
    StepOperators,
    energy,
    hamiltonian_residual,
    step,
    trajectory,
)

__all__ = [
    "__version__",
    "SpectralBasis",
    "Mesh1D",
    "FemOperators",
    "assemble",
    "decompose",
    "CubicDrift",
    "potential_integral",
    "NoiseModel",
    "SeedPlan",
    "sample_increments",
    "coarsen_time",
    "restrict_modes",
    "hs_norm_check",
    "SpectralBackend",
    "FemBackend",
    "Embedding",
    "make_backend",
    "State",
    "StepOperators",
    "SolverConfig",
    "NonConvergenceError",
    "step",
    "energy",
    "hamiltonian_residual",
    "trajectory",
    "ExperimentConfig",
    "RateReport",
    "TraceReport",
    "ConfigError",
    "DegenerateStudyError",
    "strong_error",
    "rate_fit",
    "temporal_study",
    "spatial_study",
    "trace_study",
]
