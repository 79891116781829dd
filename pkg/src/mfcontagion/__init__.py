"""Particle and density simulation of mean-field contagion with common noise.

Absorbed mass feeds back on the survivors by shifting them towards the
absorbing boundary; the package simulates the finite particle system and a
quadrature scheme for its mean-field limit, and checks blow-up criteria.
"""

from .analysis import (
    BlowupProbEstimate,
    BlowupVerdict,
    Verdict,
    compare_losses,
    curb_time,
    estimate_blowup_probability,
    moment_criterion,
    static_verdict,
)
from .config import ExperimentConfig, parse_config
from .core import (
    Density,
    DomainError,
    Drift,
    GridMismatchError,
    InitialCondition,
    LossPath,
    LossTransform,
    ModelParams,
    SaturationError,
    SpaceGrid,
    TimeGrid,
    ValidationError,
    cdf,
    eval_transform,
    shift_density,
    total_mass,
)
from .experiments import ConvergenceReport, emit_heatmap, run_coupled
from .particles import (
    ParticleState,
    diffuse_step,
    empirical_density,
    resolve_cascade,
    run_particle_system,
)
from .solver import (
    SolverConfig,
    SolverOutput,
    contagion_fixed_point,
    heat_step,
    jump_size_minimal,
    run_density_solver,
)
from .stochastic import Forcing, NoisePath, derive_seed, forcing_value, generate_noise

__version__ = "0.1.0"
