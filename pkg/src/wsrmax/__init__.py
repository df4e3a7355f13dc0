"""
Weighted sum-rate maximization for multi-antenna downlink and interference
channels.

Submodules
----------
system_model
    Scenarios, channel generation and exact rate evaluation.
calculus
    Gradients, minorizers, curvature bounds and bound-gap checks.
lagrange
    Multiplier search for the power-constrained least-squares subproblem.
miso, mimo
    WMMSE, WSR-FP, WSR-MM, WSR-MM+ and WSR-FP+ step functions and drivers.
equivalence
    Numerical certificates for the identities linking the solvers.
bench, cli
    Experiment harness and command-line interface.
"""
from .calculus import EtaMode
from .lagrange import SearchOptions, find_mu
from .mimo import run_mimo
from .miso import SolverConfig, Trajectory, run
from .system_model import (GeometryConfig, MimoScenario, MisoScenario,
                           generate_mimo, generate_miso, wsr_mimo, wsr_miso)

__all__ = [
    "EtaMode", "SearchOptions", "find_mu", "run", "run_mimo", "SolverConfig",
    "Trajectory", "GeometryConfig", "MisoScenario", "MimoScenario",
    "generate_miso", "generate_mimo", "wsr_miso", "wsr_mimo",
]
__version__ = "0.1.0"
