"""Density-to-density orbit transfer solved as a Schrodinger bridge on a lattice."""

from .bridge import BridgeError, BridgeSolution, EndpointDensities, hilbert_metric, run_recursion
from .config import ConfigError, RunConfig, load_config, loads_config
from .grid import SpaceTimeGrid, discrete_integral
from .potential import PotentialModel, potential_physical, potential_regularized, potential_scaled
from .rdsolve import ReactionDiffusionProblem, solve_backward, solve_forward
from .recover import VelocityField, build_velocity_field, recover_density
from .scaling import ScalingMap
from .simulate import SamplePathSet, propagate, sample_initial

__version__ = "0.1.0"

__all__ = [
    "BridgeError",
    "BridgeSolution",
    "ConfigError",
    "EndpointDensities",
    "PotentialModel",
    "ReactionDiffusionProblem",
    "RunConfig",
    "SamplePathSet",
    "ScalingMap",
    "SpaceTimeGrid",
    "VelocityField",
    "build_velocity_field",
    "discrete_integral",
    "hilbert_metric",
    "load_config",
    "loads_config",
    "potential_physical",
    "potential_regularized",
    "potential_scaled",
    "propagate",
    "recover_density",
    "run_recursion",
    "sample_initial",
    "solve_backward",
    "solve_forward",
]
