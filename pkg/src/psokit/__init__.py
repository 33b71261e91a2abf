"""Particle swarm optimisation: continuous, binary and rounded-discrete swarms,
constraint handling, a verification problem library and a berth scheduler."""
from .constraints import (Bisection, CutOff, Penalization, PenaltyConfig, BisectionConfig,
                          PreservingFeasibility, evaluate, make_handler, penalize, violations)
from .discrete import Binary, Continuous, DiscreteSet, round_to_domain
from .errors import ConfigurationError, InitializationError, InstanceError
from .problem import Problem, geq
from .problems import get_problem
from .swarm import (GLOBAL, PRESETS, Coefficients, Particle, RunResult, Swarm, SwarmConfig,
                    Topology, neighborhood_best, ring, run, step, update_position,
                    update_velocity)

__version__ = "0.1.0"
