"""Named problem registry."""
from __future__ import annotations

from ..errors import ConfigurationError
from ..problem import Problem
from .benchmarks import BENCHMARKS, BenchmarkSpec
from .engineering import BEST_KNOWN, ENGINEERING_BUILDERS, EngineeringProblemSpec

__all__ = [
    "BENCHMARKS", "BEST_KNOWN", "BenchmarkSpec", "EngineeringProblemSpec",
    "PROBLEM_NAMES", "get_problem", "default_target",
]

PROBLEM_NAMES = sorted(BENCHMARKS) + sorted(ENGINEERING_BUILDERS)


def get_problem(name: str, *, dimension: int | None = None, formulation: str = "hu",
                discrete: bool = True) -> Problem:
    """Build a problem by name. Variant arguments are ignored where they do not apply."""
    if name in BENCHMARKS:
        return BENCHMARKS[name].problem(dimension)
    if name == "himmelblau":
        if formulation not in ("hu", "toscano"):
            raise ConfigurationError(f"unknown himmelblau formulation {formulation!r}")
        return ENGINEERING_BUILDERS[name](formulation)
    if name == "pressure_vessel":
        return ENGINEERING_BUILDERS[name](discrete)
    if name in ENGINEERING_BUILDERS:
        return ENGINEERING_BUILDERS[name]()
    raise ConfigurationError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")


def default_target(name: str) -> float | None:
    spec = BENCHMARKS.get(name)
    return spec.target if spec else None
