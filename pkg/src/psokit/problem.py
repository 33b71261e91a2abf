"""Constrained minimisation problems as seen by the swarm.

Every callable in a :class:`Problem` receives points of shape ``(..., n)`` and
returns values of shape ``(...)``. Benchmark and engineering functions are
written that way so a whole swarm is evaluated in one call. Scalar-only
callables can be wrapped by passing ``vectorized=False``.

Inequality constraints follow the convention ``g(x) <= 0`` means feasible.
Use :func:`geq` to adapt a constraint written as ``g(x) >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .discrete import Continuous, VariableKind, is_discrete, round_to_domain
from .errors import ConfigurationError

ArrayFn = Callable[[np.ndarray], np.ndarray]


def geq(fn: ArrayFn) -> ArrayFn:
    """Turn a ``fn(x) >= 0`` constraint into the internal ``g(x) <= 0`` form."""

    def negated(x):
        return -fn(x)

    negated.__name__ = f"neg_{getattr(fn, '__name__', 'constraint')}"
    return negated


def _pointwise(fn: ArrayFn) -> ArrayFn:
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.float64(fn(x))
        flat = x.reshape(-1, x.shape[-1])
        out = np.array([fn(row) for row in flat], dtype=float)
        return out.reshape(x.shape[:-1])

    return wrapped


@dataclass
class Problem:
    """Minimise ``conflict(x)`` subject to inequality, equality and side constraints.

    ``lower``/``upper`` always define the initialisation box. When
    ``enforce_bounds`` is true they are also side constraints: they count
    towards feasibility and penalisation, and the cut-off handler clips to
    them. Unconstrained benchmarks set it to false.
    """

    name: str
    lower: np.ndarray
    upper: np.ndarray
    conflict: ArrayFn
    inequalities: list[ArrayFn] = field(default_factory=list)
    equalities: list[ArrayFn] = field(default_factory=list)
    variable_kinds: Sequence[VariableKind] | None = None
    enforce_bounds: bool = True
    equality_tolerance: float = 1e-6
    vectorized: bool = True

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ConfigurationError(f"{self.name}: bounds must be 1-D and equally long")
        if not np.all(self.lower < self.upper):
            raise ConfigurationError(f"{self.name}: every lower bound must be < upper bound")
        if self.variable_kinds is not None:
            self.variable_kinds = tuple(self.variable_kinds)
            if len(self.variable_kinds) != self.dimension:
                raise ConfigurationError(
                    f"{self.name}: {len(self.variable_kinds)} variable kinds for "
                    f"dimension {self.dimension}"
                )
            if all(isinstance(k, Continuous) for k in self.variable_kinds):
                self.variable_kinds = None
        if not self.vectorized:
            self.conflict = _pointwise(self.conflict)
            self.inequalities = [_pointwise(g) for g in self.inequalities]
            self.equalities = [_pointwise(h) for h in self.equalities]
            self.vectorized = True

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def discrete(self) -> bool:
        return is_discrete(self.variable_kinds)

    @property
    def constraint_count(self) -> int:
        """Number of entries in a violation vector (bounds included when enforced)."""
        n_bounds = 2 * self.dimension if self.enforce_bounds else 0
        return len(self.inequalities) + len(self.equalities) + n_bounds

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def snap(self, x) -> np.ndarray:
        return round_to_domain(x, self.variable_kinds)

    def check_dimension(self, x: np.ndarray) -> None:
        if x.shape[-1] != self.dimension:
            raise ConfigurationError(
                f"{self.name}: expected {self.dimension} coordinates, got {x.shape[-1]}"
            )
