"""Variable domains and the rounding used by the discrete (rounded-trajectory) mode.

Particles always fly in continuous space. A discrete dimension is only snapped
to its admissible values when a position is evaluated or stored as a best.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class Continuous:
    pass


@dataclass(frozen=True)
class DiscreteSet:
    """A finite, sorted set of admissible values."""

    values: tuple

    def __init__(self, values: Sequence[float]):
        vals = tuple(sorted(float(v) for v in values))
        if not vals:
            raise ConfigurationError("discrete value set is empty")
        object.__setattr__(self, "values", vals)

    @classmethod
    def lattice(cls, step: float, first: int, last: int) -> "DiscreteSet":
        """Integer multiples ``step*k`` for ``k`` in ``[first, last]``."""
        return cls([step * k for k in range(first, last + 1)])


@dataclass(frozen=True)
class Binary:
    values: tuple = (0.0, 1.0)


VariableKind = Continuous | DiscreteSet | Binary


def snap_values(x: np.ndarray, values: Sequence[float]) -> np.ndarray:
    """Nearest admissible value for every entry of ``x``; ties go to the smaller value."""
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ConfigurationError("discrete value set is empty")
    x = np.asarray(x, dtype=float)
    # index of first value >= x
    hi = np.clip(np.searchsorted(vals, x, side="left"), 0, vals.size - 1)
    lo = np.clip(hi - 1, 0, vals.size - 1)
    take_hi = np.abs(vals[hi] - x) < np.abs(x - vals[lo])
    return np.where(take_hi, vals[hi], vals[lo])


def round_to_domain(x, variable_kinds: Sequence[VariableKind] | None) -> np.ndarray:
    """Snap the discrete dimensions of ``x`` (shape ``(..., n)``) to their value sets.

    Continuous dimensions pass through untouched. The function is idempotent.
    """
    x = np.array(x, dtype=float)
    if variable_kinds is None:
        return x
    if len(variable_kinds) != x.shape[-1]:
        raise ConfigurationError(
            f"{len(variable_kinds)} variable kinds for a {x.shape[-1]}-dimensional point"
        )
    for j, kind in enumerate(variable_kinds):
        if isinstance(kind, (DiscreteSet, Binary)):
            x[..., j] = snap_values(x[..., j], kind.values)
    return x


def is_discrete(variable_kinds: Sequence[VariableKind] | None) -> bool:
    return variable_kinds is not None and any(
        not isinstance(k, Continuous) for k in variable_kinds
    )
