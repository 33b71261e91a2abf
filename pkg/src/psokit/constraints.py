"""Constraint handling: additive penalisation and three feasibility-keeping strategies.

A handler mediates two things during a step: which position a particle
actually moves to (``accept``) and which evaluated points may become a
personal or neighbourhood best (``eligible``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .problem import Problem


@dataclass(frozen=True)
class PenaltyConfig:
    """``lam`` may be a scalar or one coefficient per violation entry."""

    lam: float | tuple = 1e6
    alpha: float = 2.0

    def __post_init__(self):
        if np.any(np.asarray(self.lam, dtype=float) <= 0) or self.alpha <= 0:
            raise ConfigurationError("penalty coefficients and exponent must be > 0")


@dataclass(frozen=True)
class BisectionConfig:
    max_splits: int = 10

    def __post_init__(self):
        if self.max_splits < 1:
            raise ConfigurationError("max_splits must be >= 1")


@dataclass
class EvaluatedPoint:
    position: np.ndarray
    raw_conflict: float
    penalized_conflict: float
    feasible: bool
    violations: np.ndarray


@dataclass
class Evaluations:
    """Batch counterpart of :class:`EvaluatedPoint` (one row per point)."""

    points: np.ndarray
    raw: np.ndarray
    penalized: np.ndarray
    feasible: np.ndarray
    violations: np.ndarray

    def __getitem__(self, i) -> EvaluatedPoint:
        return EvaluatedPoint(
            self.points[i],
            float(self.raw[i]),
            float(self.penalized[i]),
            bool(self.feasible[i]),
            self.violations[i],
        )


def _finite_or_inf(values) -> np.ndarray:
    out = np.array(values, dtype=float)
    out[np.isnan(out)] = np.inf
    return out


def _column(values, lead):
    if values.shape != lead:
        values = np.broadcast_to(values, lead)
    return values[..., None]


def violations(problem: Problem, x) -> np.ndarray:
    """Violation of every constraint at ``x`` (shape ``(..., n)``), all entries ``>= 0``.

    Column order: inequalities, equalities, then (if enforced) the lower and
    upper side constraints of each dimension. Discrete dimensions are snapped
    before evaluation.
    """
    x = problem.snap(x)
    problem.check_dimension(x)
    lead = x.shape[:-1]
    cols = []
    with np.errstate(all="ignore"):
        for g in problem.inequalities:
            cols.append(_column(np.maximum(0.0, _finite_or_inf(g(x))), lead))
        for h in problem.equalities:
            cols.append(_column(np.abs(_finite_or_inf(h(x))), lead))
    if problem.enforce_bounds:
        cols.append(np.maximum(0.0, problem.lower - x))
        cols.append(np.maximum(0.0, x - problem.upper))
    if not cols:
        return np.zeros(lead + (0,))
    return np.concatenate(cols, axis=-1)


# kept under the operation's own name as well
violation = violations


def feasible_from_violations(problem: Problem, v: np.ndarray) -> np.ndarray:
    """Inequalities and bounds must be exactly satisfied, equalities within tolerance."""
    if v.shape[-1] == 0:
        return np.ones(v.shape[:-1], dtype=bool)
    n_ineq = len(problem.inequalities)
    n_eq = len(problem.equalities)
    tol = np.zeros(v.shape[-1])
    tol[n_ineq : n_ineq + n_eq] = problem.equality_tolerance
    return np.all(v <= tol, axis=-1)


def is_feasible(problem: Problem, x) -> np.ndarray:
    return feasible_from_violations(problem, violations(problem, x))


def penalize(raw_conflict, violations_, config: PenaltyConfig = PenaltyConfig()):
    """Additive penalty ``f + sum_j lam_j * v_j**alpha``; overflow gives ``inf``."""
    v = np.asarray(violations_, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        q = np.sum(np.asarray(config.lam, dtype=float) * v**config.alpha, axis=-1)
        out = _finite_or_inf(np.asarray(raw_conflict, dtype=float) + q)
    return out if out.ndim else float(out)


def _evaluate_batch(problem: Problem, x, penalty: PenaltyConfig | None) -> Evaluations:
    x = np.asarray(x, dtype=float)
    pts = problem.snap(x)
    v = violations(problem, pts)
    with np.errstate(all="ignore"):
        raw = _finite_or_inf(problem.conflict(pts))
    raw = np.broadcast_to(raw, pts.shape[:-1]).astype(float)
    feasible = feasible_from_violations(problem, v)
    if penalty is None:
        pen = raw.copy()
    else:
        # feasible points stay exactly unpenalised even with tolerated equality residuals
        pen = np.where(feasible, raw, penalize(raw, v, penalty))
    return Evaluations(pts, raw, np.asarray(pen, dtype=float), feasible, v)


def bisect(problem: Problem, old, candidate, max_splits: int = 10):
    """Halve infeasible displacements until feasible.

    Returns ``(accepted, splits)`` where ``accepted = old + (candidate-old)/2**splits``
    for rows that found a feasible point. Rows that never did are returned at
    ``old`` with ``splits = -1``.
    """
    old = np.atleast_2d(np.asarray(old, dtype=float))
    cand = np.atleast_2d(np.asarray(candidate, dtype=float))
    accepted = cand.copy()
    splits = np.zeros(len(cand), dtype=int)
    idx = np.flatnonzero(~is_feasible(problem, cand))
    if idx.size == 0:
        return accepted, splits
    # every halving level at once; the first feasible level wins
    scale = 2.0 ** -np.arange(1, max_splits + 1)
    d = cand[idx] - old[idx]
    trials = old[idx, None, :] + d[:, None, :] * scale[None, :, None]
    ok = is_feasible(problem, trials)
    found = ok.any(axis=1)
    first = np.argmax(ok, axis=1)
    rows = idx[found]
    accepted[rows] = trials[found, first[found]]
    splits[rows] = first[found] + 1
    accepted[idx[~found]] = old[idx[~found]]
    splits[idx[~found]] = -1
    return accepted, splits


class ConstraintHandler:
    """Base strategy. Subclasses override ``accept`` and possibly ``evaluate``."""

    name = "base"
    requires_feasible_start = False

    def evaluate(self, problem: Problem, x) -> Evaluations:
        return _evaluate_batch(problem, x, None)

    def eligible(self, ev: Evaluations) -> np.ndarray:
        """Which evaluated points may enter best bookkeeping."""
        return ev.feasible

    def accept(self, problem: Problem, old, candidate, velocity):
        """Return ``(positions, velocities)`` actually adopted by each particle."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class Penalization(ConstraintHandler):
    name = "penalization"

    def __init__(self, config: PenaltyConfig | None = None):
        self.config = config or PenaltyConfig()

    def evaluate(self, problem, x):
        return _evaluate_batch(problem, x, self.config)

    def eligible(self, ev):
        return np.ones(ev.raw.shape, dtype=bool)

    def accept(self, problem, old, candidate, velocity):
        return candidate, velocity

    def __repr__(self):
        return f"Penalization(lam={self.config.lam}, alpha={self.config.alpha})"


class PreservingFeasibility(ConstraintHandler):
    """Infeasible moves are ignored; the particle stays put but keeps its velocity."""

    name = "preserving"
    requires_feasible_start = True

    def accept(self, problem, old, candidate, velocity):
        ok = is_feasible(problem, candidate)
        return np.where(ok[:, None], candidate, old), velocity


class Bisection(ConstraintHandler):
    """Infeasible displacements are halved until feasible, up to ``max_splits`` times.

    The velocity is rescaled by the same factor as the displacement; a particle
    that finds no feasible point stays put with zero velocity.
    """

    name = "bisection"
    requires_feasible_start = True

    def __init__(self, config: BisectionConfig | None = None):
        self.config = config or BisectionConfig()

    def accept(self, problem, old, candidate, velocity):
        accepted, splits = bisect(problem, old, candidate, self.config.max_splits)
        return accepted, _rescale(velocity, splits)

    def __repr__(self):
        return f"Bisection(max_splits={self.config.max_splits})"


class CutOff(ConstraintHandler):
    """Clip to the side constraints; general constraints fall back to bisection."""

    name = "cutoff"
    requires_feasible_start = True

    def __init__(self, config: BisectionConfig | None = None):
        self.config = config or BisectionConfig()

    def accept(self, problem, old, candidate, velocity):
        clipped = _clip(problem, candidate)
        ok = is_feasible(problem, clipped)
        if ok.all():
            return clipped, velocity
        accepted, splits = bisect(problem, old, clipped, self.config.max_splits)
        velocity = velocity.copy()
        bad = ~ok
        displacement = clipped[bad] - old[bad]
        velocity[bad] = _rescale(displacement, splits[bad])
        return accepted, velocity


def _clip(problem: Problem, x):
    if not problem.enforce_bounds:
        return np.array(x, dtype=float)
    return np.clip(x, problem.lower, problem.upper)


def _rescale(velocity, splits):
    factor = np.where(splits < 0, 0.0, 2.0 ** -np.maximum(splits, 0))
    return velocity * factor[:, None]


HANDLERS = {
    "penalization": Penalization,
    "preserving": PreservingFeasibility,
    "cutoff": CutOff,
    "bisection": Bisection,
}


def make_handler(name: str, **params) -> ConstraintHandler:
    try:
        cls = HANDLERS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown handler {name!r}; choose from {sorted(HANDLERS)}"
        ) from None
    if cls is Penalization:
        return cls(PenaltyConfig(**params)) if params else cls()
    if cls in (Bisection, CutOff):
        return cls(BisectionConfig(**params)) if params else cls()
    if params:
        raise ConfigurationError(f"handler {name!r} takes no parameters")
    return cls()


# Single-point forms of the acceptance rules.


def evaluate(problem: Problem, x, handler: ConstraintHandler | None = None) -> EvaluatedPoint:
    handler = handler or Penalization()
    return handler.evaluate(problem, np.atleast_2d(np.asarray(x, dtype=float)))[0]


def accept_position_preserving(problem: Problem, candidate, particle) -> np.ndarray:
    old = np.asarray(particle.position, dtype=float)
    if not is_feasible(problem, old):
        raise RuntimeError("preserving feasibility called on an infeasible particle")
    cand = np.asarray(candidate, dtype=float)
    return cand.copy() if is_feasible(problem, cand) else old.copy()


def accept_position_cutoff(problem: Problem, old_position, candidate,
                           config: BisectionConfig | None = None) -> np.ndarray:
    old = np.atleast_2d(np.asarray(old_position, dtype=float))
    cand = np.atleast_2d(np.asarray(candidate, dtype=float))
    accepted, _ = CutOff(config).accept(problem, old, cand, np.zeros_like(cand))
    return accepted[0]


def accept_position_bisection(problem: Problem, old_position, candidate,
                              config: BisectionConfig | None = None) -> np.ndarray:
    config = config or BisectionConfig()
    accepted, _ = bisect(problem, old_position, candidate, config.max_splits)
    return accepted[0]
