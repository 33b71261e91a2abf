"""Continuous particle swarm engine.

State is held column-wise in :class:`Swarm` so a synchronous step updates the
whole population with a handful of numpy operations. Random numbers come from
a generator derived from ``(seed, step)``; each step draws one array of shape
``(swarm_size, 2, n)`` and particle ``i`` only ever reads row ``i``, so the
result does not depend on the order particles are processed in.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .constraints import ConstraintHandler, Penalization
from .errors import ConfigurationError, InitializationError
from .problem import Problem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Coefficients:
    w: float
    iw: float
    sw: float

    def __post_init__(self):
        if min(self.w, self.iw, self.sw) < 0:
            raise ConfigurationError(f"coefficients must be non-negative: {self}")

    @property
    def aw(self) -> float:
        """Acceleration weight."""
        return self.iw + self.sw


TRELEA1 = Coefficients(0.6, 1.7, 1.7)
TRELEA2 = Coefficients(0.729, 1.494, 1.494)
ORIGINAL = Coefficients(1.0, 2.0, 2.0)
EXPLORATIVE = Coefficients(0.9, 2.0, 2.0)

PRESETS: dict[str, list[tuple[Coefficients, float]]] = {
    "trelea1": [(TRELEA1, 1.0)],
    "trelea2": [(TRELEA2, 1.0)],
    "original": [(ORIGINAL, 1.0)],
    "gp3": [(TRELEA2, 1 / 3), (TRELEA1, 1 / 3), (EXPLORATIVE, 1 / 3)],
}


def preset(name: str) -> list[tuple[Coefficients, float]]:
    try:
        return list(PRESETS[name])
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; choose from {sorted(PRESETS)}"
        ) from None


@dataclass(frozen=True)
class Topology:
    kind: str = "global"
    k: int = 1

    def __post_init__(self):
        if self.kind not in ("global", "ring"):
            raise ConfigurationError(f"unknown topology {self.kind!r}")
        if self.kind == "ring" and self.k < 1:
            raise ConfigurationError("ring topology needs k >= 1")

    @classmethod
    def parse(cls, text: str) -> "Topology":
        """``"global"`` or ``"ring:K"``."""
        if text == "global":
            return cls("global")
        kind, _, k = text.partition(":")
        if kind != "ring" or not k.isdigit():
            raise ConfigurationError(f"topology must be 'global' or 'ring:K', got {text!r}")
        return cls("ring", int(k))

    def __str__(self):
        return "global" if self.kind == "global" else f"ring:{self.k}"

    def window(self, index: int, size: int) -> np.ndarray:
        """Particle indices in the neighbourhood of ``index``."""
        if self.kind == "global" or 2 * self.k + 1 >= size:
            return np.arange(size)
        return np.unique((index + np.arange(-self.k, self.k + 1)) % size)


GLOBAL = Topology("global")


def ring(k: int) -> Topology:
    return Topology("ring", k)


@dataclass
class SwarmConfig:
    swarm_size: int = 30
    coefficient_sets: list = field(default_factory=lambda: preset("gp3"))
    topology: Topology = GLOBAL
    update_mode: str = "synchronous"
    velocity_clamp: float | Sequence[float] | None = None
    max_time_steps: int = 10000
    conflict_target: float | None = None
    rng_seed: int = 0
    init_attempts: int = 10_000

    def __post_init__(self):
        if isinstance(self.coefficient_sets, str):
            self.coefficient_sets = preset(self.coefficient_sets)
        self.validate()

    def validate(self) -> None:
        if self.swarm_size < 1:
            raise ConfigurationError("swarm_size must be a positive integer")
        if self.max_time_steps < 0:
            raise ConfigurationError("max_time_steps must be >= 0")
        if self.update_mode not in ("synchronous", "asynchronous"):
            raise ConfigurationError(f"unknown update_mode {self.update_mode!r}")
        if not self.coefficient_sets:
            raise ConfigurationError("at least one coefficient set is required")
        fractions = [f for _, f in self.coefficient_sets]
        if min(fractions) < 0 or not np.isclose(sum(fractions), 1.0):
            raise ConfigurationError("coefficient-set fractions must be >= 0 and sum to 1")
        if self.velocity_clamp is not None and np.any(np.asarray(self.velocity_clamp) <= 0):
            raise ConfigurationError("velocity_clamp entries must be > 0")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigurationError("rng_seed must be an unsigned 64-bit integer")

    def subswarm_ids(self) -> np.ndarray:
        """Contiguous blocks of particles per coefficient set (largest-remainder sizing)."""
        fractions = np.array([f for _, f in self.coefficient_sets], dtype=float)
        exact = fractions / fractions.sum() * self.swarm_size
        counts = np.floor(exact).astype(int)
        short = self.swarm_size - counts.sum()
        # stable sort keeps earlier sets first on equal remainders
        for j in np.argsort(-(exact - counts), kind="stable")[:short]:
            counts[j] += 1
        return np.repeat(np.arange(len(counts)), counts)

    def clamp_for(self, problem: Problem) -> np.ndarray | None:
        """Configured clamp, or the variable range when some set has ``w >= 1``."""
        if self.velocity_clamp is not None:
            return np.broadcast_to(
                np.asarray(self.velocity_clamp, dtype=float), (problem.dimension,)
            ).copy()
        if any(c.w >= 1 for c, _ in self.coefficient_sets):
            return problem.span.copy()
        return None


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_conflict: float
    subswarm_id: int = 0


@dataclass
class Swarm:
    """Column-wise swarm state; row ``i`` is particle ``i``."""

    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_conflict: np.ndarray
    pbest_raw: np.ndarray
    conflict: np.ndarray
    subswarm: np.ndarray
    step_count: int = 0

    def __len__(self):
        return len(self.position)

    def particle(self, i: int) -> Particle:
        return Particle(
            self.position[i].copy(),
            self.velocity[i].copy(),
            self.pbest_position[i].copy(),
            float(self.pbest_conflict[i]),
            int(self.subswarm[i]),
        )

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.pbest_conflict))

    def copy(self) -> "Swarm":
        return Swarm(*(np.copy(getattr(self, f)) for f in (
            "position", "velocity", "pbest_position", "pbest_conflict",
            "pbest_raw", "conflict", "subswarm")), step_count=self.step_count)


@dataclass
class RunResult:
    gbest_position: np.ndarray
    gbest_conflict: float
    gbest_penalized_conflict: float
    time_steps_used: int
    target_met: bool
    trace: np.ndarray  # rows (best penalized conflict, swarm-average conflict); row 0 is the initial swarm
    seed: int = 0

    def __eq__(self, other):
        if not isinstance(other, RunResult):
            return NotImplemented
        return (
            np.array_equal(self.gbest_position, other.gbest_position)
            and self.gbest_conflict == other.gbest_conflict
            and self.gbest_penalized_conflict == other.gbest_penalized_conflict
            and self.time_steps_used == other.time_steps_used
            and self.target_met == other.target_met
            and np.array_equal(self.trace, other.trace)
            and self.seed == other.seed
        )


# Velocity and position updates


def velocity_update(x, v, pbest, nbest, w, iw, sw, r_ind, r_soc, clamp=None):
    """Inertia + individuality + sociality terms, broadcast over any leading axes."""
    new = w * v + iw * r_ind * (pbest - x) + sw * r_soc * (nbest - x)
    if clamp is not None:
        new = np.clip(new, -clamp, clamp)
    return new


def update_velocity(particle: Particle, gbest_position, coeffs: Coefficients, rng,
                    clamp=None) -> np.ndarray:
    x = np.asarray(particle.position, dtype=float)
    arrays = [np.asarray(a, dtype=float) for a in
              (particle.velocity, particle.pbest_position, gbest_position)]
    if any(a.shape != x.shape for a in arrays):
        raise ConfigurationError("particle vectors and gbest must share one dimension")
    r = rng.random((2, x.size))
    return velocity_update(x, arrays[0], arrays[1], arrays[2],
                           coeffs.w, coeffs.iw, coeffs.sw, r[0], r[1], clamp)


def update_position(particle: Particle, velocity) -> np.ndarray:
    return np.asarray(particle.position, dtype=float) + np.asarray(velocity, dtype=float)


def neighborhood_best(swarm, index: int, topology: Topology = GLOBAL):
    """``(position, conflict)`` of the best personal best around particle ``index``.

    ``swarm`` is a :class:`Swarm` or a sequence of :class:`Particle`. Ties go to
    the lowest particle index.
    """
    if isinstance(swarm, Swarm):
        positions, conflicts = swarm.pbest_position, swarm.pbest_conflict
    else:
        positions = np.array([p.pbest_position for p in swarm], dtype=float)
        conflicts = np.array([p.pbest_conflict for p in swarm], dtype=float)
    window = topology.window(index, len(conflicts))
    best = window[np.argmin(conflicts[window])]  # window is sorted, so ties -> lowest index
    return positions[best], float(conflicts[best])


def neighborhood_best_indices(conflicts: np.ndarray, topology: Topology) -> np.ndarray:
    """Index of the best neighbour of every particle at once."""
    size = len(conflicts)
    if topology.kind == "global" or 2 * topology.k + 1 >= size:
        return np.full(size, int(np.argmin(conflicts)))
    offsets = np.arange(-topology.k, topology.k + 1)
    windows = (np.arange(size)[:, None] + offsets) % size
    vals = conflicts[windows]
    best = vals.min(axis=1, keepdims=True)
    return np.where(vals == best, windows, size).min(axis=1)


# Swarm construction and stepping


def _coefficient_columns(config: SwarmConfig, ids: np.ndarray):
    table = np.array([[c.w, c.iw, c.sw] for c, _ in config.coefficient_sets])
    cols = table[ids]
    return cols[:, 0:1], cols[:, 1:2], cols[:, 2:3]


def _init_positions(problem, config, handler, rng, initial_positions):
    size, n = config.swarm_size, problem.dimension
    if initial_positions is not None:
        pos = np.array(initial_positions, dtype=float)
        if pos.shape != (size, n):
            raise ConfigurationError(
                f"initial_positions must have shape {(size, n)}, got {pos.shape}"
            )
        if handler.requires_feasible_start and not handler.evaluate(problem, pos).feasible.all():
            raise InitializationError(f"{handler.name}: initial positions must be feasible")
        return pos
    pos = rng.uniform(problem.lower, problem.upper, size=(size, n))
    if not handler.requires_feasible_start:
        return pos
    from .constraints import is_feasible

    pending = ~is_feasible(problem, pos)
    attempts = np.ones(size, dtype=int)
    while pending.any():
        if attempts[pending].max() >= config.init_attempts:
            raise InitializationError(
                f"handler {handler.name!r} needs a feasible start but no feasible point was "
                f"sampled for {problem.name} after {config.init_attempts} attempts"
            )
        idx = np.flatnonzero(pending)
        trial = rng.uniform(problem.lower, problem.upper, size=(idx.size, n))
        ok = is_feasible(problem, trial)
        pos[idx[ok]] = trial[ok]
        attempts[idx] += 1
        pending[idx[ok]] = False
    return pos


def initialize_swarm(problem: Problem, config: SwarmConfig,
                     handler: ConstraintHandler | None = None, rng=None,
                     initial_positions=None) -> Swarm:
    handler = handler or Penalization()
    rng = rng if rng is not None else step_rng(config.rng_seed, 0)
    pos = _init_positions(problem, config, handler, rng, initial_positions)
    ev = handler.evaluate(problem, pos)
    pbest_conflict = np.where(handler.eligible(ev), ev.penalized, np.inf)
    return Swarm(
        position=pos,
        velocity=np.zeros_like(pos),
        pbest_position=ev.points.copy(),
        pbest_conflict=pbest_conflict,
        pbest_raw=np.where(np.isfinite(pbest_conflict), ev.raw, np.inf),
        conflict=ev.penalized.copy(),
        subswarm=config.subswarm_ids(),
    )


def step_rng(seed: int, step: int) -> np.random.Generator:
    """Generator for one time-step of one run; step 0 is initialisation."""
    return np.random.default_rng([int(seed), int(step)])


def _adopt(swarm, idx, ev, handler):
    better = handler.eligible(ev) & (ev.penalized < swarm.pbest_conflict[idx])
    sel = np.asarray(idx)[better]
    swarm.pbest_position[sel] = ev.points[better]
    swarm.pbest_conflict[sel] = ev.penalized[better]
    swarm.pbest_raw[sel] = ev.raw[better]


def step(swarm: Swarm, problem: Problem, config: SwarmConfig,
         handler: ConstraintHandler | None = None, rng=None) -> Swarm:
    """Advance every particle by one time-step (in place; the swarm is returned)."""
    handler = handler or Penalization()
    if rng is None:
        rng = step_rng(config.rng_seed, swarm.step_count + 1)
    size, n = swarm.position.shape
    draws = rng.random((size, 2, n))
    w, iw, sw = _coefficient_columns(config, swarm.subswarm)
    clamp = config.clamp_for(problem)

    if config.update_mode == "synchronous":
        nb = neighborhood_best_indices(swarm.pbest_conflict, config.topology)
        v = velocity_update(swarm.position, swarm.velocity, swarm.pbest_position,
                            swarm.pbest_position[nb], w, iw, sw,
                            draws[:, 0], draws[:, 1], clamp)
        cand = swarm.position + v
        pos, v = handler.accept(problem, swarm.position, cand, v)
        ev = handler.evaluate(problem, pos)
        swarm.position, swarm.velocity = pos, v
        swarm.conflict = ev.penalized.copy()
        _adopt(swarm, np.arange(size), ev, handler)
    else:
        for i in range(size):
            nbest, _ = neighborhood_best(swarm, i, config.topology)
            sl = slice(i, i + 1)
            v = velocity_update(swarm.position[sl], swarm.velocity[sl],
                                swarm.pbest_position[sl], nbest[None, :],
                                w[sl], iw[sl], sw[sl], draws[sl, 0], draws[sl, 1], clamp)
            pos, v = handler.accept(problem, swarm.position[sl], swarm.position[sl] + v, v)
            ev = handler.evaluate(problem, pos)
            swarm.position[sl], swarm.velocity[sl] = pos, v
            swarm.conflict[i] = ev.penalized[0]
            _adopt(swarm, [i], ev, handler)
    swarm.step_count += 1
    return swarm


def _trace_row(swarm: Swarm):
    with np.errstate(invalid="ignore", over="ignore"):
        return swarm.pbest_conflict.min(), float(np.mean(swarm.conflict))


def run(problem: Problem, config: SwarmConfig, handler: ConstraintHandler | None = None,
        rng_seed: int | None = None, initial_positions=None,
        callback: Callable[[Swarm], None] | None = None) -> RunResult:
    """Run the swarm until the conflict target is met or the step budget is spent.

    The target is tested against the best penalised conflict, which equals the
    raw conflict whenever the best point is feasible.
    """
    handler = handler or Penalization()
    seed = config.rng_seed if rng_seed is None else int(rng_seed)
    if not 0 <= seed < 2**64:
        raise ConfigurationError("rng_seed must be an unsigned 64-bit integer")
    swarm = initialize_swarm(problem, config, handler, step_rng(seed, 0), initial_positions)
    target = config.conflict_target
    trace = [_trace_row(swarm)]
    met = target is not None and trace[-1][0] <= target
    while not met and swarm.step_count < config.max_time_steps:
        step(swarm, problem, config, handler, step_rng(seed, swarm.step_count + 1))
        trace.append(_trace_row(swarm))
        met = target is not None and trace[-1][0] <= target
        if callback is not None:
            callback(swarm)
    b = swarm.best_index
    log.debug("%s: %d steps, best %.6g", problem.name, swarm.step_count, swarm.pbest_conflict[b])
    return RunResult(
        gbest_position=swarm.pbest_position[b].copy(),
        gbest_conflict=float(swarm.pbest_raw[b]),
        gbest_penalized_conflict=float(swarm.pbest_conflict[b]),
        time_steps_used=swarm.step_count,
        target_met=bool(met),
        trace=np.array(trace, dtype=float),
        seed=seed,
    )
