"""Binary particle swarm: bit-string positions driven by real-valued velocities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .swarm import GLOBAL, RunResult, Topology, neighborhood_best_indices, step_rng
from .errors import ConfigurationError

DEFAULT_VMAX = 4.0


@dataclass
class BitParticle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_conflict: float


def sigmoid(v):
    """Probability of a bit taking state 1."""
    v = np.asarray(v, dtype=float)
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-v))
    return out if out.ndim else float(out)


def sample_bit(p, rng):
    """1 with probability ``p`` using exactly one draw per entry from ``[0, 1)``."""
    p = np.asarray(p, dtype=float)
    bits = (rng.random(p.shape) < p).astype(np.int8)
    return bits if bits.ndim else int(bits)


def binary_velocity(x, v, pbest, nbest, iw, sw, r_ind, r_soc, vmax=DEFAULT_VMAX):
    new = v + iw * r_ind * (pbest - x) + sw * r_soc * (nbest - x)
    if vmax is not None:
        new = np.clip(new, -vmax, vmax)
    return new


def binary_update_velocity(particle: BitParticle, gbest, iw: float, sw: float, rng,
                           vmax: float | None = DEFAULT_VMAX) -> np.ndarray:
    x = np.asarray(particle.position, dtype=float)
    r = rng.random((2, x.size))
    return binary_velocity(x, np.asarray(particle.velocity, dtype=float),
                           np.asarray(particle.pbest_position, dtype=float),
                           np.asarray(gbest, dtype=float), iw, sw, r[0], r[1], vmax)


def run_binary(conflict: Callable[[np.ndarray], float], n_bits: int, *,
               swarm_size: int = 30, iw: float = 2.0, sw: float = 2.0,
               topology: Topology = GLOBAL, vmax: float | None = DEFAULT_VMAX,
               max_time_steps: int = 1000, conflict_target: float | None = None,
               rng_seed: int = 0) -> RunResult:
    """Minimise ``conflict`` over ``{0,1}**n_bits``.

    ``conflict`` is called once per particle on an int8 bit vector. Each step
    draws ``2*n`` numbers per particle for the velocity and ``n`` more for
    sampling the new bits.
    """
    if n_bits < 1 or swarm_size < 1:
        raise ConfigurationError("n_bits and swarm_size must be positive")
    if vmax is not None and vmax <= 0:
        raise ConfigurationError("vmax must be > 0")

    def evaluate(bits):
        vals = np.array([conflict(b) for b in bits], dtype=float)
        return np.where(np.isnan(vals), np.inf, vals)

    rng = step_rng(rng_seed, 0)
    x = sample_bit(np.full((swarm_size, n_bits), 0.5), rng)
    v = np.zeros((swarm_size, n_bits))
    current = evaluate(x)
    pbest, pbest_c = x.copy(), current.copy()
    trace = [(pbest_c.min(), current.mean())]
    met = conflict_target is not None and trace[-1][0] <= conflict_target
    t = 0
    while not met and t < max_time_steps:
        t += 1
        rng = step_rng(rng_seed, t)
        draws = rng.random((swarm_size, 3, n_bits))
        nb = neighborhood_best_indices(pbest_c, topology)
        v = binary_velocity(x, v, pbest, pbest[nb], iw, sw, draws[:, 0], draws[:, 1], vmax)
        x = (draws[:, 2] < sigmoid(v)).astype(np.int8)
        current = evaluate(x)
        better = current < pbest_c
        pbest[better], pbest_c[better] = x[better], current[better]
        trace.append((pbest_c.min(), current.mean()))
        met = conflict_target is not None and trace[-1][0] <= conflict_target
    b = int(np.argmin(pbest_c))
    return RunResult(pbest[b].copy(), float(pbest_c[b]), float(pbest_c[b]), t, bool(met),
                     np.array(trace, dtype=float), rng_seed)
