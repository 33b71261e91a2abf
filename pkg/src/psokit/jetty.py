"""Berth allocation ("jetty scheduling") on top of the rounded-discrete swarm.

A position has one coordinate per shipment; rounded, it names the berth that
serves the shipment. Everything else is deterministic: unfit berths are
repaired to the closest fit berth, shipments on a berth are served in ETA
order (ties by id) around any pinned berthing times, and the conflict is the total
demurrage of the resulting timetable. Every particle therefore decodes to a
feasible schedule.
"""
from __future__ import annotations

import csv
import functools
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .discrete import DiscreteSet
from .errors import InstanceError
from .problem import Problem
from .swarm import GLOBAL, RunResult, SwarmConfig, run


@dataclass
class Shipment:
    id: str
    eta: float
    laycan_start: float
    laycan_end: float
    demurrage_rate: float
    fixed_berth: int | None = None
    fixed_etb: float | None = None


@dataclass
class BerthingData:
    fitness: np.ndarray    # (n, m) bool
    residency: np.ndarray  # (n, m) hours

    def __post_init__(self):
        self.fitness = np.asarray(self.fitness, dtype=bool)
        self.residency = np.asarray(self.residency, dtype=float)


@dataclass
class ScheduleInstance:
    shipments: list[Shipment]
    berth_count: int
    berthing: BerthingData
    multi_berth: bool = False

    def __post_init__(self):
        self.validate()

    @property
    def size(self) -> int:
        return len(self.shipments)

    def fit_berths(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.berthing.fitness[i])

    def validate(self) -> None:
        """Raise :class:`InstanceError` listing every problem found."""
        errors = []
        n, m = self.size, self.berth_count
        if self.multi_berth:
            errors.append("multi-berth serving is not supported")
        if m < 1:
            errors.append("berth_count must be >= 1")
        for name, mat in (("fitness", self.berthing.fitness), ("residency", self.berthing.residency)):
            if mat.shape != (n, m):
                errors.append(f"{name} matrix has shape {mat.shape}, expected {(n, m)}")
        if errors:
            raise InstanceError("; ".join(errors))
        fit, res = self.berthing.fitness, self.berthing.residency
        for i, s in enumerate(self.shipments):
            tag = f"shipment {s.id!r}"
            if not math.isfinite(s.eta) or s.eta < 0:
                errors.append(f"{tag}: eta must be finite and >= 0")
            if s.laycan_start > s.laycan_end:
                errors.append(f"{tag}: laycan_start > laycan_end")
            if s.demurrage_rate < 0:
                errors.append(f"{tag}: negative demurrage rate")
            if not fit[i].any():
                errors.append(f"{tag}: no fit berth")
            if np.any(~np.isfinite(res[i][fit[i]])) or np.any(res[i][fit[i]] <= 0):
                errors.append(f"{tag}: residency must be finite and > 0 on fit berths")
            if s.fixed_berth is not None:
                if not 0 <= s.fixed_berth < m:
                    errors.append(f"{tag}: fixed berth {s.fixed_berth} out of range")
                elif not fit[i, s.fixed_berth]:
                    errors.append(f"{tag}: fixed berth {s.fixed_berth} is unfit")
            if s.fixed_etb is not None and s.fixed_etb < s.eta:
                errors.append(f"{tag}: fixed etb {s.fixed_etb} precedes eta {s.eta}")
        if not errors:
            errors.extend(_pinned_overlaps(self))
        if errors:
            raise InstanceError("; ".join(errors))


def _pinned_overlaps(instance) -> list[str]:
    """Shipments pinned in both berth and time must not overlap on a berth."""
    out = []
    by_berth: dict[int, list] = {}
    for i, s in enumerate(instance.shipments):
        if s.fixed_berth is not None and s.fixed_etb is not None:
            end = s.fixed_etb + instance.berthing.residency[i, s.fixed_berth]
            by_berth.setdefault(s.fixed_berth, []).append((s.fixed_etb, end, s.id))
    for b, spans in by_berth.items():
        spans.sort()
        for (s0, e0, a), (s1, e1, c) in zip(spans, spans[1:]):
            if s1 < e0:
                out.append(f"pinned shipments {a!r} and {c!r} overlap on berth {b}")
    return out


@dataclass
class Schedule:
    assignment: np.ndarray
    etb: np.ndarray
    completion: np.ndarray
    per_shipment_demurrage: np.ndarray
    total_demurrage: float
    makespan: float


def decode(position, instance: ScheduleInstance) -> np.ndarray:
    """Nearest berth index for each coordinate (clipped, ties downward); pins override."""
    x = np.clip(np.asarray(position, dtype=float), 0, instance.berth_count - 1)
    berths = np.ceil(x - 0.5).astype(int)
    for i, s in enumerate(instance.shipments):
        if s.fixed_berth is not None:
            berths[i] = s.fixed_berth
    return berths


def _closest(candidates: Sequence[int], berth: int) -> int:
    return min(candidates, key=lambda b: (abs(b - berth), b))


def repair(assignment, instance: ScheduleInstance) -> np.ndarray:
    """Move shipments off unfit berths to the closest fit berth (index distance).

    Shipments with a pinned berthing time but a free berth are also moved
    when their pinned interval collides with another pinned interval.
    """
    out = np.array(assignment, dtype=int)
    if out.shape != (instance.size,):
        raise InstanceError(f"assignment must have length {instance.size}")
    fit = instance.berthing.fitness
    for i, s in enumerate(instance.shipments):
        if s.fixed_berth is not None:
            out[i] = s.fixed_berth
        elif not (0 <= out[i] < instance.berth_count and fit[i, out[i]]):
            out[i] = _closest(instance.fit_berths(i), out[i])
    _separate_pinned(out, instance)
    return out


def _separate_pinned(assignment, instance):
    res = instance.berthing.residency
    busy: dict[int, list] = {}
    pinned = [i for i, s in enumerate(instance.shipments) if s.fixed_etb is not None]
    # berth-pinned ones claim their slots first, then by pinned time
    pinned.sort(key=lambda i: (instance.shipments[i].fixed_berth is None,
                               instance.shipments[i].fixed_etb, i))
    for i in pinned:
        s = instance.shipments[i]

        def free(b):
            start, end = s.fixed_etb, s.fixed_etb + res[i, b]
            return all(end <= s0 or start >= e0 for s0, e0 in busy.get(b, []))

        b = assignment[i]
        if not free(b):
            options = [c for c in instance.fit_berths(i) if free(c)]
            if s.fixed_berth is not None or not options:
                raise InstanceError(f"shipment {s.id!r}: no berth free at pinned etb {s.fixed_etb}")
            b = assignment[i] = _closest(options, b)
        busy.setdefault(b, []).append((s.fixed_etb, s.fixed_etb + res[i, b]))


def _earliest_start(t, duration, pinned):
    """First start >= t such that [start, start+duration) misses every pinned interval."""
    for s0, e0 in pinned:
        if e0 <= t:
            continue
        if t + duration <= s0:
            break
        t = e0
    return t


def demurrage(completion, laycan_end, rate):
    """Cost of every hour served beyond the end of the laycan window."""
    return rate * np.maximum(0.0, np.asarray(completion) - np.asarray(laycan_end))


def build_timetable(assignment, instance: ScheduleInstance) -> Schedule:
    n = instance.size
    assignment = np.asarray(assignment, dtype=int)
    res = instance.berthing.residency
    etb = np.zeros(n)
    completion = np.zeros(n)
    for b in range(instance.berth_count):
        members = np.flatnonzero(assignment == b)
        pinned = []
        queued = []
        for i in members:
            s = instance.shipments[i]
            if s.fixed_etb is not None:
                etb[i] = s.fixed_etb
                completion[i] = s.fixed_etb + res[i, b]
                pinned.append((etb[i], completion[i]))
            else:
                queued.append(i)
        pinned.sort()
        queued.sort(key=lambda i: (instance.shipments[i].eta, instance.shipments[i].id, i))
        free_at = -math.inf
        for i in queued:
            start = _earliest_start(max(instance.shipments[i].eta, free_at), res[i, b], pinned)
            etb[i] = start
            completion[i] = free_at = start + res[i, b]
    laycan_end = np.array([s.laycan_end for s in instance.shipments], dtype=float)
    rate = np.array([s.demurrage_rate for s in instance.shipments], dtype=float)
    cost = demurrage(completion, laycan_end, rate) if n else np.zeros(0)
    return Schedule(
        assignment=assignment.copy(),
        etb=etb,
        completion=completion,
        per_shipment_demurrage=cost,
        total_demurrage=float(cost.sum()),
        makespan=float(completion.max()) if n else 0.0,
    )


def evaluate_assignment(assignment, instance: ScheduleInstance) -> Schedule:
    return build_timetable(repair(assignment, instance), instance)


def conflict(position, instance: ScheduleInstance) -> float:
    """Total demurrage of the schedule a position decodes to."""
    return evaluate_assignment(decode(position, instance), instance).total_demurrage


def scheduling_problem(instance: ScheduleInstance) -> Problem:
    m = instance.berth_count

    @functools.lru_cache(maxsize=65536)
    def cached(berths: tuple) -> float:
        return evaluate_assignment(np.array(berths), instance).total_demurrage

    def total_demurrage(x):
        return cached(tuple(decode(x, instance).tolist()))

    return Problem(
        name="jetty",
        lower=np.full(instance.size, -0.5),
        upper=np.full(instance.size, m - 0.5),
        conflict=total_demurrage,
        variable_kinds=[DiscreteSet(range(m))] * instance.size,
        enforce_bounds=False,
        vectorized=False,
    )


def default_config(**overrides) -> SwarmConfig:
    params = dict(swarm_size=30, coefficient_sets="gp3", topology=GLOBAL, max_time_steps=200)
    params.update(overrides)
    return SwarmConfig(**params)


def schedule(instance: ScheduleInstance, config: SwarmConfig | None = None,
             rng_seed: int | None = None, initial_positions=None) -> tuple[Schedule, RunResult]:
    """Optimise berth assignments; returns the best schedule and the run record."""
    instance.validate()
    config = config or default_config()
    if instance.size == 0:
        empty = build_timetable(np.zeros(0, dtype=int), instance)
        result = RunResult(np.zeros(0), 0.0, 0.0, 0, config.conflict_target is not None,
                           np.zeros((1, 2)), config.rng_seed if rng_seed is None else rng_seed)
        return empty, result
    result = run(scheduling_problem(instance), config, rng_seed=rng_seed,
                 initial_positions=initial_positions)
    return evaluate_assignment(decode(result.gbest_position, instance), instance), result


# Baselines and oracles


def fcfs_schedule(instance: ScheduleInstance) -> Schedule:
    """First come, first served: in ETA order each shipment takes the fit berth
    where it would finish earliest (lowest index on ties)."""
    res = instance.berthing.residency
    assignment = np.zeros(instance.size, dtype=int)
    for i, s in enumerate(instance.shipments):
        assignment[i] = s.fixed_berth if s.fixed_berth is not None else instance.fit_berths(i)[0]
    assignment = repair(assignment, instance)
    pinned: dict[int, list] = {b: [] for b in range(instance.berth_count)}
    for i, s in enumerate(instance.shipments):
        if s.fixed_etb is not None:
            pinned[assignment[i]].append((s.fixed_etb, s.fixed_etb + res[i, assignment[i]]))
    for spans in pinned.values():
        spans.sort()
    free_at = np.full(instance.berth_count, -math.inf)
    order = sorted((i for i, s in enumerate(instance.shipments) if s.fixed_etb is None),
                   key=lambda i: (instance.shipments[i].eta, instance.shipments[i].id, i))
    for i in order:
        s = instance.shipments[i]
        options = [s.fixed_berth] if s.fixed_berth is not None else instance.fit_berths(i)
        finish = []
        for b in options:
            start = _earliest_start(max(s.eta, free_at[b]), res[i, b], pinned[b])
            finish.append((start + res[i, b], b))
        end, b = min(finish)
        assignment[i] = b
        free_at[b] = end
    return evaluate_assignment(assignment, instance)


def exhaustive_optimum(instance: ScheduleInstance) -> Schedule:
    """Best schedule over every raw assignment in ``range(m)**n`` (small instances only)."""
    best = None
    for raw in itertools.product(range(instance.berth_count), repeat=instance.size):
        sched = evaluate_assignment(np.array(raw, dtype=int), instance)
        if best is None or sched.total_demurrage < best.total_demurrage:
            best = sched
    if best is None:
        best = build_timetable(np.zeros(0, dtype=int), instance)
    return best


def random_instance(n: int, m: int, rng: np.random.Generator, *, fit_probability: float = 0.75,
                    horizon: float = 48.0, residency=(5.0, 20.0), rate=(1.0, 10.0)
                    ) -> ScheduleInstance:
    """Synthetic instance with congestion on purpose so that demurrage is not trivially zero."""
    fitness = rng.random((n, m)) < fit_probability
    for i in range(n):
        if not fitness[i].any():
            fitness[i, rng.integers(m)] = True
    res = np.round(rng.uniform(*residency, size=(n, m)), 2)
    eta = np.round(np.sort(rng.uniform(0.0, horizon, size=n)), 2)
    slack = rng.uniform(1.0, 2.5, size=n)
    shipments = []
    for i in range(n):
        fastest = res[i][fitness[i]].min()
        shipments.append(Shipment(
            id=f"S{i + 1}",
            eta=float(eta[i]),
            laycan_start=float(eta[i]),
            laycan_end=float(np.round(eta[i] + fastest * slack[i], 2)),
            demurrage_rate=float(np.round(rng.uniform(*rate), 2)),
        ))
    return ScheduleInstance(shipments, m, BerthingData(fitness, np.where(fitness, res, 0.0)))


# Delimited-text I/O

SHIPMENT_FIELDS = ["id", "eta", "laycan_start", "laycan_end", "rate", "fixed_berth", "fixed_etb"]


def _optional(text: str, cast):
    text = (text or "").strip()
    return cast(text) if text else None


def _read_matrix(path: Path, ids: list[str], cast) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InstanceError(f"{path}: empty matrix file")
    body = {r[0].strip(): r[1:] for r in rows[1:] if r}
    missing = [i for i in ids if i not in body]
    if missing:
        raise InstanceError(f"{path}: no row for shipments {missing}")
    try:
        return np.array([[cast(v) for v in body[i]] for i in ids])
    except ValueError as exc:
        raise InstanceError(f"{path}: {exc}") from None


def load_instance(directory) -> ScheduleInstance:
    """Read ``shipments.csv``, ``fitness.csv`` and ``residency.csv`` from ``directory``.

    Matrix files have a header row (``shipment,<berth 0>,<berth 1>,...``) and
    one row per shipment id; fitness entries are 0/1.
    """
    directory = Path(directory)
    path = directory / "shipments.csv"
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [f for f in SHIPMENT_FIELDS[:5] if f not in (reader.fieldnames or [])]
            if missing:
                raise InstanceError(f"{path}: missing columns {missing}")
            shipments = [
                Shipment(
                    id=row["id"].strip(),
                    eta=float(row["eta"]),
                    laycan_start=float(row["laycan_start"]),
                    laycan_end=float(row["laycan_end"]),
                    demurrage_rate=float(row["rate"]),
                    fixed_berth=_optional(row.get("fixed_berth"), int),
                    fixed_etb=_optional(row.get("fixed_etb"), float),
                )
                for row in reader
            ]
        ids = [s.id for s in shipments]
        fitness = _read_matrix(directory / "fitness.csv", ids, lambda v: bool(int(v)))
        residency = _read_matrix(directory / "residency.csv", ids, float)
    except OSError as exc:
        raise InstanceError(f"cannot read instance: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"{path}: {exc}") from None
    m = fitness.shape[1] if fitness.ndim == 2 else 0
    return ScheduleInstance(shipments, m, BerthingData(fitness.reshape(len(ids), m),
                                                       residency.reshape(len(ids), m)))


def save_instance(instance: ScheduleInstance, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "shipments.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SHIPMENT_FIELDS)
        for s in instance.shipments:
            w.writerow([s.id, repr(s.eta), repr(s.laycan_start), repr(s.laycan_end),
                        repr(s.demurrage_rate),
                        "" if s.fixed_berth is None else s.fixed_berth,
                        "" if s.fixed_etb is None else repr(s.fixed_etb)])
    header = ["shipment"] + [str(b) for b in range(instance.berth_count)]
    for name, mat, fmt in (("fitness", instance.berthing.fitness, lambda v: str(int(v))),
                           ("residency", instance.berthing.residency, repr)):
        with open(directory / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for s, row in zip(instance.shipments, mat):
                w.writerow([s.id] + [fmt(float(v)) if name == "residency" else fmt(v) for v in row])


def write_schedule(schedule_: Schedule, instance: ScheduleInstance, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["shipment", "berth", "etb", "completion", "demurrage"])
    for i, s in enumerate(instance.shipments):
        w.writerow([s.id, int(schedule_.assignment[i]), f"{schedule_.etb[i]:.6g}",
                    f"{schedule_.completion[i]:.6g}",
                    f"{schedule_.per_shipment_demurrage[i]:.6g}"])
