"""Batch experiments: repeated seeded runs, statistics, and machine-readable output."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

import numpy as np
import yaml

from .constraints import HANDLERS, make_handler
from .errors import ConfigurationError
from .problems import BENCHMARKS, PROBLEM_NAMES, default_target, get_problem
from .swarm import PRESETS, Coefficients, RunResult, SwarmConfig, Topology, run

SEED_ENV = "PSOKIT_SEED"
U64 = 2**64


class ConfigError(ConfigurationError):
    """Every problem found while validating a configuration, with field paths."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass
class ExperimentConfig:
    problem: str
    swarm: SwarmConfig
    handler: str = "penalization"
    handler_params: dict = field(default_factory=dict)
    runs: int = 1
    seed_base: int = 0
    dimension: int | None = None
    formulation: str = "hu"
    discrete: bool = True
    preset: str | None = "gp3"
    workers: int = 1

    def seed_for(self, r: int) -> int:
        return (self.seed_base + r) % U64

    def build_problem(self):
        return get_problem(self.problem, dimension=self.dimension,
                           formulation=self.formulation, discrete=self.discrete)

    def build_handler(self):
        return make_handler(self.handler, **self.handler_params)

    def echo(self) -> dict[str, Any]:
        """Flat description of the configuration for output headers."""
        s = self.swarm
        if self.preset is not None:
            coeffs = self.preset
        else:
            coeffs = ";".join(f"{c.w}/{c.iw}/{c.sw}@{f:.6g}" for c, f in s.coefficient_sets)
        clamp = s.velocity_clamp
        return {
            "problem": self.problem,
            "dimension": self.dimension if self.dimension is not None else "",
            "formulation": self.formulation if self.problem == "himmelblau" else "",
            "discrete": str(self.discrete).lower() if self.problem == "pressure_vessel" else "",
            "handler": self.handler,
            "handler_params": json.dumps(self.handler_params, sort_keys=True) if self.handler_params else "",
            "coefficients": coeffs,
            "topology": str(s.topology),
            "update_mode": s.update_mode,
            "max_time_steps": s.max_time_steps,
            "target": "" if s.conflict_target is None else repr(float(s.conflict_target)),
            "velocity_clamp": "" if clamp is None else json.dumps(np.asarray(clamp).tolist()),
            "seed_base": self.seed_base,
        }


@dataclass
class RunRecord:
    run: int
    seed: int
    steps: int
    raw_conflict: float
    penalized_conflict: float
    target_met: bool
    trace: np.ndarray | None = None


@dataclass
class RunStatistics:
    runs: int
    swarm_size: int
    success_rate: float | None
    avg_steps_to_goal: float | None
    min_steps_to_goal: int | None
    expected_fes: float | None
    best_raw: float
    mean_raw: float
    best_penalized: float
    mean_penalized: float


def expected_fes(avg_steps: float | None, swarm_size: int, success_rate: float | None):
    """Expected function evaluations to reach the goal; ``None`` when no run succeeded."""
    if not success_rate or avg_steps is None:
        return None
    return avg_steps * swarm_size / success_rate


def summarize(records: list[RunRecord], swarm_size: int, has_target: bool = True) -> RunStatistics:
    """Aggregate run records.

    ``best_raw`` is the raw conflict of the run with the best penalised
    conflict, so the best pair always describes one point.
    """
    if not records:
        nan = math.nan
        return RunStatistics(0, swarm_size, None, None, None, None, nan, nan, nan, nan)
    raw = np.array([r.raw_conflict for r in records])
    pen = np.array([r.penalized_conflict for r in records])
    best = int(np.argmin(pen))
    if has_target:
        hits = [r.steps for r in records if r.target_met]
        rate = len(hits) / len(records)
        avg = float(np.mean(hits)) if hits else None
        low = int(min(hits)) if hits else None
    else:
        rate = avg = low = None
    return RunStatistics(
        runs=len(records),
        swarm_size=swarm_size,
        success_rate=rate,
        avg_steps_to_goal=avg,
        min_steps_to_goal=low,
        expected_fes=expected_fes(avg, swarm_size, rate),
        best_raw=float(raw[best]),
        mean_raw=float(raw.mean()),
        best_penalized=float(pen[best]),
        mean_penalized=float(pen.mean()),
    )


def _one_run(config: ExperimentConfig, r: int, keep_trace: bool) -> RunRecord:
    res: RunResult = run(config.build_problem(), config.swarm, config.build_handler(),
                         rng_seed=config.seed_for(r))
    return RunRecord(r, res.seed, res.time_steps_used, res.gbest_conflict,
                     res.gbest_penalized_conflict, res.target_met,
                     res.trace if keep_trace else None)


def run_experiment(config: ExperimentConfig, keep_traces: bool = False):
    """Execute ``config.runs`` independent runs; returns ``(statistics, records)``.

    Records come back ordered by run index whatever the worker count.
    """
    # fail on bad names before any compute
    config.build_problem()
    config.build_handler()
    indices = range(config.runs)
    if config.workers > 1 and config.runs > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_one_run, [config] * config.runs, indices,
                                    [keep_traces] * config.runs))
    else:
        records = [_one_run(config, r, keep_traces) for r in indices]
    stats = summarize(records, config.swarm.swarm_size, config.swarm.conflict_target is not None)
    return stats, records


# Output

STAT_FIELDS = ["runs", "swarm_size", "success_rate", "avg_steps_to_goal", "min_steps_to_goal",
               "expected_fes", "best_raw", "mean_raw", "best_penalized", "mean_penalized"]
RUN_FIELDS = ["run", "seed", "steps", "raw_conflict", "penalized_conflict", "target_met"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_results(stats: RunStatistics, records: list[RunRecord], fmt: str = "csv",
                 stream: TextIO | None = None, config: ExperimentConfig | None = None) -> str:
    """Render results as ``"csv"`` (summary table, blank line, per-run table) or ``"text"``.

    The rendered string is returned and, when ``stream`` is given, also written to it.
    """
    echo = config.echo() if config is not None else {}
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(echo) + STAT_FIELDS)
        w.writerow([_fmt(v) for v in echo.values()] + [_fmt(getattr(stats, f)) for f in STAT_FIELDS])
        buf.write("\n")
        w.writerow(RUN_FIELDS)
        for r in records:
            w.writerow([_fmt(getattr(r, f)) for f in RUN_FIELDS])
    elif fmt == "text":
        for k, v in echo.items():
            if v != "":
                buf.write(f"{k:>17}: {v}\n")
        for f in STAT_FIELDS:
            v = getattr(stats, f)
            shown = "absent" if v is None else (f"{v:.6g}" if isinstance(v, float) else v)
            buf.write(f"{f:>17}: {shown}\n")
    else:
        raise ConfigurationError(f"unknown output format {fmt!r}; use 'csv' or 'text'")
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def parse_results(text: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Inverse of the csv format: ``(summary row, run rows)`` as strings."""
    summary_part, _, runs_part = text.partition("\n\n")
    summary = list(csv.DictReader(io.StringIO(summary_part)))
    runs = list(csv.DictReader(io.StringIO(runs_part)))
    return (summary[0] if summary else {}), runs


def write_traces(records: list[RunRecord], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["run", "step", "best", "average"])
    for r in records:
        if r.trace is None:
            continue
        for t, (best, avg) in enumerate(r.trace):
            w.writerow([r.run, t, repr(float(best)), repr(float(avg))])


def write_output(text: str, path: str | None, stdout: TextIO) -> None:
    if path in (None, "-"):
        stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


# Configuration loading

SWARM_KEYS = {"size", "preset", "coefficient_sets", "topology", "update_mode",
              "velocity_clamp", "steps", "target", "init_attempts"}
TOP_KEYS = {"problem", "dimension", "formulation", "discrete", "handler", "swarm",
            "runs", "seed", "workers", "instance"}


@dataclass
class ScheduleSpec:
    instance_dir: str
    swarm: SwarmConfig
    seed: int


def _read_file(path, problems) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        problems.append(f"config: cannot read {path}: {exc.strerror}")
        return {}
    except yaml.YAMLError as exc:
        problems.append(f"config: {path} is not valid YAML/JSON: {exc}")
        return {}
    if not isinstance(data, dict):
        problems.append("config: top level must be a mapping")
        return {}
    return data


def _merge(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for k, v in overrides.items():
        if v is None:
            continue
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _int(value, path, problems, low=None, high=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        try:
            if isinstance(value, str) and value.strip().lstrip("-").isdigit():
                value = int(value)
            else:
                raise ValueError
        except ValueError:
            problems.append(f"{path}: expected an integer, got {value!r}")
            return None
    value = int(value)
    if low is not None and value < low:
        problems.append(f"{path}: must be >= {low}, got {value}")
        return None
    if high is not None and value > high:
        problems.append(f"{path}: must be <= {high}, got {value}")
        return None
    return value


def _float(value, path, problems, positive=False):
    try:
        value = float(value)
    except (TypeError, ValueError):
        problems.append(f"{path}: expected a number, got {value!r}")
        return None
    if positive and not value > 0:
        problems.append(f"{path}: must be > 0, got {value}")
        return None
    return value


def _swarm_from(data: dict, problems: list[str], default_steps: int, default_size: int = 30,
                target=None):
    sw = data.get("swarm", {}) or {}
    if not isinstance(sw, dict):
        problems.append("swarm: must be a mapping")
        sw = {}
    for key in sorted(set(sw) - SWARM_KEYS):
        problems.append(f"swarm.{key}: unknown key")
    size = _int(sw.get("size", default_size), "swarm.size", problems, low=1)
    steps = _int(sw.get("steps", default_steps), "swarm.steps", problems, low=0)
    preset_name = None
    sets = None
    if "coefficient_sets" in sw:
        sets = []
        entries = sw["coefficient_sets"]
        if not isinstance(entries, list) or not entries:
            problems.append("swarm.coefficient_sets: expected a non-empty list")
        else:
            for k, e in enumerate(entries):
                p = f"swarm.coefficient_sets[{k}]"
                if not isinstance(e, dict) or set(e) - {"w", "iw", "sw", "fraction"}:
                    problems.append(f"{p}: expected keys w, iw, sw, fraction")
                    continue
                vals = [_float(e.get(x), f"{p}.{x}", problems) for x in ("w", "iw", "sw", "fraction")]
                if None in vals:
                    continue
                if min(vals) < 0:
                    problems.append(f"{p}: values must be >= 0")
                    continue
                sets.append((Coefficients(*vals[:3]), vals[3]))
            if sets and not math.isclose(sum(f for _, f in sets), 1.0, abs_tol=1e-9):
                problems.append("swarm.coefficient_sets: fractions must sum to 1")
    else:
        preset_name = sw.get("preset", "gp3")
        if preset_name not in PRESETS:
            problems.append(f"swarm.preset: unknown preset {preset_name!r}; choose from {sorted(PRESETS)}")
        else:
            sets = list(PRESETS[preset_name])
    topology = None
    try:
        topology = Topology.parse(str(sw.get("topology", "global")))
    except ConfigurationError as exc:
        problems.append(f"swarm.topology: {exc}")
    mode = sw.get("update_mode", "synchronous")
    if mode not in ("synchronous", "asynchronous"):
        problems.append(f"swarm.update_mode: must be 'synchronous' or 'asynchronous', got {mode!r}")
    clamp = sw.get("velocity_clamp")
    if clamp is not None:
        try:
            arr = np.asarray(clamp, dtype=float)
            if np.any(arr <= 0):
                problems.append("swarm.velocity_clamp: entries must be > 0")
        except (TypeError, ValueError):
            problems.append(f"swarm.velocity_clamp: expected numbers, got {clamp!r}")
    tgt = sw.get("target", target)
    if tgt is not None:
        tgt = _float(tgt, "swarm.target", problems)
    attempts = _int(sw.get("init_attempts", 10_000), "swarm.init_attempts", problems, low=1)
    if problems or None in (size, steps, topology, attempts) or not sets:
        return None, preset_name
    return SwarmConfig(swarm_size=size, coefficient_sets=sets, topology=topology,
                       update_mode=mode, velocity_clamp=clamp, max_time_steps=steps,
                       conflict_target=tgt, init_attempts=attempts), preset_name


def _seed(data, problems, env):
    seed = data.get("seed", 0)
    if "seed" not in data.get("_flags", {}) and env.get(SEED_ENV):
        seed = env[SEED_ENV]
    return _int(seed, "seed", problems, low=0, high=U64 - 1)


def validate_and_load(path: str | None = None, overrides: dict | None = None,
                      kind: str = "optimize", env: dict | None = None):
    """Merge a YAML/JSON config file with flag overrides (flags win) and validate.

    ``kind="optimize"`` returns an :class:`ExperimentConfig`, ``kind="schedule"`` a
    :class:`ScheduleSpec`. All problems are collected and raised together as
    :class:`ConfigError`. The seed can also come from the ``PSOKIT_SEED``
    environment variable, which beats the file but not an explicit flag.
    """
    problems: list[str] = []
    env = os.environ if env is None else env
    data = _read_file(path, problems) if path else {}
    overrides = overrides or {}
    data = _merge(data, overrides)
    data["_flags"] = {k for k, v in overrides.items() if v is not None}
    for key in sorted(set(data) - TOP_KEYS - {"_flags"}):
        problems.append(f"{key}: unknown key")

    if kind == "schedule":
        instance = data.get("instance")
        if not instance:
            problems.append("instance: required (directory with shipments/fitness/residency csv)")
        swarm, _ = _swarm_from(data, problems, default_steps=200)
        seed = _seed(data, problems, env)
        if problems:
            raise ConfigError(problems)
        swarm.rng_seed = seed
        return ScheduleSpec(str(instance), swarm, seed)

    name = data.get("problem")
    if name is None:
        problems.append("problem: required")
    elif name not in PROBLEM_NAMES:
        problems.append(f"problem: unknown problem {name!r}; choose from {PROBLEM_NAMES}")
    dimension = data.get("dimension")
    if dimension is not None:
        dimension = _int(dimension, "dimension", problems, low=2 if name == "schaffer_f6" else 1)
        if name is not None and name not in BENCHMARKS:
            problems.append("dimension: only benchmark functions accept a dimension")
        if name == "schaffer_f6" and dimension not in (None, 2):
            problems.append("dimension: schaffer_f6 is 2-dimensional")
    formulation = data.get("formulation", "hu")
    if formulation not in ("hu", "toscano"):
        problems.append(f"formulation: must be 'hu' or 'toscano', got {formulation!r}")
    discrete = data.get("discrete", True)
    if not isinstance(discrete, bool):
        problems.append(f"discrete: expected true/false, got {discrete!r}")

    handler = data.get("handler", "penalization")
    params = {}
    if isinstance(handler, dict):
        params = {k: v for k, v in handler.items() if k != "name"}
        handler = handler.get("name", "penalization")
    if handler not in HANDLERS:
        problems.append(f"handler: unknown handler {handler!r}; choose from {sorted(HANDLERS)}")
    else:
        allowed = {"penalization": {"lam", "alpha"}, "bisection": {"max_splits"},
                   "cutoff": {"max_splits"}, "preserving": set()}[handler]
        for key in sorted(set(params) - allowed):
            problems.append(f"handler.{key}: not a parameter of {handler}")
        if "max_splits" in params:
            params["max_splits"] = _int(params["max_splits"], "handler.max_splits", problems, low=1)
        for key in ("lam", "alpha"):
            if key in params:
                params[key] = _float(params[key], f"handler.{key}", problems, positive=True)

    target = default_target(name) if isinstance(name, str) else None
    swarm, preset_name = _swarm_from(data, problems, default_steps=10000, target=target)
    runs = _int(data.get("runs", 1), "runs", problems, low=1)
    workers = _int(data.get("workers", 1), "workers", problems, low=1)
    seed = _seed(data, problems, env)
    if problems:
        raise ConfigError(problems)
    swarm.rng_seed = seed
    return ExperimentConfig(problem=name, swarm=swarm, handler=handler, handler_params=params,
                            runs=runs, seed_base=seed, dimension=dimension,
                            formulation=formulation, discrete=discrete, preset=preset_name,
                            workers=workers)
