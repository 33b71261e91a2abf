"""Command line entry point: ``psokit optimize | schedule | list``.

Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import io
import logging
import sys

from . import jetty
from .constraints import HANDLERS
from .errors import ConfigurationError, InitializationError, InstanceError
from .harness import (SEED_ENV, ConfigError, emit_results, run_experiment, validate_and_load,
                      write_output, write_traces)
from .problems import BENCHMARKS, PROBLEM_NAMES
from .swarm import PRESETS

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _swarm_flags(p):
    p.add_argument("--config", help="YAML or JSON configuration file")
    p.add_argument("--topology", help="global or ring:K")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--swarm-size", type=int)
    p.add_argument("--steps", type=int, help="maximum number of time-steps")
    p.add_argument("--update-mode", choices=["synchronous", "asynchronous"])
    p.add_argument("--seed", type=int, help=f"seed (run r uses seed+r); env {SEED_ENV} also works")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--trace", help="write per-step best/average conflict to this csv file")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="psokit", description="Particle swarm optimisation toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    opt = sub.add_parser("optimize", help="run benchmark or engineering problems")
    opt.add_argument("--problem", help=", ".join(PROBLEM_NAMES))
    opt.add_argument("--handler", choices=sorted(HANDLERS))
    opt.add_argument("--lambda", dest="lam", type=float, help="penalty coefficient")
    opt.add_argument("--alpha", type=float, help="penalty exponent")
    opt.add_argument("--max-splits", type=int, help="bisection / cut-off halving limit")
    opt.add_argument("--target", type=float, help="conflict goal that stops a run")
    opt.add_argument("--runs", type=int)
    opt.add_argument("--dimension", type=int)
    opt.add_argument("--formulation", choices=["hu", "toscano"], help="himmelblau variant")
    opt.add_argument("--continuous", action="store_true",
                     help="pressure vessel with continuous thicknesses")
    opt.add_argument("--workers", type=int, help="parallel processes for independent runs")
    opt.add_argument("--format", choices=["text", "csv"], default="text")
    _swarm_flags(opt)

    sch = sub.add_parser("schedule", help="optimise a jetty (berth allocation) instance")
    sch.add_argument("--instance", help="directory with shipments.csv, fitness.csv, residency.csv")
    _swarm_flags(sch)

    sub.add_parser("list", help="list problems, handlers and presets")
    return parser


def _swarm_overrides(args) -> dict:
    swarm = {
        "topology": args.topology,
        "preset": args.preset,
        "size": args.swarm_size,
        "steps": args.steps,
        "update_mode": args.update_mode,
    }
    if getattr(args, "target", None) is not None:
        swarm["target"] = args.target
    return {k: v for k, v in swarm.items() if v is not None}


def _optimize(args, stdout) -> None:
    handler = None
    params = {k: v for k, v in (("lam", args.lam), ("alpha", args.alpha),
                                ("max_splits", args.max_splits)) if v is not None}
    if args.handler or params:
        handler = {"name": args.handler or "penalization", **params}
    overrides = {
        "problem": args.problem,
        "handler": handler,
        "runs": args.runs,
        "seed": args.seed,
        "dimension": args.dimension,
        "formulation": args.formulation,
        "discrete": False if args.continuous else None,
        "workers": args.workers,
        "swarm": _swarm_overrides(args),
    }
    config = validate_and_load(args.config, overrides)
    stats, records = run_experiment(config, keep_traces=bool(args.trace))
    write_output(emit_results(stats, records, args.format, config=config), args.out, stdout)
    if args.trace:
        buf = io.StringIO()
        write_traces(records, buf)
        write_output(buf.getvalue(), args.trace, stdout)


def _schedule(args, stdout) -> None:
    overrides = {"instance": args.instance, "seed": args.seed, "swarm": _swarm_overrides(args)}
    spec = validate_and_load(args.config, overrides, kind="schedule")
    instance = jetty.load_instance(spec.instance_dir)
    best, result = jetty.schedule(instance, spec.swarm, rng_seed=spec.seed)
    table = io.StringIO()
    jetty.write_schedule(best, instance, table)
    summary = (f"total_demurrage={best.total_demurrage:.6g} makespan={best.makespan:.6g} "
               f"steps={result.time_steps_used} seed={spec.seed}\n")
    if args.out in (None, "-"):
        stdout.write(table.getvalue())
    else:
        write_output(table.getvalue(), args.out, stdout)
    stdout.write(summary)
    if args.trace:
        buf = io.StringIO()
        write_traces([_as_record(result)], buf)
        write_output(buf.getvalue(), args.trace, stdout)


def _as_record(result):
    from .harness import RunRecord

    return RunRecord(0, result.seed, result.time_steps_used, result.gbest_conflict,
                     result.gbest_penalized_conflict, result.target_met, result.trace)


def _list(stdout) -> None:
    stdout.write("problems:\n")
    for name in PROBLEM_NAMES:
        extra = ""
        if name in BENCHMARKS:
            b = BENCHMARKS[name]
            extra = f"  (dimension {b.dimension}, goal {b.target:g})"
        elif name == "himmelblau":
            extra = "  (--formulation hu|toscano)"
        elif name == "pressure_vessel":
            extra = "  (mixed-discrete; --continuous for the continuous variant)"
        stdout.write(f"  {name}{extra}\n")
    stdout.write("handlers:\n" + "".join(f"  {h}\n" for h in sorted(HANDLERS)))
    stdout.write("presets:\n")
    for name, sets in sorted(PRESETS.items()):
        desc = ", ".join(f"w={c.w} iw={c.iw} sw={c.sw} ({f:.2f})" for c, f in sets)
        stdout.write(f"  {name}: {desc}\n")


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        if args.command == "optimize":
            _optimize(args, stdout)
        elif args.command == "schedule":
            _schedule(args, stdout)
        elif args.command == "list":
            _list(stdout)
        else:
            parser.print_help(stderr)
            return EXIT_USAGE
    except (UsageError, ConfigError, ConfigurationError, InstanceError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (InitializationError, OSError, RuntimeError) as exc:
        stderr.write(f"runtime error: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
