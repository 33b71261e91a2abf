"""Unconstrained benchmark suite. All functions take ``x`` of shape ``(..., n)``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..problem import Problem


def sphere(x):
    x = np.asarray(x, dtype=float)
    return np.sum(x**2, axis=-1)


def rosenbrock(x):
    x = np.asarray(x, dtype=float)
    a, b = x[..., :-1], x[..., 1:]
    return np.sum(100.0 * (b - a**2) ** 2 + (a - 1.0) ** 2, axis=-1)


def rastrigin(x):
    x = np.asarray(x, dtype=float)
    return np.sum(x**2 - 10.0 * np.cos(2.0 * np.pi * x) + 10.0, axis=-1)


def griewank(x):
    x = np.asarray(x, dtype=float)
    j = np.arange(1, x.shape[-1] + 1)
    return 1.0 + np.sum(x**2, axis=-1) / 4000.0 - np.prod(np.cos(x / np.sqrt(j)), axis=-1)


def schaffer_f6(x):
    x = np.asarray(x, dtype=float)
    r2 = x[..., 0] ** 2 + x[..., 1] ** 2
    return 0.5 + (np.sin(np.sqrt(r2)) ** 2 - 0.5) / (1.0 + 0.001 * r2) ** 2


@dataclass(frozen=True)
class BenchmarkSpec:
    name: str
    function: Callable
    dimension: int
    half_width: float
    target: float
    optimum: float = 0.0
    optimum_coordinate: float = 0.0

    @property
    def known_optimum(self) -> tuple[np.ndarray, float]:
        return np.full(self.dimension, self.optimum_coordinate), self.optimum

    def problem(self, dimension: int | None = None) -> Problem:
        n = dimension or self.dimension
        return Problem(
            name=self.name,
            lower=np.full(n, -self.half_width),
            upper=np.full(n, self.half_width),
            conflict=self.function,
            enforce_bounds=False,
        )


BENCHMARKS = {
    "sphere": BenchmarkSpec("sphere", sphere, 30, 100.0, 0.01),
    "rosenbrock": BenchmarkSpec("rosenbrock", rosenbrock, 30, 30.0, 100.0, optimum_coordinate=1.0),
    "rastrigin": BenchmarkSpec("rastrigin", rastrigin, 30, 5.12, 100.0),
    "griewank": BenchmarkSpec("griewank", griewank, 30, 600.0, 0.1),
    "schaffer_f6": BenchmarkSpec("schaffer_f6", schaffer_f6, 2, 100.0, 1e-5),
}
