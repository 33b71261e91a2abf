"""Constrained engineering design problems.

Formulations follow the ones used by Hu, Eberhart and Shi for their
engineering-optimisation PSO study, including their variable boxes. The
Himmelblau problem additionally ships the variant used by Toscano Pulido and
Coello Coello, which differs in the ``x1*x4`` coefficient of the first
constraint. Constraints are written in ``g(x) <= 0`` form.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..discrete import Continuous, DiscreteSet
from ..problem import Problem


def _cols(x):
    x = np.asarray(x, dtype=float)
    return [x[..., j] for j in range(x.shape[-1])]


# Pressure vessel: shell thickness, head thickness, inner radius, length.

def pressure_vessel_cost(x):
    x1, x2, x3, x4 = _cols(x)
    return (0.6224 * x1 * x3 * x4 + 1.7781 * x2 * x3**2
            + 3.1661 * x1**2 * x4 + 19.84 * x1**2 * x3)


def pressure_vessel_constraints():
    def shell_thickness(x):
        x1, _, x3, _ = _cols(x)
        return -x1 + 0.0193 * x3

    def head_thickness(x):
        _, x2, x3, _ = _cols(x)
        return -x2 + 0.00954 * x3

    def volume(x):
        _, _, x3, x4 = _cols(x)
        return -np.pi * x3**2 * x4 - 4.0 / 3.0 * np.pi * x3**3 + 1296000.0

    def length(x):
        return _cols(x)[3] - 240.0

    return [shell_thickness, head_thickness, volume, length]


THICKNESS_STEP = 0.0625


def pressure_vessel(discrete: bool = True) -> Problem:
    """Mixed-discrete by default: both thicknesses are multiples of 0.0625 in [1, 99] steps."""
    lattice = DiscreteSet.lattice(THICKNESS_STEP, 1, 99)
    kinds = [lattice, lattice, Continuous(), Continuous()] if discrete else None
    return Problem(
        name="pressure_vessel" if discrete else "pressure_vessel_continuous",
        lower=[THICKNESS_STEP, THICKNESS_STEP, 10.0, 10.0],
        upper=[99 * THICKNESS_STEP, 99 * THICKNESS_STEP, 200.0, 200.0],
        conflict=pressure_vessel_cost,
        inequalities=pressure_vessel_constraints(),
        variable_kinds=kinds,
    )


# Welded beam: weld height, weld length, bar height, bar thickness.

P_LOAD, L_BEAM, E_MOD, G_MOD = 6000.0, 14.0, 30e6, 12e6
TAU_MAX, SIGMA_MAX, DELTA_MAX = 13600.0, 30000.0, 0.25


def welded_beam_cost(x):
    x1, x2, x3, x4 = _cols(x)
    return 1.10471 * x1**2 * x2 + 0.04811 * x3 * x4 * (14.0 + x2)


def _shear_stress(x):
    x1, x2, x3, _ = _cols(x)
    tau_p = P_LOAD / (np.sqrt(2.0) * x1 * x2)
    moment = P_LOAD * (L_BEAM + x2 / 2.0)
    radius = np.sqrt(x2**2 / 4.0 + ((x1 + x3) / 2.0) ** 2)
    polar = 2.0 * (np.sqrt(2.0) * x1 * x2 * (x2**2 / 12.0 + ((x1 + x3) / 2.0) ** 2))
    tau_pp = moment * radius / polar
    return np.sqrt(tau_p**2 + 2.0 * tau_p * tau_pp * x2 / (2.0 * radius) + tau_pp**2)


def _buckling_load(x):
    _, _, x3, x4 = _cols(x)
    return (4.013 * E_MOD * np.sqrt(x3**2 * x4**6 / 36.0) / L_BEAM**2
            * (1.0 - x3 / (2.0 * L_BEAM) * np.sqrt(E_MOD / (4.0 * G_MOD))))


def welded_beam_constraints():
    def shear(x):
        return _shear_stress(x) - TAU_MAX

    def bending(x):
        _, _, x3, x4 = _cols(x)
        return 6.0 * P_LOAD * L_BEAM / (x4 * x3**2) - SIGMA_MAX

    def weld_within_bar(x):
        x1, _, _, x4 = _cols(x)
        return x1 - x4

    def cost_cap(x):
        x1, x2, x3, x4 = _cols(x)
        return 0.10471 * x1**2 + 0.04811 * x3 * x4 * (14.0 + x2) - 5.0

    def min_weld(x):
        return 0.125 - _cols(x)[0]

    def deflection(x):
        _, _, x3, x4 = _cols(x)
        return 4.0 * P_LOAD * L_BEAM**3 / (E_MOD * x3**3 * x4) - DELTA_MAX

    def buckling(x):
        return P_LOAD - _buckling_load(x)

    return [shear, bending, weld_within_bar, cost_cap, min_weld, deflection, buckling]


def welded_beam() -> Problem:
    return Problem(
        name="welded_beam",
        lower=[0.1, 0.1, 0.1, 0.1],
        upper=[2.0, 10.0, 10.0, 2.0],
        conflict=welded_beam_cost,
        inequalities=welded_beam_constraints(),
    )


# Tension/compression spring: wire diameter, mean coil diameter, active coils.

def spring_weight(x):
    d, big_d, coils = _cols(x)
    return (coils + 2.0) * big_d * d**2


def spring_constraints():
    def deflection(x):
        d, big_d, coils = _cols(x)
        return 1.0 - big_d**3 * coils / (71785.0 * d**4)

    def shear(x):
        d, big_d, _ = _cols(x)
        return ((4.0 * big_d**2 - d * big_d) / (12566.0 * (big_d * d**3 - d**4))
                + 1.0 / (5108.0 * d**2) - 1.0)

    def surge_frequency(x):
        d, big_d, coils = _cols(x)
        return 1.0 - 140.45 * d / (big_d**2 * coils)

    def outer_diameter(x):
        d, big_d, _ = _cols(x)
        return (d + big_d) / 1.5 - 1.0

    return [deflection, shear, surge_frequency, outer_diameter]


def spring_design() -> Problem:
    return Problem(
        name="spring_design",
        lower=[0.05, 0.25, 2.0],
        upper=[2.0, 1.3, 15.0],
        conflict=spring_weight,
        inequalities=spring_constraints(),
    )


# Himmelblau's nonlinear problem, two published variants.

HIMMELBLAU_X1X4 = {"hu": 0.00026, "toscano": 0.0006262}


def himmelblau_cost(x):
    x1, _, x3, _, x5 = _cols(x)
    return 5.3578547 * x3**2 + 0.8356891 * x1 * x5 + 37.293239 * x1 - 40792.141


def himmelblau_constraints(formulation: str = "hu"):
    c14 = HIMMELBLAU_X1X4[formulation]

    def g1(x):
        x1, x2, x3, x4, x5 = _cols(x)
        return 85.334407 + 0.0056858 * x2 * x5 + c14 * x1 * x4 - 0.0022053 * x3 * x5

    def g2(x):
        x1, x2, x3, _, x5 = _cols(x)
        return 80.51249 + 0.0071317 * x2 * x5 + 0.0029955 * x1 * x2 + 0.0021813 * x3**2

    def g3(x):
        x1, _, x3, x4, x5 = _cols(x)
        return 9.300961 + 0.0047026 * x3 * x5 + 0.0012547 * x1 * x3 + 0.0019085 * x3 * x4

    # each stays inside a band: 0 <= g1 <= 92, 90 <= g2 <= 110, 20 <= g3 <= 25
    return [
        lambda x: g1(x) - 92.0, lambda x: -g1(x),
        lambda x: g2(x) - 110.0, lambda x: 90.0 - g2(x),
        lambda x: g3(x) - 25.0, lambda x: 20.0 - g3(x),
    ]


def himmelblau(formulation: str = "hu") -> Problem:
    if formulation not in HIMMELBLAU_X1X4:
        raise ValueError(f"himmelblau formulation must be one of {sorted(HIMMELBLAU_X1X4)}")
    return Problem(
        name=f"himmelblau_{formulation}",
        lower=[78.0, 33.0, 27.0, 27.0, 27.0],
        upper=[102.0, 45.0, 45.0, 45.0, 45.0],
        conflict=himmelblau_cost,
        inequalities=himmelblau_constraints(formulation),
    )


@dataclass(frozen=True)
class EngineeringProblemSpec:
    """A problem together with best-known coordinates and cost from the literature."""

    name: str
    best_known_value: float
    best_known_position: tuple
    variant: dict = field(default_factory=dict)

    def problem(self) -> Problem:
        return ENGINEERING_BUILDERS[self.name](**self.variant)


ENGINEERING_BUILDERS = {
    "pressure_vessel": pressure_vessel,
    "welded_beam": welded_beam,
    "spring_design": spring_design,
    "himmelblau": himmelblau,
}

BEST_KNOWN = [
    EngineeringProblemSpec("pressure_vessel", 6059.714335,
                           (0.8125, 0.4375, 42.098446, 176.636596), {"discrete": True}),
    EngineeringProblemSpec("welded_beam", 1.72485231,
                           (0.2057296398, 3.4704886656, 9.0366239104, 0.2057296398)),
    EngineeringProblemSpec("spring_design", 0.0126652,
                           (0.0516890570, 0.3567176405, 11.2889715710)),
    EngineeringProblemSpec("himmelblau", -31025.5614,
                           (78.0, 33.0, 27.07099711, 45.0, 44.96924255), {"formulation": "hu"}),
    EngineeringProblemSpec("himmelblau", -30665.539,
                           (78.0, 33.0, 29.9953, 45.0, 36.7758), {"formulation": "toscano"}),
]
