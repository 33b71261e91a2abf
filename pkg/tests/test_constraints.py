import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psokit import Problem
from psokit.constraints import (Bisection, BisectionConfig, CutOff, Penalization, PenaltyConfig,
                                PreservingFeasibility, accept_position_bisection,
                                accept_position_cutoff, accept_position_preserving, bisect,
                                evaluate, is_feasible, make_handler, penalize, violations)
from psokit.errors import ConfigurationError
from psokit.problem import geq
from psokit.problems import get_problem
from psokit.swarm import Particle, SwarmConfig, ring, run


def x_at_most(limit, lower=-10.0, upper=10.0):
    return Problem("bounded", [lower], [upper], lambda x: x[..., 0] ** 2,
                   inequalities=[lambda x: x[..., 0] - limit])


def test_feasible_point_has_zero_violation():
    assert np.array_equal(violations(x_at_most(4.0), [3.0]), [0.0, 0.0, 0.0])
    assert is_feasible(x_at_most(4.0), [4.0])


def test_violation_columns_in_order():
    p = Problem("mix", [0.0, 0.0], [1.0, 1.0], lambda x: x.sum(-1),
                inequalities=[lambda x: x[..., 0] - 0.5],
                equalities=[lambda x: x[..., 0] - x[..., 1]])
    v = violations(p, [2.0, -1.0])
    # g, |h|, lower(x0, x1), upper(x0, x1)
    assert np.array_equal(v, [1.5, 3.0, 0.0, 1.0, 1.0, 0.0])


def test_penalty_example():
    # one violation of 2 on f=10: 10 + 1e6 * 2**2
    assert penalize(10.0, [2.0]) == 4_000_010.0
    # two unit violations on f=0
    assert penalize(0.0, [1.0, 1.0]) == 2e6
    assert penalize(5.0, [0.0, 0.0]) == 5.0


def test_penalty_overflow_is_infinite():
    assert penalize(0.0, [1e200]) == np.inf


def test_equality_tolerance():
    p = Problem("eq", [-1.0], [1.0], lambda x: x[..., 0], equalities=[lambda x: x[..., 0]])
    assert is_feasible(p, [5e-7])
    assert not is_feasible(p, [2e-6])
    ev = evaluate(p, [5e-7])
    assert ev.feasible and ev.penalized_conflict == ev.raw_conflict


def test_geq_constraint():
    p = Problem("ge", [-5.0], [5.0], lambda x: x[..., 0],
                inequalities=[geq(lambda x: x[..., 0] - 1.0)])
    assert is_feasible(p, [2.0]) and not is_feasible(p, [0.0])


def test_nan_constraint_counts_as_violated():
    p = Problem("nan", [-1.0], [1.0], lambda x: x[..., 0],
                inequalities=[lambda x: np.sqrt(x[..., 0])])
    v = violations(p, [-0.5])
    assert v[0] == np.inf and not is_feasible(p, [-0.5])
    assert evaluate(p, [-0.5]).penalized_conflict == np.inf


def test_bisection_halves_until_feasible():
    # from 0 toward 10 with x <= 4: 10 -> 5 -> 2.5
    accepted, splits = bisect(x_at_most(4.0), [[0.0]], [[10.0]])
    assert accepted[0, 0] == 2.5 and splits[0] == 2
    assert accept_position_bisection(x_at_most(4.0), [0.0], [10.0])[0] == 2.5


def test_bisection_gives_up_after_max_splits():
    accepted, splits = bisect(x_at_most(4.0), [[3.99]], [[8.0]], max_splits=1)
    # 3.99 + 4.01/2 = 5.995 is still infeasible
    assert accepted[0, 0] == 3.99 and splits[0] == -1


def test_bisection_velocity_rescaled_or_zeroed():
    h = Bisection(BisectionConfig(max_splits=3))
    old = np.array([[0.0], [3.99]])
    cand = np.array([[10.0], [400.0]])
    pos, vel = h.accept(x_at_most(4.0), old, cand, np.array([[10.0], [396.01]]))
    assert pos[:, 0].tolist() == [2.5, 3.99]
    assert vel[:, 0].tolist() == [2.5, 0.0]


def test_cutoff_clips_to_bounds():
    p = Problem("box", [0.0, 0.0], [1.0, 1.0], lambda x: x.sum(-1))
    assert np.array_equal(accept_position_cutoff(p, [0.5, 0.5], [1.7, -0.2]), [1.0, 0.0])
    pos, vel = CutOff().accept(p, np.array([[0.5, 0.5]]), np.array([[1.7, -0.2]]),
                               np.array([[1.2, -0.7]]))
    assert np.array_equal(pos, [[1.0, 0.0]]) and np.array_equal(vel, [[1.2, -0.7]])


def test_cutoff_falls_back_to_bisection():
    p = x_at_most(4.0)
    assert accept_position_cutoff(p, [0.0], [30.0])[0] == 2.5


def test_preserving_keeps_old_position():
    p = x_at_most(4.0)
    part = Particle(np.array([1.0]), np.array([9.0]), np.array([1.0]), 1.0)
    assert accept_position_preserving(p, [10.0], part)[0] == 1.0
    assert accept_position_preserving(p, [3.0], part)[0] == 3.0
    pos, vel = PreservingFeasibility().accept(p, np.array([[1.0]]), np.array([[10.0]]),
                                              np.array([[9.0]]))
    assert pos[0, 0] == 1.0 and vel[0, 0] == 9.0


def test_preserving_rejects_infeasible_particle():
    part = Particle(np.array([5.0]), np.zeros(1), np.array([5.0]), 25.0)
    with pytest.raises(RuntimeError):
        accept_position_preserving(x_at_most(4.0), [1.0], part)


@pytest.mark.parametrize("name, cls", [("penalization", Penalization), ("bisection", Bisection),
                                       ("cutoff", CutOff), ("preserving", PreservingFeasibility)])
def test_make_handler(name, cls):
    assert isinstance(make_handler(name), cls)


@pytest.mark.parametrize("name, params", [("nope", {}), ("preserving", {"lam": 1.0}),
                                          ("penalization", {"lam": -1.0}),
                                          ("bisection", {"max_splits": 0})])
def test_make_handler_rejects(name, params):
    with pytest.raises(ConfigurationError):
        make_handler(name, **params)


def test_per_constraint_lambda():
    assert penalize(0.0, [1.0, 2.0], PenaltyConfig(lam=(1.0, 10.0), alpha=1.0)) == 21.0


@pytest.mark.parametrize("handler", [Bisection(), PreservingFeasibility(), CutOff()])
@pytest.mark.parametrize("name", ["welded_beam", "spring_design", "himmelblau"])
def test_feasibility_kept_for_whole_history(handler, name):
    problem = get_problem(name)
    seen = []

    def check(swarm):
        seen.append(bool(is_feasible(problem, swarm.position).all()
                         and is_feasible(problem, swarm.pbest_position).all()))

    run(problem, SwarmConfig(10, "gp3", ring(1), max_time_steps=60), handler, rng_seed=1,
        callback=check)
    assert seen and all(seen)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4))
def test_raw_never_exceeds_penalized(x):
    ev = evaluate(get_problem("welded_beam"), x)
    assert ev.raw_conflict <= ev.penalized_conflict
    assert (ev.raw_conflict == ev.penalized_conflict) == (ev.feasible or
                                                          not np.any(ev.violations > 0))


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(-50, 50))
def test_bisection_result_is_on_segment_and_feasible(old, cand):
    p = x_at_most(4.0)
    old = min(old, 4.0)
    out, s = bisect(p, [[old]], [[cand]])
    assert is_feasible(p, out[0])
    if s[0] >= 0:
        assert out[0, 0] == pytest.approx(old + (cand - old) / 2 ** s[0])
    else:
        assert out[0, 0] == old
