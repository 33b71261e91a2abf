import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from psokit import Problem
from psokit.constraints import Bisection, CutOff, Penalization, PreservingFeasibility
from psokit.errors import ConfigurationError, InitializationError
from psokit.problems import get_problem
from psokit.problems.benchmarks import sphere
from psokit.swarm import (GLOBAL, TRELEA2, Coefficients, Particle, Swarm, SwarmConfig, Topology,
                          initialize_swarm, neighborhood_best, neighborhood_best_indices, ring,
                          run, step, update_position, update_velocity)

from conftest import CountingRng, ScriptedRng, reference_pso


def particle(x, v, p=None, c=0.0):
    x = np.asarray(x, dtype=float)
    return Particle(x, np.asarray(v, dtype=float), x if p is None else np.asarray(p, float), c)


def sphere_problem(n=1, half=10.0):
    return Problem("sphere", np.full(n, -half), np.full(n, half), sphere, enforce_bounds=False)


# update_velocity / update_position

def test_zero_weights_give_zero_velocity():
    rng = np.random.default_rng(0)
    v = update_velocity(particle([1.0, 2.0], [3.0, -4.0], [0.0, 5.0]), [7.0, 7.0],
                        Coefficients(0, 0, 0), rng)
    assert np.array_equal(v, [0.0, 0.0])


def test_pure_inertia_is_identity():
    v = update_velocity(particle([1.0, 2.0], [2.0, -3.0], [5.0, 5.0]), [9.0, 9.0],
                        Coefficients(1, 0, 0), np.random.default_rng(1))
    assert np.array_equal(v, [2.0, -3.0])


@pytest.mark.parametrize("seed", range(5))
def test_coincident_bests_only_damp_velocity(seed):
    v = update_velocity(particle([1.5], [4.0]), [1.5], Coefficients(0.5, 2.0, 2.0),
                        np.random.default_rng(seed))
    assert np.array_equal(v, [2.0])


def test_velocity_uses_separate_draw_per_term_and_dimension():
    rng = ScriptedRng([0.25, 0.5, 0.75, 0.1])  # ind(d0, d1), soc(d0, d1)
    p = particle([0.0, 0.0], [0.0, 0.0], [1.0, 1.0])
    v = update_velocity(p, [2.0, 2.0], Coefficients(0.0, 1.0, 1.0), rng)
    assert v == pytest.approx([0.25 + 0.75 * 2, 0.5 + 0.1 * 2])
    assert rng.drawn == 4


def test_velocity_clamp_applies_per_dimension():
    p = particle([0.0, 0.0], [10.0, -10.0])
    v = update_velocity(p, [0.0, 0.0], Coefficients(1, 0, 0), np.random.default_rng(0),
                        clamp=np.array([3.0, 5.0]))
    assert np.array_equal(v, [3.0, -5.0])


def test_dimension_mismatch_is_a_configuration_error():
    with pytest.raises(ConfigurationError):
        update_velocity(particle([0.0, 0.0], [0.0, 0.0]), [1.0], TRELEA2, np.random.default_rng(0))


@pytest.mark.parametrize("x, v, expected", [
    ([0, 0], [1, -1], [1, -1]),
    ([3], [0], [3]),
    ([1, 2, 3], [0.5, 0.5, 0.5], [1.5, 2.5, 3.5]),
])
def test_update_position(x, v, expected):
    assert np.array_equal(update_position(particle(x, v), v), expected)


# neighbourhood best

def swarm_of(conflicts):
    return [particle([float(i)], [0.0], [float(i)], c) for i, c in enumerate(conflicts)]


def test_global_best_is_the_minimum():
    pos, c = neighborhood_best(swarm_of([5, 1, 9]), 0, GLOBAL)
    assert c == 1 and pos[0] == 1.0


def test_ring_window_wraps_around():
    pos, c = neighborhood_best(swarm_of([5, 3, 0, 0, 2]), 0, ring(1))
    assert pos[0] == 4.0 and c == 2


def test_singleton_swarm_is_its_own_best():
    for topo in (GLOBAL, ring(1), ring(3)):
        pos, c = neighborhood_best(swarm_of([7]), 0, topo)
        assert pos[0] == 0.0 and c == 7


def test_ties_go_to_lowest_index():
    pos, _ = neighborhood_best(swarm_of([4, 1, 1, 1]), 2, GLOBAL)
    assert pos[0] == 1.0
    # window of particle 0 under ring(1) is {3, 0, 1}; 1 and 3 tie
    assert neighborhood_best_indices(np.array([4.0, 1, 9, 1]), ring(1))[0] == 1


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=12), st.integers(1, 4), st.data())
def test_ring_best_stays_in_window_and_matches_scalar(conflicts, k, data):
    c = np.array(conflicts, dtype=float)
    size = len(c)
    idx = neighborhood_best_indices(c, ring(k))
    for i in range(size):
        window = {(i + o) % size for o in range(-k, k + 1)}
        assert idx[i] in window
        assert c[idx[i]] == min(c[j] for j in window)
        assert idx[i] == min(j for j in window if c[j] == c[idx[i]])
        pos, best = neighborhood_best(swarm_of(conflicts), i, ring(k))
        assert int(pos[0]) == idx[i]


# step

def two_particle_swarm():
    # p0 at 3 heading +0.5, best 2; p1 at -1 heading +1, best -0.5 (the gbest)
    return Swarm(
        position=np.array([[3.0], [-1.0]]),
        velocity=np.array([[0.5], [1.0]]),
        pbest_position=np.array([[2.0], [-0.5]]),
        pbest_conflict=np.array([4.0, 0.25]),
        pbest_raw=np.array([4.0, 0.25]),
        conflict=np.array([9.0, 1.0]),
        subswarm=np.zeros(2, dtype=int),
    )


def test_two_particle_step_matches_hand_trace():
    # draws laid out as (particle, term, dimension)
    rng = ScriptedRng([0.25, 0.5, 0.75, 0.1])
    config = SwarmConfig(2, [(Coefficients(0.5, 1.5, 2.0), 1.0)])
    s = step(two_particle_swarm(), sphere_problem(), config, Penalization(), rng)
    # p0: v = 0.5*0.5 + 1.5*0.25*(2-3) + 2*0.5*(-0.5-3) = -3.625, x = -0.625
    # p1: v = 0.5*1 + 1.5*0.75*(-0.5+1) + 2*0.1*(-0.5+1) = 1.1625, x = 0.1625
    assert s.velocity[:, 0] == pytest.approx([-3.625, 1.1625], abs=1e-12)
    assert s.position[:, 0] == pytest.approx([-0.625, 0.1625], abs=1e-12)
    assert s.pbest_conflict == pytest.approx([0.390625, 0.02640625], abs=1e-12)
    assert s.best_index == 1


def test_asynchronous_step_sees_predecessor_bests():
    rng = ScriptedRng([0.25, 0.5, 0.75, 0.1])
    config = SwarmConfig(2, [(Coefficients(0.5, 1.5, 2.0), 1.0)], update_mode="asynchronous")
    s = step(two_particle_swarm(), sphere_problem(), config, Penalization(), rng)
    # p0 identical to the synchronous trace; p0's new best -0.625 (0.390625) is worse than
    # p1's -0.5 (0.25), so p1 still follows -0.5
    assert s.position[:, 0] == pytest.approx([-0.625, 0.1625], abs=1e-12)
    # make p0 improve beyond p1's best: then p1 must chase p0's fresh pbest
    sw = two_particle_swarm()
    sw.position[0, 0] = 0.4
    sw.velocity[0, 0] = -0.4
    sw.pbest_position[0, 0] = 0.4
    sw.pbest_conflict[0] = 0.16
    rng = ScriptedRng([0.0, 0.0, 0.5, 0.5])
    s = step(sw, sphere_problem(), SwarmConfig(2, [(Coefficients(1.0, 1.0, 1.0), 1.0)],
                                                velocity_clamp=100.0,
                                                update_mode="asynchronous"), Penalization(), rng)
    # p0: v = -0.4, x = 0.0 (conflict 0) -> pbest 0.0; p1: v = 1 + 0.5*(-0.5+1) + 0.5*(0+1) = 1.75 (1.5 if it saw the stale best)
    assert s.position[0, 0] == 0.0
    assert s.velocity[1, 0] == pytest.approx(1.75)


def test_fixed_point_at_optimum():
    s = Swarm(np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 2)), np.zeros(1), np.zeros(1),
              np.zeros(1), np.zeros(1, dtype=int))
    before = s.copy()
    for w in (0.0, 0.7, 1.0):
        step(s, sphere_problem(2), SwarmConfig(1, [(Coefficients(w, 2, 2), 1.0)]), rng=None)
    for f in ("position", "velocity", "pbest_position", "pbest_conflict"):
        assert np.array_equal(getattr(s, f), getattr(before, f))


def test_two_n_draws_per_particle_per_step():
    problem = sphere_problem(3)
    config = SwarmConfig(5, [(Coefficients(0.0, 1.0, 1.0), 1.0)], max_time_steps=1)
    s = initialize_swarm(problem, config)
    for mode in ("synchronous", "asynchronous"):
        config.update_mode = mode
        counter = CountingRng(np.random.default_rng(3))
        step(s, problem, config, Penalization(), counter)
        assert counter.drawn == 2 * 3 * 5


def test_non_finite_conflict_recorded_as_infinity():
    def nasty(x):
        return np.where(x[..., 0] > 0, np.nan, np.sum(x**2, axis=-1))

    problem = Problem("nasty", [-1.0], [1.0], nasty, enforce_bounds=False)
    res = run(problem, SwarmConfig(10, "trelea2", max_time_steps=30, rng_seed=2))
    assert np.isfinite(res.gbest_conflict)
    assert res.gbest_position[0] <= 0


# run

def test_run_is_deterministic():
    problem = get_problem("rastrigin", dimension=5)
    config = SwarmConfig(15, "gp3", ring(1), max_time_steps=150)
    a, b = run(problem, config, rng_seed=11), run(problem, config, rng_seed=11)
    assert a == b
    assert not (a == run(problem, config, rng_seed=12))


def test_zero_horizon_reports_initial_best():
    problem = sphere_problem(2)
    config = SwarmConfig(8, "trelea2", max_time_steps=0, conflict_target=1e9)
    res = run(problem, config, rng_seed=4)
    s = initialize_swarm(problem, config, rng=np.random.default_rng([4, 0]))
    assert res.time_steps_used == 0 and res.target_met
    assert res.gbest_conflict == s.pbest_conflict.min()
    assert run(problem, SwarmConfig(8, "trelea2", max_time_steps=0, conflict_target=-1.0),
               rng_seed=4).target_met is False


def test_one_dimensional_sphere_meets_target():
    # coarse random-search oracle: 30*10000 uniform samples in [-100,100] reach 0.01 easily
    rng = np.random.default_rng(0)
    assert (rng.uniform(-100, 100, 300_000) ** 2).min() <= 0.01
    res = run(get_problem("sphere", dimension=1), SwarmConfig(30, "gp3", conflict_target=0.01),
              rng_seed=0)
    assert res.target_met and res.gbest_conflict <= 0.01


@pytest.mark.parametrize("mode", ["synchronous", "asynchronous"])
@pytest.mark.parametrize("topology", [GLOBAL, ring(1), ring(2)])
def test_gbest_trace_is_non_increasing(mode, topology):
    problem = get_problem("griewank", dimension=4)
    res = run(problem, SwarmConfig(12, "gp3", topology, mode, max_time_steps=200), rng_seed=5)
    assert np.all(np.diff(res.trace[:, 0]) <= 0)
    assert len(res.trace) == res.time_steps_used + 1


def test_clamp_respected_every_step():
    problem = get_problem("rastrigin", dimension=4)
    clamp = np.array([0.1, 0.2, 0.3, 0.4])
    config = SwarmConfig(10, "original", velocity_clamp=clamp, max_time_steps=50)

    def check(swarm):
        assert np.all(np.abs(swarm.velocity) <= clamp)

    run(problem, config, rng_seed=1, callback=check)


def test_default_clamp_is_variable_range_for_unit_inertia():
    problem = sphere_problem(2, half=5.0)
    assert np.array_equal(SwarmConfig(coefficient_sets="original").clamp_for(problem), [10.0, 10.0])
    assert SwarmConfig(coefficient_sets="trelea2").clamp_for(problem) is None


def test_subswarm_partition():
    ids = SwarmConfig(30, "gp3").subswarm_ids()
    assert np.bincount(ids).tolist() == [10, 10, 10]
    ids = SwarmConfig(20, "gp3").subswarm_ids()
    assert np.bincount(ids).tolist() == [7, 7, 6]
    assert np.all(np.diff(ids) >= 0)


@pytest.mark.parametrize("kwargs", [
    dict(swarm_size=0),
    dict(update_mode="sideways"),
    dict(coefficient_sets=[(TRELEA2, 0.5)]),
    dict(velocity_clamp=[0.0, 1.0]),
    dict(coefficient_sets="nope"),
    dict(rng_seed=2**64),
])
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(ConfigurationError):
        SwarmConfig(**kwargs)


def test_negative_coefficients_rejected():
    with pytest.raises(ConfigurationError):
        Coefficients(-0.1, 1, 1)


def test_topology_parse():
    assert Topology.parse("global") == GLOBAL
    assert Topology.parse("ring:2") == ring(2)
    for bad in ("ring", "ring:x", "star", "ring:0"):
        with pytest.raises(ConfigurationError):
            Topology.parse(bad)


def test_infeasible_initialisation_names_handler():
    problem = Problem("empty", [0.0], [1.0], sphere, inequalities=[lambda x: 1.0 + 0 * x[..., 0]])
    with pytest.raises(InitializationError, match="preserving"):
        run(problem, SwarmConfig(3, "trelea2", max_time_steps=1, init_attempts=50),
            PreservingFeasibility())


@pytest.mark.parametrize("k", [None, 1])
def test_engine_matches_scalar_reference_without_constraints(k):
    problem = sphere_problem(2, half=4.0)
    topo = GLOBAL if k is None else ring(k)
    config = SwarmConfig(6, [(Coefficients(0.7, 1.4, 1.6), 1.0)], topo, max_time_steps=40)
    res = run(problem, config, Penalization(), rng_seed=9)
    hist, _, _ = reference_pso(sphere, lambda x: True, problem.lower, problem.upper, 6,
                               (0.7, 1.4, 1.6), 40, 9, k)
    assert np.array_equal(res.trace[:, 0], hist)


def test_preserving_feasibility_matches_death_penalty_reference():
    def f(x):
        return (x[..., 0] - 3.0) ** 2

    problem = Problem("shifted", [-5.0], [5.0], f, inequalities=[lambda x: x[..., 0] - 2.0])
    config = SwarmConfig(5, [(Coefficients(0.729, 1.494, 1.494), 1.0)], max_time_steps=60)
    res = run(problem, config, PreservingFeasibility(), rng_seed=3)
    hist, pbest, _ = reference_pso(f, lambda x: -5 <= x[0] <= 5 and x[0] <= 2.0,
                                   problem.lower, problem.upper, 5, (0.729, 1.494, 1.494), 60, 3)
    assert np.allclose(res.trace[:, 0], hist, rtol=0, atol=1e-12)
    assert res.gbest_position[0] <= 2.0
    assert res.gbest_conflict == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("handler", [PreservingFeasibility(), Bisection(), CutOff()])
def test_penalization_reduces_to_unconstrained(handler):
    # with nothing to violate every handler must walk the identical trajectory
    problem = get_problem("rastrigin", dimension=3)
    config = SwarmConfig(9, "gp3", ring(1), max_time_steps=80)
    assert run(problem, config, Penalization(), rng_seed=6) == run(problem, config, handler,
                                                                   rng_seed=6)
