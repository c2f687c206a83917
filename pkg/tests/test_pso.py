import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarm_rl.errors import NumericError, ShapeError
from swarm_rl.pso import Particle, init_swarm, iterate, minimize, optimize, position_update, sphere, velocity_update


def particle(x, v, y):
    return Particle(np.array(x, float), np.array(v, float), np.array(y, float))


def test_no_pulls_and_unit_inertia_keeps_velocity(rng):
    p = particle([1, 2], [0.5, -1], [3, 3])
    np.testing.assert_array_equal(velocity_update(p, [9, 9], 1.0, 0.0, 0.0, rng), [0.5, -1])


def test_coincident_bests_scale_velocity_only(rng):
    p = particle([1, 2], [0.5, -1], [1, 2])
    np.testing.assert_array_equal(velocity_update(p, [1, 2], 0.7, 1.5, 1.5, rng), [0.35, -0.7])


def test_velocity_hand_arithmetic():
    p = particle([1.0, -1.0], [0.2, 0.4], [2.0, 0.0])
    v = velocity_update(p, [0.0, 3.0], 0.5, 1.0, 2.0, r1=np.array([0.5, 0.25]), r2=np.array([0.1, 1.0]))
    # 0.5*v + 1*r1*(y - x) + 2*r2*(g - x)
    np.testing.assert_allclose(v, [0.1 + 0.5 - 0.2, 0.2 + 0.25 + 8.0])


def test_velocity_draws_r1_then_r2():
    p = particle([0, 0], [0, 0], [1, 1])
    r = np.random.default_rng(5).random((2, 2))
    v = velocity_update(p, [2, 2], 0.0, 1.0, 1.0, np.random.default_rng(5))
    np.testing.assert_allclose(v, r[0] * 1 + r[1] * 2)


def test_velocity_dimension_mismatch():
    with pytest.raises(ShapeError):
        velocity_update(particle([0, 0], [0, 0], [0, 0]), [1, 2, 3], 0.7, 1, 1, np.random.default_rng(0))


def test_position_update_examples():
    assert np.array_equal(position_update(particle([1, 2], [0, 0], [0, 0])), [1, 2])
    assert np.array_equal(position_update(particle([1, 2], [-1, 3], [0, 0])), [0, 5])
    p = particle([0, 0], [1, 0], [0, 0])
    p.position = position_update(p)
    p.position = position_update(p)
    assert np.array_equal(p.position, [2, 0])


def test_constant_objective():
    best, score, trace = optimize(lambda x: 3.5, 2, 5, 10, seed=1)
    assert score == 3.5 and all(t == 3.5 for t in trace)


def test_single_particle_at_optimum_stays():
    best, score, _ = minimize(sphere, 3, 1, 50, init_positions=np.zeros((1, 3)))
    assert score == 0.0 and not best.any()


def test_frozen_swarm_never_moves(rng):
    pos = rng.uniform(-1, 1, (4, 3))
    swarm = init_swarm(lambda x: -sphere(x), pos, inertia=0.0, c1=0.0, c2=0.0)
    for _ in range(5):
        iterate(swarm, lambda x: -sphere(x), rng)
        np.testing.assert_array_equal(swarm.positions, pos)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8), st.integers(1, 4))
def test_global_best_is_monotone_and_matches_locals(seed, n, dim):
    rng = np.random.default_rng(seed)
    swarm = init_swarm(lambda x: -sphere(x), rng.uniform(-3, 3, (n, dim)))
    prev = swarm.global_best_score
    for _ in range(10):
        iterate(swarm, lambda x: -sphere(x), rng)
        assert swarm.global_best_score >= prev
        assert swarm.global_best_score == swarm.local_best_scores.max()
        prev = swarm.global_best_score


def test_seed_determinism():
    a = minimize(sphere, 4, 10, 30, seed=3)[2]
    b = minimize(sphere, 4, 10, 30, seed=3)[2]
    assert a == b


def test_sphere_converges():
    _, score, trace = minimize(sphere, 10, 30, 2000, seed=0)
    assert score < 1e-3
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_non_finite_objective_raises():
    with pytest.raises(NumericError):
        optimize(lambda x: math.nan, 2, 3, 2)


def test_bad_budget():
    with pytest.raises(ValueError):
        optimize(sphere, 2, 0, 2)
