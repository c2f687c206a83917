"""Reference particle swarm optimizer (global-best topology, maximization).

Used as a pure-swarm baseline and to cross-check the attraction term of the
hybrid update. Scores are maximized; ``minimize`` wraps an objective by
negation for benchmark functions such as the sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError


@dataclass(eq=False)
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    local_best: np.ndarray
    local_best_score: float = -math.inf


def velocity_update(p: Particle, global_best, inertia, c1, c2, rng=None, r1=None, r2=None) -> np.ndarray:
    """Inertia plus cognitive and social pulls, one random factor per dimension.

    ``r1``/``r2`` may be pinned explicitly; otherwise both are drawn from
    ``rng`` (r1 first).
    """
    global_best = np.asarray(global_best, dtype=np.float64)
    if not (p.position.shape == p.velocity.shape == p.local_best.shape == global_best.shape):
        raise ShapeError("particle vectors and global best must share one dimension")
    if r1 is None:
        r1 = rng.random(p.position.shape)
    if r2 is None:
        r2 = rng.random(p.position.shape)
    return (
        inertia * p.velocity
        + c1 * r1 * (p.local_best - p.position)
        + c2 * r2 * (global_best - p.position)
    )


def position_update(p: Particle) -> np.ndarray:
    return p.position + p.velocity


@dataclass(eq=False)
class Swarm:
    """Whole-population state; row ``i`` of each array is particle ``i``."""

    positions: np.ndarray
    velocities: np.ndarray
    local_best: np.ndarray
    local_best_scores: np.ndarray
    global_best: np.ndarray
    global_best_score: float
    inertia: float = 0.729
    c1: float = 1.494
    c2: float = 1.494
    trace: list = field(default_factory=list)

    def particle(self, i: int) -> Particle:
        return Particle(
            self.positions[i].copy(),
            self.velocities[i].copy(),
            self.local_best[i].copy(),
            float(self.local_best_scores[i]),
        )


def _score(objective, x) -> float:
    s = float(objective(x))
    if not math.isfinite(s):
        raise NumericError(f"objective returned {s} at {x}")
    return s


def init_swarm(objective, positions, inertia=0.729, c1=1.494, c2=1.494) -> Swarm:
    positions = np.array(positions, dtype=np.float64, ndmin=2)
    scores = np.array([_score(objective, x) for x in positions])
    best = int(np.argmax(scores))
    return Swarm(
        positions,
        np.zeros_like(positions),
        positions.copy(),
        scores,
        positions[best].copy(),
        float(scores[best]),
        inertia,
        c1,
        c2,
    )


def iterate(swarm: Swarm, objective, rng) -> None:
    """One synchronous iteration: move every particle, then refresh the bests."""
    shape = swarm.positions.shape
    r1 = rng.random(shape)
    r2 = rng.random(shape)
    x = swarm.positions
    swarm.velocities = (
        swarm.inertia * swarm.velocities
        + swarm.c1 * r1 * (swarm.local_best - x)
        + swarm.c2 * r2 * (swarm.global_best - x)
    )
    swarm.positions = x + swarm.velocities
    for i, xi in enumerate(swarm.positions):
        s = _score(objective, xi)
        if s > swarm.local_best_scores[i]:
            swarm.local_best[i] = xi
            swarm.local_best_scores[i] = s
            if s > swarm.global_best_score:
                swarm.global_best = xi.copy()
                swarm.global_best_score = s
    swarm.trace.append(swarm.global_best_score)


def optimize(
    objective,
    dim: int,
    n_particles: int,
    iterations: int,
    inertia: float = 0.729,
    c1: float = 1.494,
    c2: float = 1.494,
    seed: int = 0,
    low: float = -5.0,
    high: float = 5.0,
    init_positions=None,
):
    """Maximize ``objective``; returns ``(best_vector, best_score, trace)``.

    Positions start uniform in ``[low, high]^dim`` (or at ``init_positions``)
    with zero velocity. ``trace[k]`` is the global-best score after
    iteration ``k + 1``. Velocities are not clamped, so unbounded objectives
    can diverge.
    """
    if n_particles < 1 or iterations < 1:
        raise ValueError("need at least one particle and one iteration")
    rng = np.random.default_rng(seed)
    if init_positions is None:
        init_positions = rng.uniform(low, high, (n_particles, dim))
    swarm = init_swarm(objective, init_positions, inertia, c1, c2)
    if swarm.positions.shape != (n_particles, dim):
        raise ShapeError(f"init_positions must have shape {(n_particles, dim)}")
    for _ in range(iterations):
        iterate(swarm, objective, rng)
    return swarm.global_best, swarm.global_best_score, swarm.trace


def minimize(objective, dim, n_particles, iterations, **kwargs):
    """Minimization wrapper; scores and the trace are reported un-negated."""
    best, score, trace = optimize(lambda x: -objective(x), dim, n_particles, iterations, **kwargs)
    return best, -score, [-s for s in trace]


def sphere(x) -> float:
    return float(np.dot(x, x))
