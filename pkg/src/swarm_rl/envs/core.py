"""Functional classic-control environments: ``reset`` and ``step`` are pure.

States are immutable ``EnvState`` values, so stepping the same state with
the same action always yields the same result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ContractError
from . import constants as K


@dataclass(frozen=True)
class EnvSpec:
    tag: str
    obs_dim: int
    n_actions: int | None  # None for continuous control
    action_bound: float | None
    max_steps: int

    @property
    def discrete(self) -> bool:
        return self.n_actions is not None


SPECS = {
    "cartpole": EnvSpec("cartpole", 4, 2, None, K.CARTPOLE_MAX_STEPS),
    "acrobot": EnvSpec("acrobot", 6, 3, None, K.ACROBOT_MAX_STEPS),
    "pendulum": EnvSpec("pendulum", 3, None, K.PENDULUM_MAX_TORQUE, K.PENDULUM_MAX_STEPS),
}


def env_spec(tag: str) -> EnvSpec:
    try:
        return SPECS[tag]
    except KeyError:
        raise ConfigError(f"env: unknown tag {tag!r} (expected one of {sorted(SPECS)})") from None


@dataclass(frozen=True)
class EnvState:
    tag: str
    physical: tuple
    steps: int = 0


@dataclass(frozen=True)
class StepResult:
    next_state: EnvState
    reward: float
    done: bool
    truncated: bool = False  # done only because the step cap was hit


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def reset(tag: str, seed=None) -> EnvState:
    """Initial state; ``seed`` may be an int, ``None`` or a ``Generator``."""
    env_spec(tag)
    rng = _rng(seed)
    if tag == "cartpole":
        b = K.CARTPOLE_RESET_BOUND
        phys = rng.uniform(-b, b, 4)
    elif tag == "acrobot":
        b = K.ACROBOT_RESET_BOUND
        phys = rng.uniform(-b, b, 4)
    else:
        phys = rng.uniform([-math.pi, -1.0], [math.pi, 1.0])
    return EnvState(tag, tuple(float(v) for v in phys), 0)


def observe(state: EnvState) -> np.ndarray:
    """Observation vector fed to the agents."""
    p = state.physical
    if state.tag == "cartpole":
        return np.array(p)
    if state.tag == "acrobot":
        t1, t2, d1, d2 = p
        return np.array([math.cos(t1), math.sin(t1), math.cos(t2), math.sin(t2), d1, d2])
    th, thdot = p
    return np.array([math.cos(th), math.sin(th), thdot])


def step(state: EnvState, action) -> StepResult:
    tag = state.tag
    if tag == "cartpole":
        return _cartpole_step(state, _discrete(action, 2, tag))
    if tag == "acrobot":
        return _acrobot_step(state, _discrete(action, 3, tag))
    if tag == "pendulum":
        return _pendulum_step(state, _torque(action))
    raise ConfigError(f"env: unknown tag {tag!r}")


def _discrete(action, n, tag) -> int:
    try:
        a = int(action)
    except (TypeError, ValueError):
        raise ContractError(f"{tag}: action must be an integer in [0, {n}), got {action!r}") from None
    if a != action or not 0 <= a < n:
        raise ContractError(f"{tag}: action must be an integer in [0, {n}), got {action!r}")
    return a


def _torque(action) -> float:
    u = np.asarray(action, dtype=np.float64).reshape(-1)
    if u.size != 1 or not math.isfinite(u[0]) or abs(u[0]) > K.PENDULUM_MAX_TORQUE:
        raise ContractError(f"pendulum: torque must be one finite value in [-2, 2], got {action!r}")
    return float(u[0])


def _check_live(state: EnvState, cap: int):
    if state.steps >= cap:
        raise ContractError(f"{state.tag}: episode already reached its {cap}-step cap")


# --- CartPole ------------------------------------------------------------------


def _cartpole_step(state: EnvState, action: int) -> StepResult:
    _check_live(state, K.CARTPOLE_MAX_STEPS)
    x, x_dot, theta, theta_dot = state.physical
    force = K.CARTPOLE_FORCE if action == 1 else -K.CARTPOLE_FORCE
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + K.CARTPOLE_POLEMASS_LENGTH * theta_dot * theta_dot * sin_t) / K.CARTPOLE_TOTAL_MASS
    theta_acc = (K.CARTPOLE_GRAVITY * sin_t - cos_t * temp) / (
        K.CARTPOLE_HALF_LENGTH
        * (4.0 / 3.0 - K.CARTPOLE_MASS_POLE * cos_t * cos_t / K.CARTPOLE_TOTAL_MASS)
    )
    x_acc = temp - K.CARTPOLE_POLEMASS_LENGTH * theta_acc * cos_t / K.CARTPOLE_TOTAL_MASS
    dt = K.CARTPOLE_DT
    x = x + dt * x_dot
    x_dot = x_dot + dt * x_acc
    theta = theta + dt * theta_dot
    theta_dot = theta_dot + dt * theta_acc
    steps = state.steps + 1
    failed = abs(x) > K.CARTPOLE_X_LIMIT or abs(theta) > K.CARTPOLE_THETA_LIMIT
    capped = steps >= K.CARTPOLE_MAX_STEPS
    nxt = EnvState("cartpole", (x, x_dot, theta, theta_dot), steps)
    return StepResult(nxt, 1.0, failed or capped, capped and not failed)


# --- Acrobot -------------------------------------------------------------------


def _acrobot_derivs(s, torque):
    m1, m2 = K.ACROBOT_LINK_MASS_1, K.ACROBOT_LINK_MASS_2
    l1 = K.ACROBOT_LINK_LENGTH_1
    lc1, lc2 = K.ACROBOT_LINK_COM_1, K.ACROBOT_LINK_COM_2
    i1 = i2 = K.ACROBOT_LINK_MOI
    g = K.ACROBOT_GRAVITY
    t1, t2, d1, d2 = s
    c2 = math.cos(t2)
    s2 = math.sin(t2)
    dd1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2) + i1 + i2
    dd2 = m2 * (lc2**2 + l1 * lc2 * c2) + i2
    phi2 = m2 * lc2 * g * math.cos(t1 + t2 - math.pi / 2.0)
    phi1 = (
        -m2 * l1 * lc2 * d2 * d2 * s2
        - 2 * m2 * l1 * lc2 * d2 * d1 * s2
        + (m1 * lc1 + m2 * l1) * g * math.cos(t1 - math.pi / 2.0)
        + phi2
    )
    acc2 = (torque + dd2 / dd1 * phi1 - m2 * l1 * lc2 * d1 * d1 * s2 - phi2) / (
        m2 * lc2**2 + i2 - dd2 * dd2 / dd1
    )
    acc1 = -(dd2 * acc2 + phi1) / dd1
    return (d1, d2, acc1, acc2)


def _wrap(x, lo, hi):
    span = hi - lo
    while x > hi:
        x -= span
    while x < lo:
        x += span
    return x


def _acrobot_step(state: EnvState, action: int) -> StepResult:
    _check_live(state, K.ACROBOT_MAX_STEPS)
    torque = K.ACROBOT_TORQUES[action]
    s = state.physical
    dt = K.ACROBOT_DT
    # one classical RK4 step of size dt, as in the Gym implementation
    k1 = _acrobot_derivs(s, torque)
    k2 = _acrobot_derivs(tuple(a + dt / 2 * b for a, b in zip(s, k1)), torque)
    k3 = _acrobot_derivs(tuple(a + dt / 2 * b for a, b in zip(s, k2)), torque)
    k4 = _acrobot_derivs(tuple(a + dt * b for a, b in zip(s, k3)), torque)
    ns = [a + dt / 6.0 * (p + 2 * q + 2 * r + w) for a, p, q, r, w in zip(s, k1, k2, k3, k4)]
    t1 = _wrap(ns[0], -math.pi, math.pi)
    t2 = _wrap(ns[1], -math.pi, math.pi)
    d1 = min(max(ns[2], -K.ACROBOT_MAX_VEL_1), K.ACROBOT_MAX_VEL_1)
    d2 = min(max(ns[3], -K.ACROBOT_MAX_VEL_2), K.ACROBOT_MAX_VEL_2)
    steps = state.steps + 1
    goal = -math.cos(t1) - math.cos(t2 + t1) > 1.0
    capped = steps >= K.ACROBOT_MAX_STEPS
    nxt = EnvState("acrobot", (t1, t2, d1, d2), steps)
    return StepResult(nxt, 0.0 if goal else -1.0, goal or capped, capped and not goal)


# --- Pendulum ------------------------------------------------------------------


def angle_normalize(x: float) -> float:
    return ((x + math.pi) % (2 * math.pi)) - math.pi


def _pendulum_step(state: EnvState, u: float) -> StepResult:
    _check_live(state, K.PENDULUM_MAX_STEPS)
    th, thdot = state.physical
    g, m, l, dt = K.PENDULUM_GRAVITY, K.PENDULUM_MASS, K.PENDULUM_LENGTH, K.PENDULUM_DT
    an = angle_normalize(th)
    cost = an * an + 0.1 * thdot * thdot + 0.001 * u * u
    new_thdot = thdot + (3 * g / (2 * l) * math.sin(th) + 3.0 / (m * l * l) * u) * dt
    new_thdot = min(max(new_thdot, -K.PENDULUM_MAX_SPEED), K.PENDULUM_MAX_SPEED)
    new_th = th + new_thdot * dt
    steps = state.steps + 1
    capped = steps >= K.PENDULUM_MAX_STEPS
    return StepResult(EnvState("pendulum", (new_th, new_thdot), steps), 0.0 - cost, capped, capped)
